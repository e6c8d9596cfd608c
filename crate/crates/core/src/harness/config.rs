//! Experiment configuration: TOML with fixed sections, unknown keys rejected.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Mode;
use crate::error::{Error, Result};
use crate::gas::{EndStates, GasModel};
use crate::solver::{PerturbationSpec, Shape, StepConfig};

/// `L ≥ λ₃⁺(1+t_end) + 20√(1+t_end)`.
pub fn domain_rule(ends: &EndStates, gas: &GasModel, t_end: f64) -> f64 {
    ends.lambda3_plus(gas) * (1.0 + t_end) + 20.0 * (1.0 + t_end).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndsSection {
    pub v_minus: f64,
    pub theta_minus: f64,
    /// `θ₊ - θ₋`; negative values give a cooler right state.
    pub delta: f64,
}

impl Default for EndsSection {
    fn default() -> Self {
        Self { v_minus: 1.0, theta_minus: 1.0, delta: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Half-width `L`; the domain rule when absent.
    pub half_width: Option<f64>,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_width: None, n: 8192 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub cfl: f64,
    /// Ratio of successive `1+t` output times.
    pub rho: f64,
    pub theta_scheme: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { t_end: 2000.0, cfl: StepConfig::DEFAULT_CFL, rho: 1.1, theta_scheme: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub shape: Shape,
    pub eps_v: f64,
    pub eps_u: f64,
    /// Amplitude on `θ + (γ-1)u²/2R`; defaults to `-(γ-1)p₊ eps_v / R`,
    /// which keeps the excess mass off the contact field.
    pub eps_theta: Option<f64>,
    pub width: f64,
    pub center: f64,
    /// Center is shifted by a seeded uniform draw in `[-jitter, jitter]`.
    pub center_jitter: f64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            shape: Shape::Bump,
            eps_v: 0.01,
            eps_u: 0.01,
            eps_theta: None,
            width: 4.0,
            center: 0.0,
            center_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Nonzero,
    Zero,
}

impl From<ModeKind> for Mode {
    fn from(k: ModeKind) -> Mode {
        match k {
            ModeKind::Nonzero => Mode::NonzeroMass,
            ModeKind::Zero => Mode::ZeroMass,
        }
    }
}

impl From<Mode> for ModeKind {
    fn from(m: Mode) -> ModeKind {
        match m {
            Mode::NonzeroMass => ModeKind::Nonzero,
            Mode::ZeroMass => ModeKind::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub kind: ModeKind,
    /// Heat-kernel rate; defaults to a quarter of the fitted profile rate.
    pub alpha: Option<f64>,
}

impl Default for ModeSection {
    fn default() -> Self {
        Self { kind: ModeKind::Nonzero, alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Run the algebraic identity suite instead of a simulation.
    pub run_identities: bool,
    pub gas: GasModel,
    pub ends: EndsSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub perturbation: PerturbationSection,
    pub mode: ModeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: 0,
            run_identities: false,
            gas: GasModel::default(),
            ends: EndsSection::default(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            perturbation: PerturbationSection::default(),
            mode: ModeSection::default(),
        }
    }
}

/// Command-line overrides, applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub t_end: Option<f64>,
    pub delta: Option<f64>,
    /// Sets `eps_v = eps_u = eps` and restores the balanced `eps_theta`.
    pub eps: Option<f64>,
    pub grid_n: Option<usize>,
    pub seed: Option<u64>,
}

/// Zero-mass preset: bump-derivative data.
pub fn zero_mass_default() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.mode.kind = ModeKind::Zero;
    c.perturbation.shape = Shape::BumpDerivative;
    c
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(m) = o.mode {
            self.mode.kind = m.into();
            self.perturbation.shape = match m {
                Mode::ZeroMass => Shape::BumpDerivative,
                Mode::NonzeroMass => Shape::Bump,
            };
        }
        if let Some(t) = o.t_end {
            self.time.t_end = t;
        }
        if let Some(d) = o.delta {
            self.ends.delta = d;
        }
        if let Some(e) = o.eps {
            self.perturbation.eps_v = e;
            self.perturbation.eps_u = e;
            self.perturbation.eps_theta = None;
        }
        if let Some(n) = o.grid_n {
            self.grid.n = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.kind.into()
    }

    pub fn end_states(&self) -> Result<EndStates> {
        let e = &self.ends;
        EndStates::new(&self.gas, e.v_minus, e.theta_minus, e.theta_minus + e.delta)
            .map_err(|err| Error::Config(format!("[ends]: {err}")))
    }

    /// Domain half-width after applying the rule.
    pub fn half_width(&self) -> Result<f64> {
        let rule = domain_rule(&self.end_states()?, &self.gas, self.time.t_end);
        match self.grid.half_width {
            None => Ok(rule),
            Some(l) if l >= rule => Ok(l),
            Some(l) => Err(Error::Config(format!(
                "[grid] half_width = {l} is below the domain rule {rule:.4} for t_end = {}",
                self.time.t_end
            ))),
        }
    }

    pub fn perturbation_spec(&self) -> Result<PerturbationSpec> {
        let p = &self.perturbation;
        let ends = self.end_states()?;
        let eps_theta = p.eps_theta.unwrap_or(-self.gas.gm1_r() * ends.p_plus(&self.gas) * p.eps_v);
        let mut center = p.center;
        if p.center_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            center += p.center_jitter * rng.gen_range(-1.0..=1.0);
        }
        Ok(PerturbationSpec { shape: p.shape, eps_v: p.eps_v, eps_u: p.eps_u, eps_theta, width: p.width, center })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.gas.validate().map_err(|e| Error::Config(format!("[gas]: {e}")))?;
        self.end_states()?;
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return cfg(format!("[time] t_end must be finite and non-negative, got {}", t.t_end));
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return cfg(format!("[time] cfl must lie in (0, 1], got {}", t.cfl));
        }
        if !(t.rho > 1.0 && t.rho.is_finite()) {
            return cfg(format!("[time] rho must exceed 1, got {}", t.rho));
        }
        if !(0.5..=1.0).contains(&t.theta_scheme) {
            return cfg(format!("[time] theta_scheme must lie in [0.5, 1], got {}", t.theta_scheme));
        }
        if self.grid.n < 16 {
            return cfg(format!("[grid] n must be at least 16, got {}", self.grid.n));
        }
        self.half_width()?;
        let p = &self.perturbation;
        for (name, x) in [("eps_v", p.eps_v), ("eps_u", p.eps_u), ("eps_theta", p.eps_theta.unwrap_or(0.0))] {
            if !x.is_finite() {
                return cfg(format!("[perturbation] {name} must be finite"));
            }
        }
        if !(p.width > 0.0 && p.width.is_finite()) {
            return cfg(format!("[perturbation] width must be positive, got {}", p.width));
        }
        if !(p.center_jitter >= 0.0 && p.center.is_finite()) {
            return cfg("[perturbation] center must be finite and center_jitter non-negative".into());
        }
        if self.mode.kind == ModeKind::Zero && p.shape != Shape::BumpDerivative {
            return cfg("[mode] kind = \"zero\" requires [perturbation] shape = \"bump-derivative\"".into());
        }
        if let Some(a) = self.mode.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return cfg(format!("[mode] alpha must be positive, got {a}"));
            }
        }
        Ok(())
    }
}
