//! IMEX finite-difference solver for the Lagrangian Navier-Stokes system
//!
//! ```text
//! v_t - u_x = 0
//! u_t + p_x = (μ u_x / v)_x
//! E_t + (p u)_x = (κ θ_x / v + μ u u_x / v)_x,   E = Rθ/(γ-1) + u²/2
//! ```
//!
//! on a collocated uniform grid with Dirichlet end nodes. Pressure and
//! pressure-work fluxes are explicit central differences; viscosity and
//! heat conduction are θ-weighted implicit (tridiagonal). Each step is a
//! half-step predictor (backward Euler diffusion) followed by a full-step
//! corrector with midpoint explicit fluxes, which is second order in time
//! for `theta_scheme = 1/2`. Every update is in flux form, so interior sums
//! change only by the boundary fluxes, which the step reports.

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::gas::GasModel;
use crate::grid::{trapz, Field, Grid1D};
use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub v: Field,
    pub u: Field,
    pub theta: Field,
}

impl SimState {
    pub fn new(t: f64, v: Field, u: Field, theta: Field) -> Result<Self> {
        if v.grid() != u.grid() || v.grid() != theta.grid() {
            return invalid("state fields live on different grids");
        }
        let s = Self { t, v, u, theta };
        s.check_positive()?;
        Ok(s)
    }

    pub fn constant(grid: Grid1D, v: f64, u: f64, theta: f64) -> Self {
        Self { t: 0.0, v: Field::constant(grid, v), u: Field::constant(grid, u), theta: Field::constant(grid, theta) }
    }

    pub fn grid(&self) -> &Grid1D {
        self.v.grid()
    }

    pub fn pressure(&self, gas: &GasModel) -> Field {
        self.theta.zip_map(&self.v, |th, v| gas.r * th / v)
    }

    pub fn internal_energy(&self, gas: &GasModel) -> Field {
        self.theta.map(|th| gas.r * th / (gas.gamma - 1.0))
    }

    pub fn total_energy(&self, gas: &GasModel) -> Field {
        let e = self.internal_energy(gas);
        e.zip_map(&self.u, |e, u| e + 0.5 * u * u)
    }

    /// Trapezoid integrals of `(v, u, E)`.
    pub fn conserved_totals(&self, gas: &GasModel) -> [f64; 3] {
        let dx = self.grid().dx();
        [trapz(self.v.values(), dx), trapz(self.u.values(), dx), trapz(self.total_energy(gas).values(), dx)]
    }

    pub fn check_positive(&self) -> Result<()> {
        for (name, f) in [("v", &self.v), ("theta", &self.theta)] {
            if let Some(i) = f.values().iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::StepRejected {
                    t: self.t,
                    reason: format!("{name} = {} at node {i}", f.values()[i]),
                });
            }
        }
        if !self.u.is_finite() {
            return Err(Error::StepRejected { t: self.t, reason: "non-finite velocity".into() });
        }
        Ok(())
    }

    /// Largest acoustic speed `√(γp/v)`.
    pub fn max_speed(&self, gas: &GasModel) -> f64 {
        self.v
            .values()
            .iter()
            .zip(self.theta.values())
            .map(|(&v, &th)| (gas.gamma * gas.r * th / (v * v)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Plain-text dump: one row `x v u θ` per node.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# t = {:.10e}", self.t)?;
        writeln!(w, "# x\tv\tu\ttheta")?;
        let g = self.grid();
        for i in 0..g.len() {
            writeln!(
                w,
                "{:.10e}\t{:.16e}\t{:.16e}\t{:.16e}",
                g.x(i),
                self.v.values()[i],
                self.u.values()[i],
                self.theta.values()[i]
            )?;
        }
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"CWSIM1";

/// Little-endian checkpoint:
/// `"CWSIM1" | u64 n | f64 t | f64 half_width | f64[n] v | f64[n] u | f64[n] θ`.
pub fn write_checkpoint(s: &SimState, mut w: impl Write) -> std::io::Result<()> {
    let g = s.grid();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(g.len() as u64).to_le_bytes())?;
    w.write_all(&s.t.to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    for f in [&s.v, &s.u, &s.theta] {
        for x in f.values() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<SimState> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::InvalidState("not a checkpoint file".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut next_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let t = next_f64(&mut r)?;
    let half_width = next_f64(&mut r)?;
    let grid = Grid1D::new(half_width, n)?;
    let mut arrays = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(next_f64(&mut r)?);
        }
        arrays.push(Field::new(grid, vals)?);
    }
    let theta = arrays.pop().unwrap();
    let u = arrays.pop().unwrap();
    let v = arrays.pop().unwrap();
    SimState::new(t, v, u, theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub theta_scheme: f64,
    pub cfl_max: f64,
}

impl StepConfig {
    pub const DEFAULT_CFL: f64 = 0.4;

    /// Time step from the acoustic CFL bound of `state`.
    pub fn from_cfl(state: &SimState, gas: &GasModel, cfl: f64) -> Result<Self> {
        let speed = state.max_speed(gas);
        if !(speed > 0.0) {
            return invalid("state has no acoustic speed");
        }
        let cfg = Self { dt: cfl * state.grid().dx() / speed, theta_scheme: 0.5, cfl_max: cfl };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.5..=1.0).contains(&self.theta_scheme) {
            return invalid(format!("theta_scheme must lie in [1/2, 1], got {}", self.theta_scheme));
        }
        if !(self.cfl_max > 0.0) {
            return invalid("cfl_max must be positive");
        }
        Ok(())
    }
}

/// Source terms `(f_v, f_u, f_E)` at `(x, t)`; used for manufactured solutions.
pub type Forcing<'a> = &'a dyn Fn(f64, f64) -> [f64; 3];

/// Net inflow through the end interfaces, per conserved component.
pub type Inflow = [f64; 3];

struct Stage {
    v: Vec<f64>,
    u: Vec<f64>,
    theta: Vec<f64>,
    inflow: Inflow,
}

/// One θ-weighted stage: advance `base` by `k`, taking explicit fluxes
/// from `expl`, diffusion coefficients from `coef`, and weighting the
/// implicit diffusion by `w`.
#[allow(clippy::too_many_arguments)]
fn stage(
    gas: &GasModel,
    grid: &Grid1D,
    base: (&[f64], &[f64], &[f64]),
    expl: (&[f64], &[f64], &[f64]),
    coef_v: &[f64],
    k: f64,
    w: f64,
    forcing: Option<(Forcing, f64)>,
) -> Result<Stage> {
    let (v0, u0, th0) = base;
    let (ve, ue, the) = expl;
    let n = v0.len();
    let dx = grid.dx();
    let idx = 1.0 / dx;
    let idx2 = idx * idx;
    let cv = gas.r / (gas.gamma - 1.0);

    // interface coefficients μ/v and κ/v at i+1/2
    let mut nu = vec![0.0; n - 1];
    let mut chi = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let vh = 0.5 * (coef_v[i] + coef_v[i + 1]);
        nu[i] = gas.mu / vh;
        chi[i] = gas.kappa / vh;
    }
    let pe: Vec<f64> = (0..n).map(|i| gas.r * the[i] / ve[i]).collect();
    let src: Vec<[f64; 3]> = match forcing {
        Some((f, tf)) => (0..n).map(|i| f(grid.x(i), tf)).collect(),
        None => Vec::new(),
    };
    let src_at = |i: usize, c: usize| if src.is_empty() { 0.0 } else { src[i][c] };

    // momentum
    let mut lo = vec![0.0; n];
    let mut di = vec![1.0; n];
    let mut up = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs[0] = u0[0];
    rhs[n - 1] = u0[n - 1];
    for i in 1..n - 1 {
        let (a, b) = (nu[i - 1], nu[i]);
        lo[i] = -k * w * a * idx2;
        up[i] = -k * w * b * idx2;
        di[i] = 1.0 + k * w * (a + b) * idx2;
        let diff0 = (b * (u0[i + 1] - u0[i]) - a * (u0[i] - u0[i - 1])) * idx2;
        rhs[i] = u0[i] - k * 0.5 * (pe[i + 1] - pe[i - 1]) * idx + k * (1.0 - w) * diff0 + k * src_at(i, 1);
    }
    solve_tridiagonal(&lo, &di, &up, &mut rhs)?;
    let u1 = rhs;
    let um: Vec<f64> = (0..n).map(|i| (1.0 - w) * u0[i] + w * u1[i]).collect();

    // Face velocities for the v update. The averaged central pressure
    // gradient cannot see a node-to-node oscillation in p, so the faces carry
    // the difference between the compact and the averaged gradient; it is
    // O(k dx²) on smooth data and vanishes on constant states.
    let gp = crate::grid::d1(&pe, dx);
    let uf: Vec<f64> = (0..n - 1)
        .map(|j| 0.5 * (um[j] + um[j + 1]) - k * ((pe[j + 1] - pe[j]) * idx - 0.5 * (gp[j] + gp[j + 1])))
        .collect();
    let mut v1 = v0.to_vec();
    for i in 1..n - 1 {
        v1[i] = v0[i] + k * (uf[i] - uf[i - 1]) * idx + k * src_at(i, 0);
    }

    // energy, solved for θ at the new level
    let mut lo = vec![0.0; n];
    let mut di = vec![1.0; n];
    let mut up = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs[0] = th0[0];
    rhs[n - 1] = th0[n - 1];
    // viscous work flux μ u u_x / v at interfaces
    let work: Vec<f64> = (0..n - 1).map(|i| nu[i] * 0.5 * (um[i] + um[i + 1]) * (um[i + 1] - um[i]) * idx).collect();
    for i in 1..n - 1 {
        let (a, b) = (chi[i - 1], chi[i]);
        lo[i] = -k * w * a * idx2;
        up[i] = -k * w * b * idx2;
        di[i] = cv + k * w * (a + b) * idx2;
        let e0 = cv * th0[i] + 0.5 * u0[i] * u0[i];
        let diff0 = (b * (th0[i + 1] - th0[i]) - a * (th0[i] - th0[i - 1])) * idx2;
        let pu = 0.5 * (pe[i + 1] * ue[i + 1] - pe[i - 1] * ue[i - 1]) * idx;
        rhs[i] = e0 - 0.5 * u1[i] * u1[i] - k * pu
            + k * (1.0 - w) * diff0
            + k * (work[i] - work[i - 1]) * idx
            + k * src_at(i, 2);
    }
    solve_tridiagonal(&lo, &di, &up, &mut rhs)?;
    let th1 = rhs;

    // interface fluxes at 1/2 and n-3/2 (flux convention q_t + F_x = 0)
    let (l, r) = (0, n - 2);
    let flux = |j: usize| -> [f64; 3] {
        let fv = -uf[j];
        let visc = nu[j] * (w * (u1[j + 1] - u1[j]) + (1.0 - w) * (u0[j + 1] - u0[j])) * idx;
        let fu = 0.5 * (pe[j] + pe[j + 1]) - visc;
        let heat = chi[j] * (w * (th1[j + 1] - th1[j]) + (1.0 - w) * (th0[j + 1] - th0[j])) * idx;
        let fe = 0.5 * (pe[j] * ue[j] + pe[j + 1] * ue[j + 1]) - heat - work[j];
        [fv, fu, fe]
    };
    let (fl, fr) = (flux(l), flux(r));
    let mut inflow = [0.0; 3];
    for c in 0..3 {
        let sources: f64 = if src.is_empty() { 0.0 } else { (1..n - 1).map(|i| src[i][c]).sum::<f64>() * dx };
        inflow[c] = k * (fl[c] - fr[c] + sources);
    }
    Ok(Stage { v: v1, u: u1, theta: th1, inflow })
}

/// One predictor-corrector step. Returns the new state and the net inflow
/// of `(v, u, E)` through the two end interfaces during the step.
pub fn step(s: &SimState, cfg: &StepConfig, gas: &GasModel) -> Result<(SimState, Inflow)> {
    step_forced(s, cfg, gas, None)
}

pub fn step_forced(
    s: &SimState,
    cfg: &StepConfig,
    gas: &GasModel,
    forcing: Option<Forcing>,
) -> Result<(SimState, Inflow)> {
    cfg.validate()?;
    let grid = *s.grid();
    if grid.len() < 5 {
        return invalid("solver needs at least 5 nodes");
    }
    let dt = cfg.dt;
    let base = (s.v.values(), s.u.values(), s.theta.values());
    let half = stage(gas, &grid, base, base, s.v.values(), 0.5 * dt, 1.0, forcing.map(|f| (f, s.t)))?;
    if half.v.iter().chain(&half.theta).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::StepRejected { t: s.t, reason: "positivity lost in predictor".into() });
    }
    let mid = (&half.v[..], &half.u[..], &half.theta[..]);
    let full = stage(gas, &grid, base, mid, &half.v, dt, cfg.theta_scheme, forcing.map(|f| (f, s.t + 0.5 * dt)))?;
    let next = SimState {
        t: s.t + dt,
        v: Field::from_vec(grid, full.v),
        u: Field::from_vec(grid, full.u),
        theta: Field::from_vec(grid, full.theta),
    };
    next.check_positive()?;
    Ok((next, full.inflow))
}

/// Output times `(1+t₀)ρᵏ - 1` up to and including `t_end`.
pub fn geometric_schedule(t0: f64, t_end: f64, rho: f64) -> Result<Vec<f64>> {
    if !(rho > 1.0) {
        return invalid(format!("output ratio must exceed 1, got {rho}"));
    }
    if !(t_end >= t0) {
        return invalid("t_end precedes the initial time");
    }
    let mut out = vec![t0];
    let mut k = 1;
    loop {
        let t = (1.0 + t0) * rho.powi(k) - 1.0;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        out.push(t);
        k += 1;
    }
    if t_end > t0 {
        out.push(t_end);
    }
    Ok(out)
}

pub const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub state: SimState,
    pub steps: usize,
    pub rejections: usize,
    pub final_dt: f64,
    pub inflow: Inflow,
    pub records: usize,
}

/// Advances `init` to `t_end`, landing exactly on every time of `schedule`
/// and calling `observer(state, accumulated_inflow)` there (including the
/// initial time). Rejected steps are retried with half the time step.
pub fn simulate(
    init: SimState,
    cfg: &StepConfig,
    gas: &GasModel,
    schedule: &[f64],
    mut observer: impl FnMut(&SimState, &Inflow) -> Result<()>,
) -> Result<SimSummary> {
    cfg.validate()?;
    init.check_positive()?;
    let mut state = init;
    let mut dt = cfg.dt;
    let mut inflow = [0.0; 3];
    let (mut steps, mut rejections, mut records) = (0, 0, 0);
    for &t_out in schedule {
        if t_out < state.t - 1e-12 {
            continue;
        }
        while state.t < t_out - 1e-12 * (1.0 + t_out) {
            let h = dt.min(t_out - state.t);
            let mut attempt = 0;
            let mut hh = h;
            loop {
                let c = StepConfig { dt: hh, ..*cfg };
                match step(&state, &c, gas) {
                    Ok((next, flow)) => {
                        for k in 0..3 {
                            inflow[k] += flow[k];
                        }
                        state = next;
                        break;
                    }
                    Err(Error::StepRejected { .. }) if attempt < MAX_HALVINGS => {
                        attempt += 1;
                        rejections += 1;
                        hh *= 0.5;
                        dt = dt.min(hh);
                    }
                    Err(e) => return Err(e),
                }
            }
            steps += 1;
            if (state.t - t_out).abs() <= 1e-12 * (1.0 + t_out) {
                state.t = t_out;
            }
        }
        observer(&state, &inflow)?;
        records += 1;
    }
    Ok(SimSummary { state, steps, rejections, final_dt: dt, inflow, records })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    /// `|∫q(t) - ∫q(0) - inflow| / max(|∫q(0)|, tiny)` per component, worst over the run.
    pub relative: [f64; 3],
    pub absolute: [f64; 3],
}

/// Running conservation bookkeeping for a trajectory.
#[derive(Debug, Clone, Default)]
pub struct ConservationTracker {
    initial: Option<[f64; 3]>,
    pub rows: Vec<(f64, [f64; 3], Inflow)>,
}

impl ConservationTracker {
    pub fn record(&mut self, s: &SimState, gas: &GasModel, inflow: &Inflow) {
        let tot = s.conserved_totals(gas);
        if self.initial.is_none() {
            self.initial = Some(tot);
        }
        self.rows.push((s.t, tot, *inflow));
    }

    pub fn report(&self) -> Result<DriftReport> {
        conservation_audit(&self.rows)
    }
}

/// Drift of each conserved total against the accumulated boundary inflow.
pub fn conservation_audit(rows: &[(f64, [f64; 3], Inflow)]) -> Result<DriftReport> {
    if rows.len() < 2 {
        return invalid("conservation audit needs at least two records");
    }
    let (_, q0, f0) = rows[0];
    let mut abs = [0.0_f64; 3];
    for (_, q, f) in rows {
        for c in 0..3 {
            abs[c] = abs[c].max((q[c] - q0[c] - (f[c] - f0[c])).abs());
        }
    }
    let mut rel = [0.0; 3];
    for c in 0..3 {
        rel[c] = abs[c] / q0[c].abs().max(1e-300);
    }
    Ok(DriftReport { relative: rel, absolute: abs })
}

/// Initial perturbation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Unit-mass Gaussian `exp(-((x-x₀)/w)²) / (√π w)`.
    Bump,
    /// `w` times the derivative of the unit bump; exactly zero mass.
    BumpDerivative,
}

/// Perturbation of the conserved vector `(v, u, θ + (γ-1)u²/2R)` by
/// `(eps_v, eps_u, eps_theta) · shape(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub shape: Shape,
    pub eps_v: f64,
    pub eps_u: f64,
    pub eps_theta: f64,
    pub width: f64,
    pub center: f64,
}

impl PerturbationSpec {
    pub fn shape_at(&self, x: f64) -> f64 {
        let w = self.width;
        let z = (x - self.center) / w;
        let b = (-z * z).exp() / (std::f64::consts::PI.sqrt() * w);
        match self.shape {
            Shape::Bump => b,
            Shape::BumpDerivative => -2.0 * z * b,
        }
    }
}

/// Fields of a background wave at one time.
pub trait Background {
    fn base_fields(&self) -> (&Field, &Field, &Field);
}

impl Background for crate::waves::ContactWave {
    fn base_fields(&self) -> (&Field, &Field, &Field) {
        (&self.v_bar, &self.u_bar, &self.theta_bar)
    }
}

impl Background for crate::waves::WaveEnsemble {
    fn base_fields(&self) -> (&Field, &Field, &Field) {
        (&self.v_tilde, &self.u_tilde, &self.theta_tilde)
    }
}

pub fn initial_data(base: &dyn Background, spec: &PerturbationSpec, gas: &GasModel) -> Result<SimState> {
    if !(spec.width > 0.0) {
        return invalid("perturbation width must be positive");
    }
    let (vb, ub, tb) = base.base_fields();
    let grid = *vb.grid();
    let g = gas.gm1_r();
    let n = grid.len();
    let (mut v, mut u, mut th) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let s = spec.shape_at(grid.x(i));
        let (v0, u0, t0) = (vb.values()[i], ub.values()[i], tb.values()[i]);
        v[i] = v0 + spec.eps_v * s;
        u[i] = u0 + spec.eps_u * s;
        let m3 = t0 + 0.5 * g * u0 * u0 + spec.eps_theta * s;
        th[i] = m3 - 0.5 * g * u[i] * u[i];
    }
    let state =
        SimState { t: 0.0, v: Field::from_vec(grid, v), u: Field::from_vec(grid, u), theta: Field::from_vec(grid, th) };
    state.check_positive().map_err(|e| Error::InvalidArgument(format!("initial data: {e}")))?;
    Ok(state)
}
