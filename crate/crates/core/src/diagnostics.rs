//! Perturbation variables, the characteristic (diagonalized) frame, weighted
//! energies, heat-kernel weights and the zero-mass Poincaré audit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gas::{EndStates, GasModel};
use crate::grid::{cumtrapz, d1, d2, l2, max_abs, trapz, Field, Grid1D};
use crate::linalg::{matmul, matvec, max_abs_diff, Mat3, Vec3, IDENTITY};
use crate::solver::SimState;
use crate::waves::{contact_residuals, ContactWave, WaveEnsemble};

/// Largest admissible right-end value of an anti-derivative.
pub const TOL_MASS: f64 = 1e-6;

/// Fixed `Ĉ` in the combined energies `Eᵢ`.
pub const C_HAT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "nonzero")]
    NonzeroMass,
    #[serde(rename = "zero")]
    ZeroMass,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::NonzeroMass => "nonzero",
            Mode::ZeroMass => "zero",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonzero" | "nonzero-mass" => Ok(Mode::NonzeroMass),
            "zero" | "zero-mass" => Ok(Mode::ZeroMass),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected zero or nonzero)"))),
        }
    }
}

/// Background the perturbation is measured against: the ansatz for
/// nonzero-mass data, the bare contact wave for zero-mass data.
#[derive(Debug, Clone, Copy)]
pub enum Base<'a> {
    Ansatz(&'a WaveEnsemble),
    Contact(&'a ContactWave),
}

impl<'a> Base<'a> {
    pub fn mode(&self) -> Mode {
        match self {
            Base::Ansatz(_) => Mode::NonzeroMass,
            Base::Contact(_) => Mode::ZeroMass,
        }
    }

    pub fn contact(&self) -> &'a ContactWave {
        match self {
            Base::Ansatz(w) => &w.contact,
            Base::Contact(c) => c,
        }
    }

    pub fn t(&self) -> f64 {
        self.contact().t
    }

    pub fn grid(&self) -> &'a Grid1D {
        self.contact().grid()
    }

    pub fn v(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.v_tilde,
            Base::Contact(c) => &c.v_bar,
        }
    }

    pub fn u(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.u_tilde,
            Base::Contact(c) => &c.u_bar,
        }
    }

    pub fn theta(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.theta_tilde,
            Base::Contact(c) => &c.theta_bar,
        }
    }

    pub fn p(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.p_tilde,
            Base::Contact(c) => &c.p_bar,
        }
    }

    pub fn u_x(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.u_tilde_x,
            Base::Contact(c) => &c.u_bar_x,
        }
    }

    pub fn theta_x(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.theta_tilde_x,
            Base::Contact(c) => &c.theta_bar_x,
        }
    }

    pub fn u_t(&self) -> &'a Field {
        match self {
            Base::Ansatz(w) => &w.u_tilde_t,
            Base::Contact(c) => &c.u_bar_t,
        }
    }

    /// Total energy of the background.
    pub fn energy(&self) -> Field {
        match self {
            Base::Ansatz(w) => w.total_energy(),
            Base::Contact(c) => c.e_bar.clone(),
        }
    }

    /// Residual fluxes of the background system, `(R̃₁, R̃₂, R̃₃)` for the
    /// ansatz and `(0, R₁, R₂)` for the contact wave.
    pub fn residual_fluxes(&self, gas: &GasModel) -> [Field; 3] {
        match self {
            Base::Ansatz(w) => {
                let r = &w.residuals;
                [r.rt1.clone(), r.rt2.clone(), r.rt3.clone()]
            }
            Base::Contact(c) => {
                let (r1, r2) = contact_residuals(c, gas);
                [Field::zeros(*c.grid()), r1, r2]
            }
        }
    }
}

/// Perturbations, their anti-derivatives and the auxiliary `W`, `Y`.
#[derive(Debug, Clone)]
pub struct PerturbationSet {
    pub mode: Mode,
    pub t: f64,
    pub phi: Field,
    pub psi: Field,
    pub zeta: Field,
    pub big_phi: Field,
    pub big_psi: Field,
    pub w_bar: Field,
    pub w: Field,
    pub y: Field,
}

impl PerturbationSet {
    pub fn grid(&self) -> &Grid1D {
        self.phi.grid()
    }

    /// Right-end values of `(Φ, Ψ, W̄)`.
    pub fn right_end(&self) -> [f64; 3] {
        let n = self.phi.len() - 1;
        [self.big_phi.values()[n], self.big_psi.values()[n], self.w_bar.values()[n]]
    }

    /// Max interior difference between `ζ` and `W_x - Y`.
    pub fn zeta_identity_residual(&self) -> f64 {
        let wx = d1(self.w.values(), self.grid().dx());
        let n = self.phi.len();
        (1..n - 1).map(|i| (self.zeta.values()[i] - (wx[i] - self.y.values()[i])).abs()).fold(0.0, f64::max)
    }
}

/// Builds the perturbation set without the mass-leak check.
pub fn perturbation_fields_unchecked(s: &SimState, base: Base, gas: &GasModel) -> Result<PerturbationSet> {
    let grid = *s.grid();
    if &grid != base.grid() {
        return invalid("state and background live on different grids");
    }
    let dx = grid.dx();
    let g = gas.gm1_r();
    let phi = &s.v - base.v();
    let psi = &s.u - base.u();
    let zeta = &s.theta - base.theta();
    let de = &s.total_energy(gas) - &base.energy();
    let big_phi = cumtrapz(phi.values(), dx);
    let big_psi = cumtrapz(psi.values(), dx);
    let w_bar = cumtrapz(de.values(), dx);
    let (ub, ubx) = (base.u().values(), base.u_x().values());
    let n = grid.len();
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        w.push(g * (w_bar[i] - ub[i] * big_psi[i]));
        let p = psi.values()[i];
        y.push(g * (0.5 * p * p - ubx[i] * big_psi[i]));
    }
    let f = |v| Field::from_vec(grid, v);
    Ok(PerturbationSet {
        mode: base.mode(),
        t: s.t,
        phi,
        psi,
        zeta,
        big_phi: f(big_phi),
        big_psi: f(big_psi),
        w_bar: f(w_bar),
        w: f(w),
        y: f(y),
    })
}

/// Perturbation set with the anti-derivatives checked to vanish at the right
/// end (otherwise the run leaks mass or the mode is wrong).
pub fn perturbation_fields(s: &SimState, base: Base, gas: &GasModel) -> Result<PerturbationSet> {
    let p = perturbation_fields_unchecked(s, base, gas)?;
    for (name, v) in ["Phi", "Psi", "Wbar"].into_iter().zip(p.right_end()) {
        if !(v.abs() <= TOL_MASS) {
            return Err(Error::MassLeak { component: name, value: v });
        }
    }
    Ok(p)
}

/// Coefficient matrices at one node.
pub fn flux_matrix(v_bar: f64, p_plus: f64, gas: &GasModel) -> Mat3 {
    [[0.0, -1.0, 0.0], [-p_plus / v_bar, 0.0, gas.r / v_bar], [0.0, gas.gm1_r() * p_plus, 0.0]]
}

pub fn viscosity_diag(v_bar: f64, gas: &GasModel) -> Mat3 {
    [[0.0, 0.0, 0.0], [0.0, gas.mu / v_bar, 0.0], [0.0, 0.0, gas.kappa * (gas.gamma - 1.0) / (gas.r * v_bar)]]
}

pub fn lambda3(v_bar: f64, p_plus: f64, gas: &GasModel) -> f64 {
    (gas.gamma * p_plus / v_bar).sqrt()
}

/// Left (rows) and right (columns) eigenvector matrices.
pub fn eigenvectors(v_bar: f64, p_plus: f64, gas: &GasModel) -> (Mat3, Mat3) {
    let gm = gas.gamma;
    let l3 = lambda3(v_bar, p_plus, gas);
    let a = (0.5 / gm).sqrt();
    let b = ((gm - 1.0) / gm).sqrt();
    let r = gas.r;
    let left = [
        [-a, -a * gm / l3, a * r / p_plus],
        [b, 0.0, b * r / ((gm - 1.0) * p_plus)],
        [-a, a * gm / l3, a * r / p_plus],
    ];
    let c = (gm - 1.0) * p_plus / r;
    let right = [[-a, b, -a], [-a * l3, 0.0, a * l3], [a * c, b * p_plus / r, a * c]];
    (left, right)
}

/// Closed-form `A₄ = L A₂ R`.
pub fn viscosity_matrix(v_bar: f64, gas: &GasModel) -> Mat3 {
    let (gm, k, r, mu) = (gas.gamma, gas.kappa, gas.r, gas.mu);
    let heat = (gm - 1.0).powi(2) * k / (2.0 * gm * r);
    let b11 = (0.5 * mu + heat) / v_bar;
    let b12 = ((gm - 1.0) / 2.0).sqrt() * (gm - 1.0) * k / (gm * r) / v_bar;
    let b13 = (-0.5 * mu + heat) / v_bar;
    let b22 = (gm - 1.0) * k / (gm * r) / v_bar;
    [[b11, b12, b13], [b12, b22, b12], [b13, b12, b11]]
}

/// Sum-of-squares form of `zᵗ A₄ z`.
pub fn dissipation_form(z: &Vec3, v_bar: f64, gas: &GasModel) -> f64 {
    let gm = gas.gamma;
    let heat = gas.kappa * (gm - 1.0) / (gas.r * v_bar)
        * (((gm - 1.0) / (2.0 * gm)).sqrt() * (z[0] + z[2]) + z[1] / gm.sqrt()).powi(2);
    let visc = gas.mu / v_bar * ((z[2] - z[0]) / std::f64::consts::SQRT_2).powi(2);
    heat + visc
}

/// Max deviations of the frame identities at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameDefects {
    /// `|L R - I|`.
    pub lr: f64,
    /// `|L A₁ R - Λ|`.
    pub lambda: f64,
    /// `|L A₂ R - A₄|` against the closed form.
    pub a4: f64,
}

impl FrameDefects {
    pub fn max(self, o: FrameDefects) -> FrameDefects {
        FrameDefects { lr: self.lr.max(o.lr), lambda: self.lambda.max(o.lambda), a4: self.a4.max(o.a4) }
    }
}

pub fn frame_defects(v_bar: f64, p_plus: f64, gas: &GasModel) -> FrameDefects {
    let (l, r) = eigenvectors(v_bar, p_plus, gas);
    let l3 = lambda3(v_bar, p_plus, gas);
    let lam = [[-l3, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, l3]];
    FrameDefects {
        lr: max_abs_diff(&matmul(&l, &r), &IDENTITY),
        lambda: max_abs_diff(&matmul(&matmul(&l, &flux_matrix(v_bar, p_plus, gas)), &r), &lam),
        a4: max_abs_diff(&matmul(&matmul(&l, &viscosity_diag(v_bar, gas)), &r), &viscosity_matrix(v_bar, gas)),
    }
}

/// Characteristic variables `B = L (Φ, Ψ, W)ᵗ` with node-wise matrices.
#[derive(Debug, Clone)]
pub struct DiagonalFrame {
    pub t: f64,
    pub v_coef: Field,
    pub v_coef_x: Field,
    pub lambda3: Field,
    pub l_mat: Vec<Mat3>,
    pub r_mat: Vec<Mat3>,
    pub a4: Vec<Mat3>,
    /// `b[k][j]` is `∂ₓᵏ bⱼ₊₁` for `k = 0..=3`.
    pub b: [[Vec<f64>; 3]; 4],
}

impl DiagonalFrame {
    pub fn grid(&self) -> &Grid1D {
        self.v_coef.grid()
    }

    pub fn defects(&self, p_plus: f64, gas: &GasModel) -> FrameDefects {
        self.v_coef
            .values()
            .iter()
            .map(|&v| frame_defects(v, p_plus, gas))
            .fold(FrameDefects::default(), FrameDefects::max)
    }

    /// `R B` recovered node by node.
    pub fn reconstruct(&self) -> [Vec<f64>; 3] {
        let n = self.l_mat.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let b = [self.b[0][0][i], self.b[0][1][i], self.b[0][2][i]];
            let w = matvec(&self.r_mat[i], &b);
            for c in 0..3 {
                out[c][i] = w[c];
            }
        }
        out
    }
}

/// Frame with coefficients frozen at a given specific-volume field.
pub fn diagonal_frame_from(
    pert: &PerturbationSet,
    v_coef: &Field,
    v_coef_x: &Field,
    p_plus: f64,
    gas: &GasModel,
) -> Result<DiagonalFrame> {
    if v_coef.grid() != pert.grid() {
        return invalid("frame coefficients and perturbations live on different grids");
    }
    if let Some(i) = v_coef.values().iter().position(|&v| !(v > 0.0)) {
        return invalid(format!("frame needs v > 0 (node {i})"));
    }
    let n = v_coef.len();
    let dx = v_coef.grid().dx();
    let mut l_mat = Vec::with_capacity(n);
    let mut r_mat = Vec::with_capacity(n);
    let mut a4 = Vec::with_capacity(n);
    let mut lam = Vec::with_capacity(n);
    let mut b0: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (ph, ps, w) = (pert.big_phi.values(), pert.big_psi.values(), pert.w.values());
    for i in 0..n {
        let v = v_coef.values()[i];
        let (l, r) = eigenvectors(v, p_plus, gas);
        let b = matvec(&l, &[ph[i], ps[i], w[i]]);
        for c in 0..3 {
            b0[c][i] = b[c];
        }
        l_mat.push(l);
        r_mat.push(r);
        a4.push(viscosity_matrix(v, gas));
        lam.push(lambda3(v, p_plus, gas));
    }
    let b1 = b0.clone().map(|c| d1(&c, dx));
    let b2 = b0.clone().map(|c| d2(&c, dx));
    let b3 = b2.clone().map(|c| d1(&c, dx));
    Ok(DiagonalFrame {
        t: pert.t,
        v_coef: v_coef.clone(),
        v_coef_x: v_coef_x.clone(),
        lambda3: Field::from_vec(*v_coef.grid(), lam),
        l_mat,
        r_mat,
        a4,
        b: [b0, b1, b2, b3],
    })
}

/// Frame built from the contact wave's specific volume.
pub fn diagonal_frame(pert: &PerturbationSet, cw: &ContactWave, gas: &GasModel) -> Result<DiagonalFrame> {
    diagonal_frame_from(pert, &cw.v_bar, &cw.v_bar_x, cw.p_plus, gas)
}

/// Exponent data of the weight `v₁^{±sn}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExponent {
    pub n: u32,
    /// `sign(θ₊ - θ₋)`, or 0 when the weight is switched off.
    pub s: f64,
    /// True when `δ = 0` forced the unweighted fallback.
    pub fallback: bool,
}

pub fn weight_exponent(ends: &EndStates) -> WeightExponent {
    let d = ends.delta();
    if d.abs() == 0.0 {
        log::warn!("δ = 0: weighted energies fall back to n = 0");
        return WeightExponent { n: 0, s: 0.0, fallback: true };
    }
    let n = (d.abs().powf(-0.5)).floor() as u32 + 1;
    WeightExponent { n, s: (ends.theta_plus - ends.theta_minus).signum(), fallback: false }
}

/// Integrals for `k = 0, 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedEnergies {
    pub e_tilde: [f64; 3],
    pub k_tilde: [f64; 3],
    pub g: [f64; 3],
    pub k: [f64; 3],
    /// `∫ (μ/2ṽ)|∂ⁱφ|²`.
    pub phi_sq: [f64; 3],
    /// `∫ ∂ⁱφ ∂ⁱΨ`.
    pub cross: [f64; 3],
    /// `∫ |∂ⁱB|² + |∂ⁱφ|²`.
    pub dominated: [f64; 3],
    /// Smallest node value of `a₁` and `a₃` over the grid.
    pub a_min: f64,
    pub v1_min: f64,
    pub v1_max: f64,
    pub weight: Option<WeightExponent>,
}

impl WeightedEnergies {
    /// `Eᵢ = C̄ Ẽᵢ + Ĉ (∫(μ/2ṽ)|∂ⁱφ|² - ∂ⁱφ ∂ⁱΨ)`.
    pub fn combined(&self, c_bar: f64, c_hat: f64) -> [f64; 3] {
        let mut e = [0.0; 3];
        for i in 0..3 {
            e[i] = c_bar * self.e_tilde[i] + c_hat * (self.phi_sq[i] - self.cross[i]);
        }
        e
    }
}

/// Energies of the characteristic variables. `v_pert` is the specific volume
/// the `φ` weight uses (`ṽ`, or `v̄` in zero-mass mode).
pub fn weighted_energies(
    frame: &DiagonalFrame,
    pert: &PerturbationSet,
    cw: &ContactWave,
    v_pert: &Field,
    ends: &EndStates,
    gas: &GasModel,
) -> Result<WeightedEnergies> {
    if frame.grid() != cw.grid() || frame.grid() != pert.grid() || frame.grid() != v_pert.grid() {
        return invalid("weighted energies need all fields on one grid");
    }
    let we = weight_exponent(ends);
    let sn = we.s * we.n as f64;
    let n = frame.l_mat.len();
    let dx = frame.grid().dx();
    let tp = ends.theta_plus;
    let th = cw.theta_hat.values();
    let thx = cw.theta_hat_x.values();
    let vbx = frame.v_coef_x.values();
    let vb = frame.v_coef.values();
    let lam3 = frame.lambda3.values();

    let mut w1 = vec![0.0; n];
    let mut w3 = vec![0.0; n];
    let mut a1 = vec![0.0; n];
    let mut a3 = vec![0.0; n];
    let (mut v1_min, mut v1_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let v1 = th[i] / tp;
        let v1x = thx[i] / tp;
        v1_min = v1_min.min(v1);
        v1_max = v1_max.max(v1);
        let l3 = lam3[i];
        let l3x = -l3 * vbx[i] / (2.0 * vb[i]);
        let (l1, l1x) = (-l3, -l3x);
        w1[i] = v1.powf(sn);
        w3[i] = v1.powf(-sn);
        a1[i] = -0.5 * v1.powf(sn - 1.0) * (sn * l1 * v1x + v1 * l1x);
        a3[i] = 0.5 * v1.powf(-sn - 1.0) * (sn * l3 * v1x - v1 * l3x);
    }
    let a_min = a1.iter().chain(&a3).cloned().fold(f64::INFINITY, f64::min);

    let phi0 = pert.phi.values();
    let phis = [phi0.to_vec(), d1(phi0, dx), d2(phi0, dx)];
    let psis = [pert.big_psi.values().to_vec(), pert.psi.values().to_vec(), d1(pert.psi.values(), dx)];
    let mu_v: Vec<f64> = v_pert.values().iter().map(|&v| gas.mu / (2.0 * v)).collect();

    let mut out = WeightedEnergies { a_min, v1_min, v1_max, weight: Some(we), ..Default::default() };
    let mut buf = vec![0.0; n];
    let mut integ = |f: &dyn Fn(usize) -> f64| {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = f(i);
        }
        trapz(&buf, dx)
    };
    for k in 0..3 {
        let bk = &frame.b[k];
        let bk1 = &frame.b[k + 1];
        out.e_tilde[k] = integ(&|i| 0.5 * (w1[i] * bk[0][i].powi(2) + bk[1][i].powi(2) + w3[i] * bk[2][i].powi(2)));
        out.k_tilde[k] = integ(&|i| {
            let z = [bk1[0][i], bk1[1][i], bk1[2][i]];
            let az = matvec(&frame.a4[i], &z);
            z[0] * az[0] + z[1] * az[1] + z[2] * az[2]
        });
        out.g[k] = integ(&|i| a1[i] * bk[0][i].powi(2) + a3[i] * bk[2][i].powi(2));
        out.k[k] = integ(&|i| bk1[0][i].powi(2) + bk1[1][i].powi(2) + bk1[2][i].powi(2));
        let (ph, ps) = (&phis[k], &psis[k]);
        out.phi_sq[k] = integ(&|i| mu_v[i] * ph[i] * ph[i]);
        out.cross[k] = integ(&|i| ph[i] * ps[i]);
        out.dominated[k] = integ(&|i| bk[0][i].powi(2) + bk[1][i].powi(2) + bk[2][i].powi(2) + ph[i] * ph[i]);
    }
    Ok(out)
}

/// `ω = (1+t)^{-1/2} exp(-αx²/(1+t))`, `g = ∫ω`, `f = ∫ω²` from the left.
#[derive(Debug, Clone)]
pub struct HeatKernelWeights {
    pub alpha: f64,
    pub t: f64,
    pub omega: Field,
    pub omega_x: Field,
    pub g: Field,
    pub f: Field,
}

impl HeatKernelWeights {
    /// `|‖g‖∞ - √(π/α)|`.
    pub fn g_sup_defect(&self) -> f64 {
        (self.g.max_abs() - (std::f64::consts::PI / self.alpha).sqrt()).abs()
    }

    /// `‖f‖∞ √(1+t)`, to compare with `2 α^{-1/2}`.
    pub fn f_sup_scaled(&self) -> f64 {
        self.f.max_abs() * (1.0 + self.t).sqrt()
    }
}

pub fn heat_weights(alpha: f64, grid: &Grid1D, t: f64) -> Result<HeatKernelWeights> {
    if !(alpha > 0.0) {
        return invalid(format!("heat-kernel rate must be positive (got {alpha})"));
    }
    if !(t >= 0.0) {
        return invalid(format!("heat-kernel weight needs t ≥ 0 (got {t})"));
    }
    let s = 1.0 + t;
    let omega = Field::from_fn(*grid, |x| (-alpha * x * x / s).exp() / s.sqrt());
    let omega_x = Field::from_fn(*grid, |x| -2.0 * alpha * x / s * (-alpha * x * x / s).exp() / s.sqrt());
    let dx = grid.dx();
    let g = Field::from_vec(*grid, cumtrapz(omega.values(), dx));
    let sq: Vec<f64> = omega.values().iter().map(|w| w * w).collect();
    let f = Field::from_vec(*grid, cumtrapz(&sq, dx));
    Ok(HeatKernelWeights { alpha, t, omega, omega_x, g, f })
}

/// Max of `|4α g_t - ω_x|` with `g_t` by a centred difference of step `h`.
pub fn heat_time_identity_residual(alpha: f64, grid: &Grid1D, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && t - h >= 0.0) {
        return invalid("time stencil must stay in t ≥ 0");
    }
    let lo = heat_weights(alpha, grid, t - h)?;
    let hi = heat_weights(alpha, grid, t + h)?;
    let mid = heat_weights(alpha, grid, t)?;
    let mut m = 0.0_f64;
    for i in 0..grid.len() {
        let gt = (hi.g.values()[i] - lo.g.values()[i]) / (2.0 * h);
        m = m.max((4.0 * alpha * gt - mid.omega_x.values()[i]).abs());
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoincareRow {
    pub t: f64,
    /// `∫₀ᵗ∫(Φ²+Ψ²+W²)ω²`.
    pub lhs: f64,
    /// `‖(Φ,Ψ,W)(0)‖² + ∫₀ᵗ‖(Φ,Ψ,W)_x‖² + ∫₀ᵗ‖(Ψ,W)_xx‖²`.
    pub rhs: f64,
    pub ratio: f64,
    /// Instantaneous `∫(Φ²+Ψ²+W²)ω²`.
    pub weighted_l2: f64,
    /// Heat-kernel lemma for `h = RW + (γ-1)p₊Φ`: left and right sides.
    pub heat_lhs: f64,
    pub heat_rhs: f64,
}

/// Running time integrals of the Poincaré-type and heat-kernel inequalities
/// over the recorded (zero-mass) trajectory, by the trapezoid rule in time.
#[derive(Debug, Clone)]
pub struct PoincareAudit {
    pub alpha: f64,
    gm1: f64,
    r: f64,
    p_plus: f64,
    prev: Option<Sample>,
    h0_sq: f64,
    hg0: f64,
    init_norm: f64,
    acc: [f64; 6],
    pub rows: Vec<PoincareRow>,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    weighted: f64,
    dx_sq: f64,
    dxx_sq: f64,
    h_w: f64,
    hx_sq: f64,
    h_ggt: f64,
    hg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareSummary {
    pub sup_ratio: f64,
    /// `(max - min)/max` of the ratio over the window.
    pub variation: f64,
    pub heat_ratio_max: f64,
}

impl PoincareAudit {
    pub fn new(alpha: f64, gas: &GasModel, p_plus: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return invalid("Poincaré audit needs α > 0");
        }
        Ok(Self {
            alpha,
            gm1: gas.gamma - 1.0,
            r: gas.r,
            p_plus,
            prev: None,
            h0_sq: 0.0,
            hg0: 0.0,
            init_norm: 0.0,
            acc: [0.0; 6],
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, pert: &PerturbationSet) -> Result<PoincareRow> {
        if pert.mode != Mode::ZeroMass {
            return invalid("the Poincaré audit applies to zero-mass perturbations only");
        }
        if let Some(p) = self.prev {
            if !(pert.t > p.t) {
                return invalid("Poincaré audit times must increase");
            }
        }
        let grid = *pert.grid();
        let dx = grid.dx();
        let hw = heat_weights(self.alpha, &grid, pert.t)?;
        let n = grid.len();
        let (ph, ps, w) = (pert.big_phi.values(), pert.big_psi.values(), pert.w.values());
        let om = hw.omega.values();
        let omx = hw.omega_x.values();
        let gg = hw.g.values();
        let wx = d1(w, dx);
        let wxx = d2(w, dx);
        let psx = d1(pert.psi.values(), dx);
        let h: Vec<f64> = (0..n).map(|i| self.r * w[i] + self.gm1 * self.p_plus * ph[i]).collect();
        let hx = d1(&h, dx);
        let mut buf = vec![0.0; n];
        let mut integ = |f: &dyn Fn(usize) -> f64| {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = f(i);
            }
            trapz(&buf, dx)
        };
        let s = Sample {
            t: pert.t,
            weighted: integ(&|i| (ph[i].powi(2) + ps[i].powi(2) + w[i].powi(2)) * om[i] * om[i]),
            dx_sq: integ(&|i| pert.phi.values()[i].powi(2) + pert.psi.values()[i].powi(2) + wx[i].powi(2)),
            dxx_sq: integ(&|i| psx[i].powi(2) + wxx[i].powi(2)),
            h_w: integ(&|i| h[i] * h[i] * om[i] * om[i]),
            hx_sq: integ(&|i| hx[i] * hx[i]),
            h_ggt: integ(&|i| h[i] * h[i] * gg[i] * omx[i]),
            hg: integ(&|i| h[i] * h[i] * gg[i] * gg[i]),
        };
        match self.prev {
            None => {
                self.init_norm = integ(&|i| ph[i].powi(2) + ps[i].powi(2) + w[i].powi(2));
                self.h0_sq = integ(&|i| h[i] * h[i]);
                self.hg0 = s.hg;
            }
            Some(p) => {
                let dt = s.t - p.t;
                let tr = |a: f64, b: f64| 0.5 * dt * (a + b);
                self.acc[0] += tr(p.weighted, s.weighted);
                self.acc[1] += tr(p.dx_sq, s.dx_sq);
                self.acc[2] += tr(p.dxx_sq, s.dxx_sq);
                self.acc[3] += tr(p.h_w, s.h_w);
                self.acc[4] += tr(p.hx_sq, s.hx_sq);
                self.acc[5] += tr(p.h_ggt, s.h_ggt);
            }
        }
        self.prev = Some(s);
        let rhs = self.init_norm + self.acc[1] + self.acc[2];
        let lhs = self.acc[0];
        let pi = std::f64::consts::PI;
        // 8α∫⟨h_t, h g²⟩ = 4α[∫h²g²]₀ᵗ - 2∫∫h² g ω_x, since 4α g_t = ω_x.
        let pairing = 4.0 * self.alpha * (s.hg - self.hg0) - 2.0 * self.acc[5];
        let heat_rhs = 4.0 * pi * self.h0_sq + 4.0 * pi / self.alpha * self.acc[4] + pairing;
        let row = PoincareRow {
            t: s.t,
            lhs,
            rhs,
            ratio: lhs / (1.0 + rhs),
            weighted_l2: s.weighted,
            heat_lhs: self.acc[3],
            heat_rhs,
        };
        self.rows.push(row);
        Ok(row)
    }

    /// Ratio statistics over `t ∈ [t_lo, t_hi]`.
    pub fn summary(&self, t_lo: f64, t_hi: f64) -> Option<PoincareSummary> {
        let win: Vec<&PoincareRow> = self.rows.iter().filter(|r| r.t >= t_lo && r.t <= t_hi).collect();
        if win.is_empty() {
            return None;
        }
        let hi = win.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let lo = win.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let sup_ratio = self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let heat_ratio_max =
            self.rows.iter().filter(|r| r.heat_rhs > 0.0).map(|r| r.heat_lhs / r.heat_rhs).fold(0.0, f64::max);
        Some(PoincareSummary { sup_ratio, variation: if hi > 0.0 { (hi - lo) / hi } else { 0.0 }, heat_ratio_max })
    }
}

/// Max interior defects of the linearized integrated system, with `Q₁`,
/// `Q₂` (and `J₁`, `J₂` inside them) evaluated from the nonlinear fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemDefect {
    pub defect: [f64; 3],
    /// Largest single term of each equation, for relative comparisons.
    pub scale: [f64; 3],
}

impl SystemDefect {
    pub fn relative(&self) -> [f64; 3] {
        let mut r = [0.0; 3];
        for k in 0..3 {
            r[k] = if self.scale[k] > 0.0 { self.defect[k] / self.scale[k] } else { self.defect[k] };
        }
        r
    }
}

/// Substitutes three consecutive states into the integrated perturbation
/// system. Time derivatives use the three-point formula on the given times.
pub fn integrated_system_defect(states: [&SimState; 3], bases: [Base; 3], gas: &GasModel) -> Result<SystemDefect> {
    let mode = bases[1].mode();
    if bases.iter().any(|b| b.mode() != mode) {
        return invalid("mixed background types in the time stencil");
    }
    let [t0, t1, t2] = [states[0].t, states[1].t, states[2].t];
    if !(t0 < t1 && t1 < t2) {
        return invalid("time stencil must be strictly increasing");
    }
    let sets = [
        perturbation_fields_unchecked(states[0], bases[0], gas)?,
        perturbation_fields_unchecked(states[1], bases[1], gas)?,
        perturbation_fields_unchecked(states[2], bases[2], gas)?,
    ];
    let (ha, hb) = (t1 - t0, t2 - t1);
    let (c0, c1, c2) = (-hb / (ha * (ha + hb)), (hb - ha) / (ha * hb), ha / (hb * (ha + hb)));
    let ddt = |f: &dyn Fn(&PerturbationSet) -> &Field, i: usize| {
        c0 * f(&sets[0]).values()[i] + c1 * f(&sets[1]).values()[i] + c2 * f(&sets[2]).values()[i]
    };

    let s = states[1];
    let b = bases[1];
    let p = &sets[1];
    let dx = s.grid().dx();
    let pp = b.contact().p_plus;
    let [rt1, rt2, rt3] = b.residual_fluxes(gas);
    let ux = d1(s.u.values(), dx);
    let thx = d1(s.theta.values(), dx);
    let psix = d1(p.psi.values(), dx);
    let wx = d1(p.w.values(), dx);
    let wxx = d2(p.w.values(), dx);
    let yx = d1(p.y.values(), dx);
    let (mu, kappa, r) = (gas.mu, gas.kappa, gas.r);
    let n = s.grid().len();
    let mut out = SystemDefect { defect: [0.0; 3], scale: [0.0; 3] };
    for i in 2..n - 2 {
        let v = s.v.values()[i];
        let pr = gas.pressure(v, s.theta.values()[i]);
        let vt = b.v().values()[i];
        let pt = b.p().values()[i];
        let ut = b.u().values()[i];
        let utt = b.u_t().values()[i];
        let (phi, psi, zeta) = (p.phi.values()[i], p.psi.values()[i], p.zeta.values()[i]);
        let (big_psi, y) = (p.big_psi.values()[i], p.y.values()[i]);

        let phi_t = ddt(&|q| &q.big_phi, i);
        let psi_t = ddt(&|q| &q.big_psi, i);
        let w_t = ddt(&|q| &q.w, i);

        let j1 = (pt - pp) / vt * phi - (pr - pt + pt / vt * phi - r / vt * zeta);
        let q1 = (mu / v - mu / vt) * ux[i] + j1 + r / vt * y - rt2.values()[i];
        let j2 = (pp - pr) * psi;
        let q2 = (kappa / v - kappa / vt) * thx[i] + mu * ux[i] / v * psi - rt3.values()[i] - utt * big_psi
            + ut * rt2.values()[i]
            + j2
            - kappa / vt * yx[i];

        let e1 = [phi_t, -psi, rt1.values()[i]];
        let e2 = [psi_t, -pp / vt * phi, r / vt * wx[i], -mu / vt * psix[i], -q1];
        let e3 = [r / (gas.gamma - 1.0) * w_t, pp * psi, -kappa / vt * wxx[i], -q2];
        for (k, terms) in [&e1[..], &e2[..], &e3[..]].into_iter().enumerate() {
            let sum: f64 = terms.iter().sum();
            out.defect[k] = out.defect[k].max(sum.abs());
            out.scale[k] = out.scale[k].max(terms.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
        }
    }
    Ok(out)
}

/// One recorded time of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedgerRow {
    pub t: f64,
    /// `‖(φ,ψ,ζ)‖_{L²}`.
    pub l2: f64,
    /// `‖(φ,ψ,ζ)_x‖_{L²}`.
    pub h1: f64,
    /// `‖(v - v̄, u - ū, θ - θ̄)‖_{L∞}` against the contact wave.
    pub linf: f64,
    /// `‖(φ,ψ,ζ)‖_{L∞}` against the mode's background.
    pub linf_pert: f64,
    pub energies: WeightedEnergies,
    /// Smallest `μ/ṽ` on the grid.
    pub mu_over_v_min: f64,
    /// Right-end values of `(Φ, Ψ, W̄)`.
    pub mass_end: [f64; 3],
    pub zeta_residual: f64,
    pub poincare: Option<PoincareRow>,
}

/// Builds the ledger row of one state and returns the perturbation set too.
pub fn ledger_row(
    s: &SimState,
    base: Base,
    ends: &EndStates,
    gas: &GasModel,
    audit: Option<&mut PoincareAudit>,
) -> Result<(EnergyLedgerRow, PerturbationSet)> {
    let pert = perturbation_fields(s, base, gas)?;
    let cw = base.contact();
    let dx = s.grid().dx();
    let sq = |a: f64, b: f64, c: f64| (a * a + b * b + c * c).sqrt();
    let l2n = sq(l2(pert.phi.values(), dx), l2(pert.psi.values(), dx), l2(pert.zeta.values(), dx));
    let h1 =
        sq(l2(&d1(pert.phi.values(), dx), dx), l2(&d1(pert.psi.values(), dx), dx), l2(&d1(pert.zeta.values(), dx), dx));
    let linf = (&s.v - &cw.v_bar).max_abs().max((&s.u - &cw.u_bar).max_abs()).max((&s.theta - &cw.theta_bar).max_abs());
    let linf_pert = max_abs(pert.phi.values()).max(pert.psi.max_abs()).max(pert.zeta.max_abs());
    let frame = diagonal_frame(&pert, cw, gas)?;
    let energies = weighted_energies(&frame, &pert, cw, base.v(), ends, gas)?;
    let mu_over_v_min = base.v().values().iter().map(|&v| gas.mu / v).fold(f64::INFINITY, f64::min);
    let poincare = match audit {
        Some(a) => Some(a.push(&pert)?),
        None => None,
    };
    let row = EnergyLedgerRow {
        t: s.t,
        l2: l2n,
        h1,
        linf,
        linf_pert,
        energies,
        mu_over_v_min,
        mass_end: pert.right_end(),
        zeta_residual: pert.zeta_identity_residual(),
        poincare,
    };
    Ok((row, pert))
}

/// All recorded rows of a run plus the energy constants fixed after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub mode: Mode,
    pub weight: WeightExponent,
    pub rows: Vec<EnergyLedgerRow>,
    pub c_hat: f64,
    pub c_bar: f64,
}

impl EnergyLedger {
    pub fn new(mode: Mode, weight: WeightExponent) -> Self {
        Self { mode, weight, rows: Vec::new(), c_hat: C_HAT, c_bar: f64::NAN }
    }

    pub fn push(&mut self, row: EnergyLedgerRow) {
        self.rows.push(row);
    }

    /// Lower bound `8Ĉ(1 + 1/min μ/ṽ)` for `C̄`.
    pub fn c_bar_floor(&self) -> f64 {
        let m = self.rows.iter().map(|r| r.mu_over_v_min).fold(f64::INFINITY, f64::min);
        8.0 * self.c_hat * (1.0 + 1.0 / m)
    }

    /// Smallest `C̄` above the floor keeping every `Eᵢ` positive on the
    /// recorded data. Stores and returns it.
    pub fn finalize(&mut self) -> f64 {
        let mut c = if self.rows.is_empty() { 8.0 * self.c_hat } else { self.c_bar_floor() };
        for r in &self.rows {
            let e = &r.energies;
            for i in 0..3 {
                if e.e_tilde[i] > 0.0 {
                    let need = self.c_hat * (e.cross[i] - e.phi_sq[i]) / e.e_tilde[i];
                    if need >= c {
                        c = need * (1.0 + 1e-9) + f64::MIN_POSITIVE;
                    }
                }
            }
        }
        self.c_bar = c;
        c
    }

    pub fn combined(&self, row: &EnergyLedgerRow) -> [f64; 3] {
        row.energies.combined(self.c_bar, self.c_hat)
    }

    /// Rows where some `Eᵢ` falls below `∫|∂ⁱB|² + |∂ⁱφ|²`.
    pub fn dominance_failures(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for r in &self.rows {
            let e = self.combined(r);
            for i in 0..3 {
                if e[i] < r.energies.dominated[i] {
                    out.push((r.t, i));
                }
            }
        }
        out
    }

    pub fn columns(&self) -> Vec<&'static str> {
        let mut c = vec![
            "t",
            "l2",
            "h1",
            "linf",
            "linf_pert",
            "E_tilde_0",
            "E_tilde_1",
            "E_tilde_2",
            "K_tilde_0",
            "K_tilde_1",
            "K_tilde_2",
            "G_0",
            "G_1",
            "G_2",
            "K_0",
            "K_1",
            "K_2",
            "E_0",
            "E_1",
            "E_2",
            "a_min",
            "v1_min",
            "v1_max",
            "Phi_end",
            "Psi_end",
            "Wbar_end",
            "zeta_residual",
        ];
        if self.mode == Mode::ZeroMass {
            c.extend(["omega_l2", "poincare_lhs", "poincare_rhs", "poincare_ratio", "heat_lhs", "heat_rhs"]);
        }
        c
    }

    /// Tab-separated ledger with a commented metadata preamble.
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# mode = {}", self.mode.as_str())?;
        writeln!(w, "# n = {}  s = {}  fallback = {}", self.weight.n, self.weight.s, self.weight.fallback)?;
        writeln!(w, "# C_hat = {}  C_bar = {:.10e}", self.c_hat, self.c_bar)?;
        writeln!(w, "{}", self.columns().join("\t"))?;
        for r in &self.rows {
            let e = &r.energies;
            let comb = self.combined(r);
            let mut vals = vec![r.t, r.l2, r.h1, r.linf, r.linf_pert];
            vals.extend(e.e_tilde);
            vals.extend(e.k_tilde);
            vals.extend(e.g);
            vals.extend(e.k);
            vals.extend(comb);
            vals.extend([e.a_min, e.v1_min, e.v1_max]);
            vals.extend(r.mass_end);
            vals.push(r.zeta_residual);
            if self.mode == Mode::ZeroMass {
                let p = r.poincare.unwrap_or_default();
                vals.extend([p.weighted_l2, p.lhs, p.rhs, p.ratio, p.heat_lhs, p.heat_rhs]);
            }
            let line: Vec<String> = vals.iter().map(|v| format!("{v:.10e}")).collect();
            writeln!(w, "{}", line.join("\t"))?;
        }
        Ok(())
    }
}
