//! Viscous contact wave, acoustic diffusion waves and the combined ansatz.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::gas::{EndStates, GasModel};
use crate::grid::{d1, Field, Grid1D};
use crate::massdecomp::MassDecomposition;
use crate::profile::{sample_profile, sample_unchecked, ProfileTable};

/// Contact wave on a grid at one time, with the x-derivatives the
/// diagnostics need evaluated from the profile rather than by differencing.
#[derive(Debug, Clone)]
pub struct ContactWave {
    pub t: f64,
    pub p_plus: f64,
    pub theta_hat: Field,
    pub theta_hat_x: Field,
    pub v_bar: Field,
    pub u_bar: Field,
    pub theta_bar: Field,
    pub p_bar: Field,
    /// Total energy `Rθ̄/(γ-1) + ū²/2`.
    pub e_bar: Field,
    pub v_bar_x: Field,
    pub u_bar_x: Field,
    pub theta_bar_x: Field,
    pub u_bar_t: Field,
}

impl ContactWave {
    pub fn grid(&self) -> &Grid1D {
        self.v_bar.grid()
    }
}

pub fn contact_wave(p: &ProfileTable, gas: &GasModel, ends: &EndStates, grid: &Grid1D, t: f64) -> Result<ContactWave> {
    sample_profile(p, 0.0, t)?;
    let n = grid.len();
    let pp = ends.p_plus(gas);
    let c = gas.contact_coef();
    let g = gas.gm1_r();
    let mut cols: [Vec<f64>; 11] = Default::default();
    for col in cols.iter_mut() {
        col.reserve(n);
    }
    for i in 0..n {
        let s = sample_unchecked(p, grid.x(i), t);
        let (th, thx, thxx) = (s.theta, s.theta_x, s.theta_xx);
        let vb = gas.r * th / pp;
        let ub = ends.u_minus + c * thx / th;
        let ubx = c * (thxx / th - thx * thx / (th * th));
        let ubt = c * (s.theta_xt / th - thx * s.theta_t / (th * th));
        let tb = th - 0.5 * g * ub * ub;
        let row = [
            th,
            thx,
            vb,
            ub,
            tb,
            gas.r * tb / vb,
            gas.r * tb / (gas.gamma - 1.0) + 0.5 * ub * ub,
            gas.r * thx / pp,
            ubx,
            thx - g * ub * ubx,
            ubt,
        ];
        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let [th, thx, vb, ub, tb, pb, eb, vbx, ubx, tbx, ubt] = cols;
    let f = |v| Field::from_vec(*grid, v);
    Ok(ContactWave {
        t,
        p_plus: pp,
        theta_hat: f(th),
        theta_hat_x: f(thx),
        v_bar: f(vb),
        u_bar: f(ub),
        theta_bar: f(tb),
        p_bar: f(pb),
        e_bar: f(eb),
        v_bar_x: f(vbx),
        u_bar_x: f(ubx),
        theta_bar_x: f(tbx),
        u_bar_t: f(ubt),
    })
}

/// `R₁ = (κ(γ-1)/(γR) - μ) ū_x/v̄ + (p̄ - p₊)` and `R₂ = (…) ū ū_x/v̄ + (p̄ - p₊) ū`.
pub fn contact_residuals(cw: &ContactWave, gas: &GasModel) -> (Field, Field) {
    let k = gas.contact_coef() - gas.mu;
    let n = cw.v_bar.len();
    let (vb, ub, ubx, pb) = (cw.v_bar.values(), cw.u_bar.values(), cw.u_bar_x.values(), cw.p_bar.values());
    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for i in 0..n {
        let a = k * ubx[i] / vb[i];
        let b = pb[i] - cw.p_plus;
        r1.push(a + b);
        r2.push(ub[i] * (a + b));
    }
    (Field::from_vec(*cw.grid(), r1), Field::from_vec(*cw.grid(), r2))
}

/// Max-norm defects of the approximate system satisfied by the contact wave,
/// using centred differences of step `dt` in time and the grid in space.
pub fn contact_system_defect(
    p: &ProfileTable,
    gas: &GasModel,
    ends: &EndStates,
    grid: &Grid1D,
    t: f64,
    dt: f64,
) -> Result<[f64; 3]> {
    if t - dt < 0.0 {
        return invalid("time stencil reaches negative time");
    }
    let prev = contact_wave(p, gas, ends, grid, t - dt)?;
    let cur = contact_wave(p, gas, ends, grid, t)?;
    let next = contact_wave(p, gas, ends, grid, t + dt)?;
    let (r1, r2) = contact_residuals(&cur, gas);
    let dx = grid.dx();
    let dt2 = |a: &Field, b: &Field| -> Vec<f64> {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y) / (2.0 * dt)).collect()
    };
    let vb = cur.v_bar.values();
    let ub = cur.u_bar.values();
    let n = grid.len();
    let visc: Vec<f64> = (0..n).map(|i| gas.mu * cur.u_bar_x.values()[i] / vb[i]).collect();
    let heat: Vec<f64> = (0..n).map(|i| gas.kappa * cur.theta_bar_x.values()[i] / vb[i] + ub[i] * visc[i]).collect();
    let pu: Vec<f64> = (0..n).map(|i| cur.p_bar.values()[i] * ub[i]).collect();
    let energy = |w: &ContactWave| -> Field {
        let e: Vec<f64> = (0..n)
            .map(|i| gas.r * w.theta_bar.values()[i] / (gas.gamma - 1.0) + 0.5 * w.u_bar.values()[i].powi(2))
            .collect();
        Field::from_vec(*grid, e)
    };

    let vt = dt2(&next.v_bar, &prev.v_bar);
    let ut = dt2(&next.u_bar, &prev.u_bar);
    let et = dt2(&energy(&next), &energy(&prev));
    let ux = d1(ub, dx);
    let px = d1(cur.p_bar.values(), dx);
    let viscx = d1(&visc, dx);
    let r1x = d1(r1.values(), dx);
    let pux = d1(&pu, dx);
    let heatx = d1(&heat, dx);
    let r2x = d1(r2.values(), dx);
    let mut out = [0.0_f64; 3];
    for i in 1..n - 1 {
        out[0] = out[0].max((vt[i] - ux[i]).abs());
        out[1] = out[1].max((ut[i] + px[i] - viscx[i] - r1x[i]).abs());
        out[2] = out[2].max((et[i] + pux[i] - heatx[i] - r2x[i]).abs());
    }
    Ok(out)
}

/// Heat kernels riding on the acoustic speeds, `θᵢ_t + λᵢ θᵢ_x = θᵢ_xx`.
#[derive(Debug, Clone)]
pub struct DiffusionWaves {
    pub t: f64,
    pub lambda1: f64,
    pub lambda3: f64,
    pub theta1: Field,
    pub theta3: Field,
    pub theta1_x: Field,
    pub theta3_x: Field,
    pub theta1_xx: Field,
    pub theta3_xx: Field,
}

/// `(θ, θ_x, θ_xx)` of `(4πs)^{-1/2} exp(-(x-λs)²/4s)` with `s = 1+t`.
#[inline]
pub fn heat_kernel(x: f64, t: f64, lambda: f64) -> (f64, f64, f64) {
    let s = 1.0 + t;
    let z = x - lambda * s;
    let th = (-z * z / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s).sqrt();
    let thx = -z / (2.0 * s) * th;
    let thxx = (z * z / (4.0 * s * s) - 0.5 / s) * th;
    (th, thx, thxx)
}

pub fn diffusion_waves(ends: &EndStates, gas: &GasModel, grid: &Grid1D, t: f64) -> Result<DiffusionWaves> {
    if !(t >= 0.0) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    let l1 = ends.lambda1_minus(gas);
    let l3 = ends.lambda3_plus(gas);
    let n = grid.len();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for i in 0..n {
        let x = grid.x(i);
        let a = heat_kernel(x, t, l1);
        let b = heat_kernel(x, t, l3);
        for (col, v) in cols.iter_mut().zip([a.0, b.0, a.1, b.1, a.2, b.2]) {
            col.push(v);
        }
    }
    let [t1, t3, t1x, t3x, t1xx, t3xx] = cols;
    let f = |v| Field::from_vec(*grid, v);
    Ok(DiffusionWaves {
        t,
        lambda1: l1,
        lambda3: l3,
        theta1: f(t1),
        theta3: f(t3),
        theta1_x: f(t1x),
        theta3_x: f(t3x),
        theta1_xx: f(t1xx),
        theta3_xx: f(t3xx),
    })
}

#[derive(Debug, Clone)]
pub struct ResidualFields {
    pub r1: Field,
    pub r2: Field,
    pub rt1: Field,
    pub rt2: Field,
    pub rt3: Field,
}

#[derive(Debug, Clone)]
pub struct WaveEnsemble {
    pub contact: ContactWave,
    pub diffusion: DiffusionWaves,
    pub coeffs: MassDecomposition,
    pub v_tilde: Field,
    pub u_tilde: Field,
    pub theta_tilde: Field,
    pub e_tilde: Field,
    pub p_tilde: Field,
    pub v_tilde_x: Field,
    pub u_tilde_x: Field,
    pub theta_tilde_x: Field,
    pub u_tilde_t: Field,
    pub residuals: ResidualFields,
}

impl WaveEnsemble {
    pub fn t(&self) -> f64 {
        self.contact.t
    }

    pub fn grid(&self) -> &Grid1D {
        self.contact.grid()
    }

    /// Total energy `ẽ + ũ²/2` of the ansatz.
    pub fn total_energy(&self) -> Field {
        self.e_tilde.zip_map(&self.u_tilde, |e, u| e + 0.5 * u * u)
    }

    /// Plain-text snapshot: `x v̄ ū θ̄ ṽ ũ θ̃ R̃₁ R̃₂ R̃₃` per node.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# t = {:.10e}", self.t())?;
        writeln!(w, "# x\tv_bar\tu_bar\ttheta_bar\tv_tilde\tu_tilde\ttheta_tilde\tRt1\tRt2\tRt3")?;
        let g = self.grid();
        let c = &self.contact;
        let r = &self.residuals;
        for i in 0..g.len() {
            writeln!(
                w,
                "{:.10e}\t{:.14e}\t{:.14e}\t{:.14e}\t{:.14e}\t{:.14e}\t{:.14e}\t{:.6e}\t{:.6e}\t{:.6e}",
                g.x(i),
                c.v_bar.values()[i],
                c.u_bar.values()[i],
                c.theta_bar.values()[i],
                self.v_tilde.values()[i],
                self.u_tilde.values()[i],
                self.theta_tilde.values()[i],
                r.rt1.values()[i],
                r.rt2.values()[i],
                r.rt3.values()[i]
            )?;
        }
        Ok(())
    }
}

/// Builds the ansatz with the contact-direction coefficient normalised away.
pub fn build_ansatz(
    cw: &ContactWave,
    dw: &DiffusionWaves,
    coeffs: &MassDecomposition,
    gas: &GasModel,
) -> Result<WaveEnsemble> {
    if cw.grid() != dw.theta1.grid() || (cw.t - dw.t).abs() > 1e-12 * (1.0 + cw.t) {
        return invalid("contact and diffusion waves disagree on grid or time");
    }
    let n = cw.v_bar.len();
    let g = gas.gm1_r();
    let pp = cw.p_plus;
    let (a1, a3) = (coeffs.theta_bar_1, coeffs.theta_bar_3);
    let (l1, l3) = (dw.lambda1, dw.lambda3);
    let (r1, r2) = contact_residuals(cw, gas);

    let mut cols: [Vec<f64>; 12] = Default::default();
    for i in 0..n {
        let vb = cw.v_bar.values()[i];
        let ub = cw.u_bar.values()[i];
        let tb = cw.theta_bar.values()[i];
        let pb = cw.p_bar.values()[i];
        let vbx = cw.v_bar_x.values()[i];
        let ubx = cw.u_bar_x.values()[i];
        let tbx = cw.theta_bar_x.values()[i];
        let (t1, t3) = (dw.theta1.values()[i], dw.theta3.values()[i]);
        let (t1x, t3x) = (dw.theta1_x.values()[i], dw.theta3_x.values()[i]);
        let (t1xx, t3xx) = (dw.theta1_xx.values()[i], dw.theta3_xx.values()[i]);
        let mass = a1 * t1 + a3 * t3;
        let mass_x = a1 * t1x + a3 * t3x;

        let vt = vb - mass;
        let ut = ub + l1 * a1 * t1 + l3 * a3 * t3;
        let tt = tb + 0.5 * g * ub * ub + g * pp * mass - 0.5 * g * ut * ut;
        if !(vt > 0.0 && tt > 0.0) {
            return Err(Error::InvalidState(format!(
                "ansatz loses positivity at x = {} (v = {vt}, θ = {tt})",
                cw.grid().x(i)
            )));
        }
        let vtx = vbx - mass_x;
        let utx = ubx + l1 * a1 * t1x + l3 * a3 * t3x;
        let ttx = tbx + g * ub * ubx + g * pp * mass_x - g * ut * utx;
        let ptil = gas.r * tt / vt;
        // θᵢ_t = θᵢ_xx - λᵢ θᵢ_x
        let utt = cw.u_bar_t.values()[i] + l1 * a1 * (t1xx - l1 * t1x) + l3 * a3 * (t3xx - l3 * t3x);

        let rt1 = -mass_x;
        let rt2 = r1.values()[i]
            + gas.mu * (ubx / vb - utx / vt)
            + (l1 * a1 * t1x + l3 * a3 * t3x)
            + (ptil - pb - l1 * l1 * a1 * t1 - l3 * l3 * a3 * t3);
        let rt3 = r2.values()[i]
            + gas.kappa * (tbx / vb - ttx / vt)
            + gas.mu * (ub * ubx / vb - ut * utx / vt)
            + pp * mass_x
            + (ptil * ut - pb * ub - pp * l1 * a1 * t1 - pp * l3 * a3 * t3);

        let row = [vt, ut, tt, gas.r * tt / (gas.gamma - 1.0), ptil, vtx, utx, ttx, utt, rt1, rt2, rt3];
        for (col, v) in cols.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let grid = *cw.grid();
    let f = |v| Field::from_vec(grid, v);
    let [vt, ut, tt, et, pt, vtx, utx, ttx, utt, rt1, rt2, rt3] = cols;
    Ok(WaveEnsemble {
        contact: cw.clone(),
        diffusion: dw.clone(),
        coeffs: MassDecomposition { theta_bar_2: 0.0, ..*coeffs },
        v_tilde: f(vt),
        u_tilde: f(ut),
        theta_tilde: f(tt),
        e_tilde: f(et),
        p_tilde: f(pt),
        v_tilde_x: f(vtx),
        u_tilde_x: f(utx),
        theta_tilde_x: f(ttx),
        u_tilde_t: f(utt),
        residuals: ResidualFields { r1, r2, rt1: f(rt1), rt2: f(rt2), rt3: f(rt3) },
    })
}

/// Everything needed to evaluate the background waves at any time.
#[derive(Debug, Clone)]
pub struct WaveModel {
    pub gas: GasModel,
    pub ends: EndStates,
    pub profile: ProfileTable,
    pub coeffs: MassDecomposition,
}

impl WaveModel {
    pub fn contact(&self, grid: &Grid1D, t: f64) -> Result<ContactWave> {
        contact_wave(&self.profile, &self.gas, &self.ends, grid, t)
    }

    pub fn ensemble(&self, grid: &Grid1D, t: f64) -> Result<WaveEnsemble> {
        let cw = self.contact(grid, t)?;
        let dw = diffusion_waves(&self.ends, &self.gas, grid, t)?;
        build_ansatz(&cw, &dw, &self.coeffs, &self.gas)
    }
}

/// Max-norm defects of the ansatz system, with the residual fluxes `R̃ᵢ`
/// moved to the left-hand side. Time derivatives are centred with step `dt`.
pub fn ansatz_system_defect(model: &WaveModel, grid: &Grid1D, t: f64, dt: f64) -> Result<[f64; 3]> {
    if t - dt < 0.0 {
        return invalid("time stencil reaches negative time");
    }
    let gas = &model.gas;
    let prev = model.ensemble(grid, t - dt)?;
    let cur = model.ensemble(grid, t)?;
    let next = model.ensemble(grid, t + dt)?;
    let dx = grid.dx();
    let n = grid.len();
    let diff = |a: &Field, b: &Field| -> Vec<f64> {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y) / (2.0 * dt)).collect()
    };
    let vt = cur.v_tilde.values();
    let ut = cur.u_tilde.values();
    let visc: Vec<f64> = (0..n).map(|i| gas.mu * cur.u_tilde_x.values()[i] / vt[i]).collect();
    let heat: Vec<f64> = (0..n).map(|i| gas.kappa * cur.theta_tilde_x.values()[i] / vt[i] + ut[i] * visc[i]).collect();
    let pu: Vec<f64> = (0..n).map(|i| cur.p_tilde.values()[i] * ut[i]).collect();

    let v_t = diff(&next.v_tilde, &prev.v_tilde);
    let u_t = diff(&next.u_tilde, &prev.u_tilde);
    let e_t = diff(&next.total_energy(), &prev.total_energy());
    let ux = d1(ut, dx);
    let px = d1(cur.p_tilde.values(), dx);
    let viscx = d1(&visc, dx);
    let pux = d1(&pu, dx);
    let heatx = d1(&heat, dx);
    let r = &cur.residuals;
    let (r1x, r2x, r3x) = (d1(r.rt1.values(), dx), d1(r.rt2.values(), dx), d1(r.rt3.values(), dx));
    let mut out = [0.0_f64; 3];
    for i in 1..n - 1 {
        out[0] = out[0].max((v_t[i] - ux[i] - r1x[i]).abs());
        out[1] = out[1].max((u_t[i] + px[i] - viscx[i] - r2x[i]).abs());
        out[2] = out[2].max((e_t[i] + pux[i] - heatx[i] - r3x[i]).abs());
    }
    Ok(out)
}

/// Sup over the grid of `|R̃ᵢ| (1+t) / G(x,t)` for each `i`, where `G` is the
/// sum of three Gaussians of rate `c` centred on the contact and on the two
/// acoustic paths. Evaluated in log space so the tails stay meaningful.
pub fn envelope_ratio(we: &WaveEnsemble, c: f64) -> [f64; 3] {
    let t = we.t();
    let s = 1.0 + t;
    let (l1, l3) = (we.diffusion.lambda1, we.diffusion.lambda3);
    let g = we.grid();
    let r = &we.residuals;
    let mut out = [0.0_f64; 3];
    for i in 0..g.len() {
        let x = g.x(i);
        let e = [-c * x * x / s, -c * (x - l1 * s).powi(2) / s, -c * (x - l3 * s).powi(2) / s];
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_g = m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for (k, field) in [&r.rt1, &r.rt2, &r.rt3].into_iter().enumerate() {
            let a = field.values()[i].abs();
            if a > 0.0 {
                out[k] = out[k].max((a.ln() + s.ln() - log_g).exp());
            }
        }
    }
    out
}

/// Same ratio for the contact residual `R₁` against `δ exp(-c₂x²/(1+t))`.
pub fn contact_envelope_ratio(cw: &ContactWave, r1: &Field, delta: f64, c2: f64) -> f64 {
    let s = 1.0 + cw.t;
    let g = cw.grid();
    let mut out = 0.0_f64;
    for i in 0..g.len() {
        let a = r1.values()[i].abs();
        if a > 0.0 {
            let x = g.x(i);
            out = out.max((a.ln() + s.ln() - delta.ln() + c2 * x * x / s).exp());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub times: Vec<f64>,
    /// `ratios[k][i]` for time `k` and residual `R̃ᵢ₊₁`.
    pub ratios: Vec<[f64; 3]>,
    pub sup: f64,
    /// `sup / (δ + θ̄₁² + θ̄₃²)`.
    pub fitted_c: f64,
}

pub fn ansatz_residuals(model: &WaveModel, grid: &Grid1D, times: &[f64], c: f64) -> Result<EnvelopeReport> {
    let mut ratios = Vec::with_capacity(times.len());
    for &t in times {
        let we = model.ensemble(grid, t)?;
        ratios.push(envelope_ratio(&we, c));
    }
    let sup = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let scale = model.ends.delta() + model.coeffs.theta_bar_1.powi(2) + model.coeffs.theta_bar_3.powi(2);
    let fitted_c = if scale > 0.0 { sup / scale } else { f64::INFINITY };
    Ok(EnvelopeReport { times: times.to_vec(), ratios, sup, fitted_c })
}

/// Default Gaussian rate for the residual envelope: half of the smaller of
/// the fitted profile rate and the heat-kernel rate 1/4.
pub fn default_envelope_rate(profile: &ProfileTable) -> f64 {
    let c2 = if profile.gauss_c2 > 0.0 { profile.gauss_c2 } else { 0.25 };
    0.5 * c2.min(0.25)
}
