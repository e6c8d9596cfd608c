//! Self-similar solution of `Θ_t = a (Θ_x / Θ)_x` joining `θ₋` to `θ₊`.
//!
//! With `ξ = x / √(1+t)` the profile solves the boundary value problem
//!
//! ```text
//! -(ξ/2) Θ'(ξ) = a (Θ'/Θ)'(ξ),   Θ(-Ξ) = θ₋,  Θ(Ξ) = θ₊
//! ```
//!
//! on a truncated interval. The unknown is `y = ln Θ`, which turns the
//! diffusion term into `a y''` and gives a tridiagonal Newton system.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::gas::{EndStates, GasModel};
use crate::linalg::solve_tridiagonal;

pub const DEFAULT_XI_MAX: f64 = 12.0;
pub const DEFAULT_NODES: usize = 4801;
/// Max-norm tolerance on the discrete ODE residual.
pub const RESIDUAL_TOL: f64 = 1e-8;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Debug, Clone)]
pub struct ProfileTable {
    xi_max: f64,
    h: f64,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
    ddtheta: Vec<f64>,
    pub a_coef: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    /// Max-norm residual of the discrete equations at convergence.
    pub residual: f64,
    pub newton_iterations: usize,
    pub gauss_c1: f64,
    pub gauss_c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub theta: f64,
    pub theta_x: f64,
    pub theta_xx: f64,
    pub theta_t: f64,
    pub theta_xt: f64,
}

impl ProfileTable {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn xi(&self, i: usize) -> f64 {
        let m = (self.len() - 1) as f64;
        self.xi_max * (2.0 * i as f64 - m) / m
    }

    pub fn xi_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.xi(i)).collect()
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta
    }

    pub fn dtheta(&self) -> &[f64] {
        &self.dtheta
    }

    pub fn ddtheta(&self) -> &[f64] {
        &self.ddtheta
    }

    pub fn delta(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }

    /// `(Θ, Θ', Θ'')` at similarity variable `xi`.
    pub fn eval_xi(&self, xi: f64) -> (f64, f64, f64) {
        if xi <= -self.xi_max {
            return (self.theta_minus, 0.0, 0.0);
        }
        if xi >= self.xi_max {
            return (self.theta_plus, 0.0, 0.0);
        }
        let n = self.len();
        let s = (xi + self.xi_max) / self.h;
        let i = (s.floor() as usize).min(n - 2);
        let tau = s - i as f64;
        let (y0, y1) = (self.theta[i], self.theta[i + 1]);
        let th = hermite(y0, y1, self.dtheta[i], self.dtheta[i + 1], self.h, tau).clamp(y0.min(y1), y0.max(y1));
        let dth = hermite(self.dtheta[i], self.dtheta[i + 1], self.ddtheta[i], self.ddtheta[i + 1], self.h, tau);
        (th, dth, self.second_from_ode(xi, th, dth))
    }

    /// `Θ''` implied by the ODE at a point where `Θ` and `Θ'` are known.
    #[inline]
    fn second_from_ode(&self, xi: f64, th: f64, dth: f64) -> f64 {
        dth * dth / th - xi * th * dth / (2.0 * self.a_coef)
    }

    /// Plain-text dump: one row `ξ Θ Θ' Θ''` per node.
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# xi\ttheta_hat\tdtheta\tddtheta")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.10e}\t{:.16e}\t{:.16e}\t{:.16e}",
                self.xi(i),
                self.theta[i],
                self.dtheta[i],
                self.ddtheta[i]
            )?;
        }
        Ok(())
    }
}

/// Cubic Hermite on `[0, h]` at fraction `tau`; end slopes pass through a
/// Fritsch-Carlson limiter so that monotone data stay monotone.
fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, tau: f64) -> f64 {
    let secant = (y1 - y0) / h;
    let (mut m0, mut m1) = (m0, m1);
    if secant == 0.0 {
        m0 = 0.0;
        m1 = 0.0;
    } else {
        let (a, b) = (m0 / secant, m1 / secant);
        if a < 0.0 {
            m0 = 0.0;
        }
        if b < 0.0 {
            m1 = 0.0;
        }
        let r = a * a + b * b;
        if r > 9.0 {
            let s = 3.0 / r.sqrt();
            m0 = s * a * secant;
            m1 = s * b * secant;
        }
    }
    let t2 = tau * tau;
    let t3 = t2 * tau;
    y0 + (-2.0 * t3 + 3.0 * t2) * (y1 - y0) + h * ((t3 - 2.0 * t2 + tau) * m0 + (t3 - t2) * m1)
}

pub fn solve_profile(gas: &GasModel, ends: &EndStates, xi_max: f64, n: usize) -> Result<ProfileTable> {
    gas.validate()?;
    ends.validate(gas)?;
    if !(xi_max >= 8.0) {
        return invalid(format!("similarity cutoff must be at least 8, got {xi_max}"));
    }
    if n < 16 {
        return invalid("profile needs at least 16 nodes");
    }
    let a = gas.diffusion_coef(ends.p_plus(gas));
    let h = 2.0 * xi_max / (n - 1) as f64;
    let xi: Vec<f64> = {
        let m = (n - 1) as f64;
        (0..n).map(|i| xi_max * (2.0 * i as f64 - m) / m).collect()
    };
    let (tm, tp) = (ends.theta_minus, ends.theta_plus);

    let (y, residual, iterations) = if tm == tp {
        (vec![tm.ln(); n], 0.0, 0)
    } else {
        let ramp: Vec<f64> = xi.iter().map(|&s| (tm + (tp - tm) * (s + xi_max) / (2.0 * xi_max)).ln()).collect();
        match newton(&xi, h, a, ramp) {
            Ok(r) => r,
            Err(_) => continuation(&xi, h, a, tm, tp)?,
        }
    };

    // exp(ln θ) can land one ulp outside [θ₋, θ₊] or step back near the plateaus
    let (lo, hi) = (tm.min(tp), tm.max(tp));
    let mut theta: Vec<f64> = y.iter().map(|v| v.exp().clamp(lo, hi)).collect();
    for i in 1..n {
        theta[i] = if tp >= tm { theta[i].max(theta[i - 1]) } else { theta[i].min(theta[i - 1]) };
    }
    // a (ln Θ)'' = -(ξ/2) Θ (ln Θ)' integrates to (ln Θ)' = C exp(-∫ ξΘ/2a),
    // which keeps one sign everywhere; C matches the total jump of ln Θ.
    let decay: Vec<f64> = xi.iter().zip(&theta).map(|(s, t)| s * t / (2.0 * a)).collect();
    let mut expo = crate::grid::cumtrapz(&decay, h);
    let e0 = expo[(n - 1) / 2];
    for e in expo.iter_mut() {
        *e = (-(*e - e0)).exp();
    }
    let mass = crate::grid::trapz(&expo, h);
    let c = if mass > 0.0 { (tp / tm).ln() / mass } else { 0.0 };
    let dtheta: Vec<f64> = theta.iter().zip(&expo).map(|(t, e)| c * t * e).collect();
    let ddtheta: Vec<f64> =
        (0..n).map(|i| dtheta[i] * dtheta[i] / theta[i] - xi[i] * theta[i] * dtheta[i] / (2.0 * a)).collect();

    let mut table = ProfileTable {
        xi_max,
        h,
        theta,
        dtheta,
        ddtheta,
        a_coef: a,
        theta_minus: tm,
        theta_plus: tp,
        residual,
        newton_iterations: iterations,
        gauss_c1: 0.0,
        gauss_c2: 0.0,
    };
    if residual > RESIDUAL_TOL {
        return Err(Error::NoConvergence { stage: "profile", residual });
    }
    let fit = verify_gaussian_bounds(&table);
    table.gauss_c1 = fit.c1;
    table.gauss_c2 = fit.c2;
    Ok(table)
}

pub fn solve_profile_default(gas: &GasModel, ends: &EndStates) -> Result<ProfileTable> {
    solve_profile(gas, ends, DEFAULT_XI_MAX, DEFAULT_NODES)
}

/// Residual of the discrete equations `a D²y + (ξ/2) D¹e^y` at interior nodes.
fn residual_vec(xi: &[f64], h: f64, a: f64, y: &[f64], th: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut r = vec![0.0; n];
    for i in 1..n - 1 {
        r[i] = a * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h) + 0.5 * xi[i] * (th[i + 1] - th[i - 1]) / (2.0 * h);
    }
    r
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn newton(xi: &[f64], h: f64, a: f64, mut y: Vec<f64>) -> Result<(Vec<f64>, f64, usize)> {
    let n = y.len();
    let mut th: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let mut r = residual_vec(xi, h, a, &y, &th);
    let mut res = max_norm(&r);
    let (ih2, i4h) = (1.0 / (h * h), 1.0 / (4.0 * h));
    for it in 0..NEWTON_MAX_ITER {
        if res <= NEWTON_TOL {
            return Ok((y, res, it));
        }
        // Jacobian restricted to interior unknowns; Dirichlet rows are identity.
        let mut lo = vec![0.0; n];
        let mut di = vec![1.0; n];
        let mut up = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            lo[i] = a * ih2 - xi[i] * th[i - 1] * i4h;
            di[i] = -2.0 * a * ih2;
            up[i] = a * ih2 + xi[i] * th[i + 1] * i4h;
            rhs[i] = -r[i];
        }
        lo[n - 1] = 0.0;
        up[0] = 0.0;
        solve_tridiagonal(&lo, &di, &up, &mut rhs)?;
        // update at round-off level: the residual has hit its floor
        if rhs.iter().fold(0.0_f64, |m, d| m.max(d.abs())) <= 1e-14 && res <= RESIDUAL_TOL {
            return Ok((y, res, it));
        }

        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&rhs).map(|(a, d)| a + step * d).collect();
            let tth: Vec<f64> = trial.iter().map(|v| v.exp()).collect();
            let tr = residual_vec(xi, h, a, &trial, &tth);
            let tres = max_norm(&tr);
            if tres.is_finite() && (tres < res || step < 1e-3) {
                y = trial;
                th = tth;
                r = tr;
                res = tres;
                break;
            }
            step *= 0.5;
        }
    }
    if res <= RESIDUAL_TOL {
        Ok((y, res, NEWTON_MAX_ITER))
    } else {
        Err(Error::NoConvergence { stage: "profile newton", residual: res })
    }
}

/// Walks the jump up from a small fraction of its final size.
fn continuation(xi: &[f64], h: f64, a: f64, tm: f64, tp: f64) -> Result<(Vec<f64>, f64, usize)> {
    const STAGES: usize = 16;
    let n = xi.len();
    let xmax = xi[n - 1];
    let mut prev: Option<Vec<f64>> = None;
    let mut total = 0;
    let mut last = (Vec::new(), f64::INFINITY);
    for k in 1..=STAGES {
        let target = tm + (tp - tm) * k as f64 / STAGES as f64;
        let guess = match &prev {
            // rescale the previous shape to the new endpoint
            Some(p) => {
                let prev_target = tm + (tp - tm) * (k - 1) as f64 / STAGES as f64;
                p.iter()
                    .map(|&v| {
                        let s = (v.exp() - tm) / (prev_target - tm);
                        (tm + s * (target - tm)).ln()
                    })
                    .collect()
            }
            None => xi.iter().map(|&s| (tm + (target - tm) * (s + xmax) / (2.0 * xmax)).ln()).collect(),
        };
        let mut g: Vec<f64> = guess;
        g[0] = tm.ln();
        g[n - 1] = target.ln();
        let (y, res, it) = newton(xi, h, a, g)?;
        total += it;
        prev = Some(y.clone());
        last = (y, res);
    }
    Ok((last.0, last.1, total))
}

pub fn sample_profile(p: &ProfileTable, x: f64, t: f64) -> Result<ProfileSample> {
    if !(t >= 0.0) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    Ok(sample_unchecked(p, x, t))
}

pub(crate) fn sample_unchecked(p: &ProfileTable, x: f64, t: f64) -> ProfileSample {
    let s = (1.0 + t).sqrt();
    let xi = x / s;
    let (th, d1, d2) = p.eval_xi(xi);
    ProfileSample {
        theta: th,
        theta_x: d1 / s,
        theta_xx: d2 / (1.0 + t),
        theta_t: -xi * d1 / (2.0 * (1.0 + t)),
        theta_xt: -(xi * d2 + d1) / (2.0 * (1.0 + t) * s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussFit {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
}

/// Times of the default envelope lattice.
pub const GAUSS_TIMES: [f64; 6] = [0.0, 1.0, 4.0, 9.0, 24.0, 99.0];
/// Contributions below this are treated as exact zeros by the envelope fit.
const ENVELOPE_FLOOR: f64 = 1e-13;
/// The fitted `c₁` may exceed its `c₂ → 0` value by at most this factor.
const C1_SLACK: f64 = 4.0;

pub fn verify_gaussian_bounds(p: &ProfileTable) -> GaussFit {
    verify_gaussian_bounds_at(p, &GAUSS_TIMES)
}

/// Envelope fit of `(1+t)|Θ_xx| + (1+t)^{1/2}|Θ_x| + |Θ - θ±| ≤ c₁ δ exp(-c₂ x²/(1+t))`.
///
/// The x-lattice at each time spans `|x| ≤ Ξ √(1+t)` so the bound is probed
/// over the same similarity range at every time. `c₂` is the largest value
/// from a log-spaced candidate set whose minimal `c₁` stays within
/// `C1_SLACK` of the `c₂ → 0` requirement.
pub fn verify_gaussian_bounds_at(p: &ProfileTable, times: &[f64]) -> GaussFit {
    let delta = p.delta();
    if delta == 0.0 {
        return GaussFit { c1: 0.0, c2: 0.0, pass: true };
    }
    let samples_per_time = 2001;
    let mut pts: Vec<(f64, f64)> = Vec::new(); // (x²/(1+t), F/δ)
    for &t in times {
        let s = (1.0 + t).sqrt();
        for j in 0..samples_per_time {
            let xi = -p.xi_max + 2.0 * p.xi_max * j as f64 / (samples_per_time - 1) as f64;
            let x = xi * s;
            let q = sample_unchecked(p, x, t);
            let far = if x < 0.0 {
                (q.theta - p.theta_minus).abs()
            } else if x > 0.0 {
                (q.theta - p.theta_plus).abs()
            } else {
                (q.theta - p.theta_minus).abs().min((q.theta - p.theta_plus).abs())
            };
            let f = (1.0 + t) * q.theta_xx.abs() + s * q.theta_x.abs() + far;
            if f > ENVELOPE_FLOOR {
                pts.push((x * x / (1.0 + t), f / delta));
            }
        }
    }
    let c1_of = |c2: f64| pts.iter().fold(0.0_f64, |m, &(z, f)| m.max(f * (c2 * z).exp()));
    let base = c1_of(0.0);
    let cap = C1_SLACK * base;
    let candidates = (0..=120).map(|k| 10f64.powf(-3.0 + 4.0 * k as f64 / 120.0));
    let mut best: Option<(f64, f64)> = None;
    for c2 in candidates {
        let c1 = c1_of(c2);
        if c1.is_finite() && c1 <= cap {
            best = Some((c1, c2));
        }
    }
    match best {
        Some((c1, c2)) => GaussFit { c1, c2, pass: c2 > 0.0 && c1.is_finite() },
        None => GaussFit { c1: base, c2: 0.0, pass: false },
    }
}
