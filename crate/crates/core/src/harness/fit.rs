//! Least-squares decay fits `y ≈ C (1+t)^{-p} ln^q(2+t)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Minimum number of samples inside a fit window.
pub const MIN_SAMPLES: usize = 10;

/// Largest accepted condition number of the column-normalised design
/// matrix of the two-exponent fit.
pub const MAX_COND: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub p: f64,
    pub q: f64,
    /// `ln C`.
    pub intercept: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// `max |ln y - fit|` over the window.
    pub residual: f64,
    pub samples: usize,
    /// Condition number of the normalised design matrix.
    pub cond: f64,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        (self.intercept - self.p * (1.0 + t).ln() + self.q * (2.0 + t).ln().ln()).exp()
    }
}

fn window(series: &[(f64, f64)], win: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = win;
    if !(lo <= hi) {
        return invalid(format!("empty fit window [{lo}, {hi}]"));
    }
    let pts: Vec<(f64, f64)> = series.iter().cloned().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < MIN_SAMPLES {
        return invalid(format!("fit window [{lo}, {hi}] holds {} samples, need {MIN_SAMPLES}", pts.len()));
    }
    if let Some(&(t, y)) = pts.iter().find(|&&(t, y)| !(y > 0.0 && y.is_finite() && t > -1.0)) {
        return invalid(format!("non-positive value {y} at t = {t}"));
    }
    Ok(pts)
}

/// Solves `ln y - q_fixed·lnln(2+t) ≈ c - p ln(1+t) [+ q lnln(2+t)]`.
fn solve(pts: &[(f64, f64)], free_q: bool, q_fixed: f64) -> Result<DecayFit> {
    let m = pts.len();
    let k = if free_q { 3 } else { 2 };
    let mut a = DMatrix::<f64>::zeros(m, k);
    let mut b = DVector::<f64>::zeros(m);
    for (i, &(t, y)) in pts.iter().enumerate() {
        let ll = (2.0 + t).ln().ln();
        a[(i, 0)] = 1.0;
        a[(i, 1)] = -(1.0 + t).ln();
        if free_q {
            a[(i, 2)] = ll;
        }
        b[i] = y.ln() - if free_q { 0.0 } else { q_fixed * ll };
    }
    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    let mut an = a.clone();
    for (j, nj) in norms.iter().enumerate() {
        if *nj == 0.0 {
            return Err(Error::IllConditioned { cond: f64::INFINITY });
        }
        an.column_mut(j).scale_mut(1.0 / nj);
    }
    let svd = an.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if free_q && !(cond <= MAX_COND) {
        return Err(Error::IllConditioned { cond });
    }
    let xn = svd.solve(&b, 0.0).map_err(|e| Error::InvalidState(e.to_string()))?;
    let x: Vec<f64> = (0..k).map(|j| xn[j] / norms[j]).collect();
    let q = if free_q { x[2] } else { q_fixed };
    let fit =
        DecayFit { p: x[1], q, intercept: x[0], t_lo: pts[0].0, t_hi: pts[m - 1].0, residual: 0.0, samples: m, cond };
    let residual = pts.iter().map(|&(t, y)| (y.ln() - fit.eval(t).ln()).abs()).fold(0.0, f64::max);
    Ok(DecayFit { residual, ..fit })
}

/// Pure power law, `q = 0`.
pub fn fit_power(series: &[(f64, f64)], win: (f64, f64)) -> Result<DecayFit> {
    solve(&window(series, win)?, false, 0.0)
}

/// Power law with a prescribed logarithmic exponent `q`.
pub fn fit_power_fixed_q(series: &[(f64, f64)], win: (f64, f64), q: f64) -> Result<DecayFit> {
    solve(&window(series, win)?, false, q)
}

/// Both exponents free; refuses windows where `ln ln(2+t)` is nearly
/// collinear with `ln(1+t)`.
pub fn fit_power_log(series: &[(f64, f64)], win: (f64, f64)) -> Result<DecayFit> {
    solve(&window(series, win)?, true, 0.0)
}
