//! Uniform grids, nodal fields, trapezoid quadrature and finite differences.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest grid that still has a centre node.
pub const MIN_NODES: usize = 3;

/// Uniform node-centred grid on `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_width: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return invalid(format!("half width must be positive, got {half_width}"));
        }
        if n < MIN_NODES {
            return invalid(format!("need at least {MIN_NODES} nodes, got {n}"));
        }
        Ok(Self { half_width, n, dx: 2.0 * half_width / (n - 1) as f64 })
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of node `i`; written so that `x(i) == -x(n-1-i)` exactly.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let m = (self.n - 1) as f64;
        self.half_width * (2.0 * i as f64 - m) / m
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

pub fn make_grid(half_width: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(half_width, n)
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("field has {} values for a {}-node grid", values.len(), grid.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_vec(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: (0..grid.len()).map(|i| f(grid.x(i))).collect() }
    }

    #[inline]
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Field::from_vec(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn integral(&self) -> f64 {
        trapz(&self.values, self.grid.dx)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, c: f64) -> Field {
        self.map(|a| a * c)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|a| -a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub l1: f64,
}

pub fn norms(f: &Field) -> Norms {
    let dx = f.grid.dx;
    let sq: Vec<f64> = f.values.iter().map(|v| v * v).collect();
    let abs: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    Norms { l2: trapz(&sq, dx).sqrt(), linf: max_abs(&f.values), l1: trapz(&abs, dx) }
}

pub fn antiderivative_from_left(f: &Field) -> Field {
    Field::from_vec(f.grid, cumtrapz(&f.values, f.grid.dx))
}

pub fn derivative(f: &Field, order: u32) -> Result<Field> {
    if f.len() < 5 {
        return invalid("derivative needs at least 5 nodes");
    }
    let out = match order {
        1 => d1(&f.values, f.grid.dx),
        2 => d2(&f.values, f.grid.dx),
        _ => return invalid(format!("unsupported derivative order {order}")),
    };
    Ok(Field::from_vec(f.grid, out))
}

// Slice kernels shared by the solver and diagnostics.

pub fn trapz(f: &[f64], dx: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => dx * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1])),
    }
}

pub fn cumtrapz(f: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(f.len());
    out
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Second-order first derivative: central inside, one-sided at the ends.
pub fn d1(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3);
    let h2 = 0.5 / dx;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * h2;
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * h2;
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * h2;
    out
}

/// Second-order second derivative with 4-point one-sided end stencils.
pub fn d2(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4);
    let ih = 1.0 / (dx * dx);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * ih;
    }
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * ih;
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * ih;
    out
}

/// Trapezoid L² norm of a raw slice.
pub fn l2(f: &[f64], dx: f64) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    trapz(&sq, dx).sqrt()
}

/// `∫ w f²` by the trapezoid rule.
pub fn weighted_sq(f: &[f64], w: &[f64], dx: f64) -> f64 {
    let sq: Vec<f64> = f.iter().zip(w).map(|(a, b)| a * a * b).collect();
    trapz(&sq, dx)
}
