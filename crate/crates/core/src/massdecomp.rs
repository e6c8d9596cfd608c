//! Endpoint eigen-structure of the inviscid flux and the split of the
//! initial excess mass along `r₁⁻`, `m₊ - m₋` and `r₃⁺`.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::gas::{EndStates, GasModel};
use crate::grid::trapz;
use crate::linalg::{det3, from_columns, matvec, solve3, Mat3, Vec3};
use crate::solver::SimState;
use crate::waves::ContactWave;

/// Smallest admissible `|det[r₁⁻, m₊-m₋, r₃⁺]|`.
pub const MIN_BASIS_DET: f64 = 1e-8;

/// Jacobian of the flux of `m = (v, u, θ + (γ-1)u²/2R)`.
pub fn flux_jacobian(v: f64, u: f64, theta: f64, gas: &GasModel) -> Result<Mat3> {
    if !(v > 0.0 && theta > 0.0) {
        return invalid(format!("flux Jacobian needs v, θ > 0 (v = {v}, θ = {theta})"));
    }
    let p = gas.pressure(v, theta);
    let g = gas.gm1_r();
    Ok([[0.0, -1.0, 0.0], [-p / v, 0.0, gas.r / v], [-g * p * u / v, g * p, g * u / v]])
}

/// Conserved vector `m = (v, u, θ + (γ-1)u²/2R)`.
#[inline]
pub fn conserved(v: f64, u: f64, theta: f64, gas: &GasModel) -> Vec3 {
    [v, u, theta + 0.5 * gas.gm1_r() * u * u]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointEigen {
    pub lambda1_minus: f64,
    pub lambda3_plus: f64,
    pub r1_minus: Vec3,
    pub r3_plus: Vec3,
    pub m_jump: Vec3,
    pub det: f64,
}

impl EndpointEigen {
    pub fn basis(&self) -> Mat3 {
        from_columns(&self.r1_minus, &self.m_jump, &self.r3_plus)
    }
}

pub fn endpoint_eigen(ends: &EndStates, gas: &GasModel) -> Result<EndpointEigen> {
    ends.validate(gas)?;
    let g = gas.gm1_r();
    let l1 = ends.lambda1_minus(gas);
    let l3 = ends.lambda3_plus(gas);
    let r1 = [-1.0, l1, g * ends.p_minus(gas)];
    let r3 = [-1.0, l3, g * ends.p_plus(gas)];
    let m_minus = conserved(ends.v_minus, ends.u_minus, ends.theta_minus, gas);
    let m_plus = conserved(ends.v_plus, ends.u_minus, ends.theta_plus, gas);
    let jump = [m_plus[0] - m_minus[0], m_plus[1] - m_minus[1], m_plus[2] - m_minus[2]];

    for (a, r, lam, name) in [
        (flux_jacobian(ends.v_minus, 0.0, ends.theta_minus, gas)?, r1, l1, "r1-"),
        (flux_jacobian(ends.v_plus, 0.0, ends.theta_plus, gas)?, r3, l3, "r3+"),
    ] {
        let ar = matvec(&a, &r);
        let err = (0..3).map(|i| (ar[i] - lam * r[i]).abs()).fold(0.0, f64::max);
        if err > 1e-10 {
            return Err(Error::InvalidState(format!("{name} eigen-residual {err:.3e}")));
        }
    }
    let eig = EndpointEigen { lambda1_minus: l1, lambda3_plus: l3, r1_minus: r1, r3_plus: r3, m_jump: jump, det: 0.0 };
    let det = det3(&eig.basis());
    Ok(EndpointEigen { det, ..eig })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassDecomposition {
    pub theta_bar_1: f64,
    pub theta_bar_2: f64,
    pub theta_bar_3: f64,
    pub excess: Vec3,
}

impl MassDecomposition {
    pub fn zero() -> Self {
        Self { theta_bar_1: 0.0, theta_bar_2: 0.0, theta_bar_3: 0.0, excess: [0.0; 3] }
    }

    /// Coefficients on the two acoustic fields only.
    pub fn acoustic(theta_bar_1: f64, theta_bar_3: f64) -> Self {
        Self { theta_bar_1, theta_bar_2: 0.0, theta_bar_3, excess: [0.0; 3] }
    }

    pub fn reconstruct(&self, eig: &EndpointEigen) -> Vec3 {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.theta_bar_1 * eig.r1_minus[i]
                + self.theta_bar_2 * eig.m_jump[i]
                + self.theta_bar_3 * eig.r3_plus[i];
        }
        out
    }

    pub fn write_report(&self, eig: &EndpointEigen, mut w: impl Write) -> std::io::Result<()> {
        let v = |x: &Vec3| format!("{:.12e} {:.12e} {:.12e}", x[0], x[1], x[2]);
        writeln!(w, "excess\t{}", v(&self.excess))?;
        writeln!(w, "r1_minus\t{}", v(&eig.r1_minus))?;
        writeln!(w, "m_jump\t{}", v(&eig.m_jump))?;
        writeln!(w, "r3_plus\t{}", v(&eig.r3_plus))?;
        writeln!(w, "determinant\t{:.12e}", eig.det)?;
        writeln!(w, "theta_bar\t{:.12e} {:.12e} {:.12e}", self.theta_bar_1, self.theta_bar_2, self.theta_bar_3)
    }
}

/// Trapezoid integral of `m(x, 0) - m̄(x, 0)` per component.
pub fn excess_mass(init: &SimState, cw: &ContactWave, gas: &GasModel) -> Result<Vec3> {
    if init.grid() != cw.grid() {
        return invalid("initial data and contact wave live on different grids");
    }
    let dx = init.grid().dx();
    let (v, u, th) = (init.v.values(), init.u.values(), init.theta.values());
    let (vb, ub, tb) = (cw.v_bar.values(), cw.u_bar.values(), cw.theta_bar.values());
    let mut comp = [vec![0.0; v.len()], vec![0.0; v.len()], vec![0.0; v.len()]];
    for i in 0..v.len() {
        let m = conserved(v[i], u[i], th[i], gas);
        let mb = conserved(vb[i], ub[i], tb[i], gas);
        for k in 0..3 {
            comp[k][i] = m[k] - mb[k];
        }
    }
    Ok([trapz(&comp[0], dx), trapz(&comp[1], dx), trapz(&comp[2], dx)])
}

pub fn decompose_mass(excess: &Vec3, eig: &EndpointEigen) -> Result<MassDecomposition> {
    if eig.det.abs() <= MIN_BASIS_DET {
        return Err(Error::InvalidState(format!("mass basis nearly singular (det = {:.3e})", eig.det)));
    }
    let c = solve3(&eig.basis(), excess)?;
    Ok(MassDecomposition { theta_bar_1: c[0], theta_bar_2: c[1], theta_bar_3: c[2], excess: *excess })
}
