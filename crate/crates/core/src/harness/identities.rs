//! Algebraic identity suite over seeded random states.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{
    dissipation_form, frame_defects, heat_time_identity_residual, heat_weights, viscosity_matrix,
};
use crate::error::Result;
use crate::gas::{EndStates, GasModel};
use crate::grid::Grid1D;
use crate::linalg::{dot, matvec};
use crate::massdecomp::{decompose_mass, endpoint_eigen};

pub const SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(IdentityCheck::pass)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = format!("seed\t{}\nsamples\t{}\n", self.seed, self.samples);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}\t{:.3e}\t<= {:.1e}\t{}",
                c.name,
                c.value,
                c.tol,
                if c.pass() { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

/// Runs every identity on `samples` random states drawn around `ends`.
pub fn identity_suite(gas: &GasModel, ends: &EndStates, seed: u64, samples: usize) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_plus = ends.p_plus(gas);
    let mut lr = 0.0_f64;
    let mut lam = 0.0_f64;
    let mut a4 = 0.0_f64;
    let mut ds = 0.0_f64;
    let mut neg = 0.0_f64;
    let mut sym = 0.0_f64;
    for _ in 0..samples {
        let v = rng.gen_range(0.5..2.0);
        let p = p_plus * rng.gen_range(0.5..2.0);
        let d = frame_defects(v, p, gas);
        lr = lr.max(d.lr);
        lam = lam.max(d.lambda);
        a4 = a4.max(d.a4);
        let z = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let m = viscosity_matrix(v, gas);
        let quad = dot(&z, &matvec(&m, &z));
        let form = dissipation_form(&z, v, gas);
        ds = ds.max((quad - form).abs());
        neg = neg.max(-form);
        for i in 0..3 {
            for j in 0..3 {
                sym = sym.max((m[i][j] - m[j][i]).abs());
            }
        }
    }
    // A₄ entries against their direct expressions at v̄ = 1
    let (gm, k, r, mu) = (gas.gamma, gas.kappa, gas.r, gas.mu);
    let m1 = viscosity_matrix(1.0, gas);
    let b22 = (gm - 1.0) * k / (gm * r);
    let b11 = mu / 2.0 + (gm - 1.0).powi(2) * k / (2.0 * gm * r);
    let entries = (m1[1][1] - b22).abs().max((m1[0][0] - b11).abs()).max((m1[0][2] - (b11 - mu)).abs());

    let eig = endpoint_eigen(ends, gas)?;
    let mut recon = 0.0_f64;
    for _ in 0..samples {
        let x = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let dec = decompose_mass(&x, &eig)?;
        let back = dec.reconstruct(&eig);
        for i in 0..3 {
            recon = recon.max((back[i] - x[i]).abs());
        }
    }

    let alpha = 0.25;
    let grid = Grid1D::new(100.0, 8001)?;
    let t = 10.0;
    let hw = heat_weights(alpha, &grid, t)?;
    let g_sup = hw.g_sup_defect();
    let f_excess = (hw.f_sup_scaled() - 2.0 / alpha.sqrt()).max(0.0);
    let heat_t = heat_time_identity_residual(alpha, &grid, t, 1e-3)?;

    let checks = vec![
        IdentityCheck { name: "L*R = I", value: lr, tol: 1e-12 },
        IdentityCheck { name: "L*A1*R = Lambda", value: lam, tol: 1e-10 },
        IdentityCheck { name: "L*A2*R = A4 closed form", value: a4, tol: 1e-12 },
        IdentityCheck { name: "A4 entries", value: entries, tol: 1e-14 },
        IdentityCheck { name: "A4 symmetric", value: sym, tol: 0.0 },
        IdentityCheck { name: "z'A4z = dissipation form", value: ds, tol: 1e-12 },
        IdentityCheck { name: "dissipation form >= 0", value: neg, tol: 0.0 },
        IdentityCheck { name: "mass decomposition round trip", value: recon, tol: 1e-12 },
        IdentityCheck { name: "sup g = sqrt(pi/alpha)", value: g_sup, tol: 1e-6 },
        IdentityCheck { name: "sup f (1+t)^(1/2) <= 2/sqrt(alpha)", value: f_excess, tol: 1e-10 },
        IdentityCheck { name: "4 alpha g_t = omega_x", value: heat_t, tol: 1e-6 },
    ];
    Ok(IdentityReport { seed, samples, checks })
}
