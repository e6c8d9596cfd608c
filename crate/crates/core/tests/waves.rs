#![allow(clippy::needless_range_loop)]

use cwave::massdecomp::{conserved, decompose_mass, endpoint_eigen, excess_mass, MassDecomposition};
use cwave::profile::solve_profile_default;
use cwave::solver::{initial_data, PerturbationSpec, Shape};
use cwave::waves::{
    ansatz_residuals, ansatz_system_defect, build_ansatz, contact_envelope_ratio, contact_residuals,
    contact_system_defect, contact_wave, default_envelope_rate, diffusion_waves, heat_kernel, WaveModel,
};
use cwave::{EndStates, GasModel, Grid1D};
use proptest::prelude::*;

fn model(delta: f64, a1: f64, a3: f64) -> WaveModel {
    let gas = GasModel::default();
    let ends = EndStates::with_delta(&gas, delta).unwrap();
    let profile = solve_profile_default(&gas, &ends).unwrap();
    WaveModel { gas, ends, profile, coeffs: MassDecomposition::acoustic(a1, a3) }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn flat_contact_wave_for_equal_ends() {
    let m = model(0.0, 0.0, 0.0);
    let g = Grid1D::new(50.0, 501).unwrap();
    let cw = m.contact(&g, 3.0).unwrap();
    assert!(cw.v_bar.values().iter().all(|&v| v == 1.0));
    assert!(cw.u_bar.values().iter().all(|&v| v == 0.0));
    assert!(cw.theta_bar.values().iter().all(|&v| v == 1.0));
    let (r1, r2) = contact_residuals(&cw, &m.gas);
    assert_eq!((r1.max_abs(), r2.max_abs()), (0.0, 0.0));
}

#[test]
fn contact_wave_state_relations() {
    let m = model(0.2, 0.0, 0.0);
    let g = Grid1D::new(60.0, 2001).unwrap();
    for t in [0.0, 5.0, 20.0] {
        let cw = m.contact(&g, t).unwrap();
        let th = cw.theta_hat.values();
        let vb = cw.v_bar.values();
        for i in 0..g.len() {
            assert!((vb[i] - th[i] / cw.p_plus).abs() <= 1e-12);
            assert!((cw.p_bar.values()[i] * vb[i] - cw.theta_bar.values()[i]).abs() <= 1e-12);
        }
        // v̄ = Θ̂ when R = p₊ = 1, so v̄ sweeps [1, 1.2] monotonically
        assert!(vb.windows(2).all(|w| w[1] >= w[0]));
        let n = g.len() - 1;
        assert!((vb[0] - 1.0).abs() <= 1e-6 && (vb[n] - 1.2).abs() <= 1e-6);
        assert!(cw.u_bar.values()[0].abs() <= 1e-6 && cw.u_bar.values()[n].abs() <= 1e-6);
        assert!((cw.theta_bar.values()[0] - 1.0).abs() <= 1e-6);
        assert!((cw.theta_bar.values()[n] - 1.2).abs() <= 1e-6);
    }
}

#[test]
fn contact_velocity_is_self_similar() {
    let m = model(0.2, 0.0, 0.0);
    let one = Grid1D::new(1.0, 3).unwrap();
    for xi in [-3.0_f64, -0.7, 0.4, 2.5] {
        let u0 =
            m.contact(&Grid1D::new(xi.abs(), 3).unwrap(), 0.0).unwrap().u_bar.values()[if xi < 0.0 { 0 } else { 2 }];
        for t in [1.0_f64, 8.0, 99.0] {
            let s = (1.0 + t).sqrt();
            let g = Grid1D::new(xi.abs() * s, 3).unwrap();
            let u = m.contact(&g, t).unwrap().u_bar.values()[if xi < 0.0 { 0 } else { 2 }];
            assert!((u * s - u0).abs() <= 1e-8, "xi {xi} t {t}");
        }
    }
    assert!(m.contact(&one, -1.0).is_err());
}

#[test]
fn residuals_follow_their_formulas() {
    let m = model(0.1, 0.0, 0.0);
    let g = Grid1D::new(40.0, 801).unwrap();
    let cw = m.contact(&g, 2.0).unwrap();
    let (r1, r2) = contact_residuals(&cw, &m.gas);
    let k = m.gas.kappa * (m.gas.gamma - 1.0) / (m.gas.gamma * m.gas.r) - m.gas.mu;
    for i in 0..g.len() {
        let a = k * cw.u_bar_x.values()[i] / cw.v_bar.values()[i] + cw.p_bar.values()[i] - cw.p_plus;
        assert!((r1.values()[i] - a).abs() <= 1e-15);
        assert!((r2.values()[i] - a * cw.u_bar.values()[i]).abs() <= 1e-15);
    }
    assert!(r1.is_finite() && r2.is_finite());
}

#[test]
fn matched_viscosity_leaves_only_the_pressure_residual() {
    let mut gas = GasModel::default();
    gas.mu = gas.contact_coef();
    let ends = EndStates::with_delta(&gas, 0.1).unwrap();
    let p = solve_profile_default(&gas, &ends).unwrap();
    let g = Grid1D::new(40.0, 801).unwrap();
    let cw = contact_wave(&p, &gas, &ends, &g, 1.0).unwrap();
    let (r1, _) = contact_residuals(&cw, &gas);
    let dp: Vec<f64> = cw.p_bar.values().iter().map(|p| p - cw.p_plus).collect();
    assert!(max_diff(r1.values(), &dp) <= 1e-15);
    assert!(r1.max_abs() > 0.0);
}

#[test]
fn contact_system_defect_is_second_order() {
    let m = model(0.1, 0.0, 0.0);
    let defect = |n: usize| {
        let g = Grid1D::new(30.0, n).unwrap();
        contact_system_defect(&m.profile, &m.gas, &m.ends, &g, 2.0, 1e-3).unwrap()
    };
    let (a, b) = (defect(601), defect(1201));
    for k in 0..2 {
        assert!(b[k] <= 1e-4, "{b:?}");
        assert!(a[k] / b[k] >= 3.0, "{a:?} {b:?}");
    }
    let g = Grid1D::new(30.0, 601).unwrap();
    assert!(contact_system_defect(&m.profile, &m.gas, &m.ends, &g, 0.0, 1e-3).is_err());
}

#[test]
fn contact_energy_defect_is_the_quadratic_heat_flux_term() {
    // expanding the energy equation leaves κ(γ-1)²p₊/(γR²) (ū ū_x / Θ̂)_x, which is O(δ²)
    let mut floors = vec![];
    for d in [0.05, 0.1, 0.2] {
        let m = model(d, 0.0, 0.0);
        let g = Grid1D::new(30.0, 4801).unwrap();
        let cw = m.contact(&g, 2.0).unwrap();
        let gas = &m.gas;
        let k = gas.kappa * (gas.gamma - 1.0).powi(2) * cw.p_plus / (gas.gamma * gas.r * gas.r);
        let q: Vec<f64> = (0..g.len())
            .map(|i| k * cw.u_bar.values()[i] * cw.u_bar_x.values()[i] / cw.theta_hat.values()[i])
            .collect();
        let qx = cwave::grid::d1(&q, g.dx());
        let expected = qx[1..g.len() - 1].iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let got = contact_system_defect(&m.profile, gas, &m.ends, &g, 2.0, 1e-3).unwrap()[2];
        assert!((got - expected).abs() <= 0.01 * expected, "{d}: {got} {expected}");
        floors.push(got);
    }
    let slope = (floors[2] / floors[0]).ln() / 4.0_f64.ln();
    assert!((slope - 2.0).abs() <= 0.1, "{slope}");
}

#[test]
fn contact_residual_envelope_is_bounded_in_time() {
    let m = model(0.1, 0.0, 0.0);
    let g = Grid1D::new(400.0, 16001).unwrap();
    let c2 = m.profile.gauss_c2;
    let ratios: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
        .iter()
        .map(|&t| {
            let cw = m.contact(&g, t).unwrap();
            let (r1, _) = contact_residuals(&cw, &m.gas);
            contact_envelope_ratio(&cw, &r1, 0.1, 0.5 * c2)
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi.is_finite() && hi / lo < 10.0, "{ratios:?}");
}

#[test]
fn diffusion_wave_peak_and_mass() {
    let m = model(0.2, 0.0, 0.0);
    let g = Grid1D::new(60.0, 12001).unwrap();
    let dw = diffusion_waves(&m.ends, &m.gas, &g, 0.0).unwrap();
    let peak = (4.0 * std::f64::consts::PI).powf(-0.5);
    assert!((heat_kernel(0.0, 0.0, 0.0).0 - 0.2820948).abs() < 1e-7);
    assert!((heat_kernel(0.0, 0.0, 0.0).0 - peak).abs() < 1e-16);
    assert!((dw.lambda1 + (5.0_f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((dw.lambda3 - (5.0_f64 / 3.0 / 1.2).sqrt()).abs() < 1e-12);
    for t in [0.0, 3.0] {
        let l = 60.0;
        assert!(l >= dw.lambda3 * (1.0 + t) + 20.0 * (1.0_f64 + t).sqrt());
        let dw = diffusion_waves(&m.ends, &m.gas, &g, t).unwrap();
        assert!((dw.theta3.integral() - 1.0).abs() <= 1e-8);
        assert!((dw.theta1.integral() - 1.0).abs() <= 1e-8);
    }
    assert!(diffusion_waves(&m.ends, &m.gas, &g, -0.5).is_err());
}

#[test]
fn diffusion_wave_solves_its_heat_equation() {
    let lam = -(5.0_f64 / 3.0).sqrt();
    let (h, k) = (1e-3, 1e-4);
    let mut worst = 0.0_f64;
    for t in [0.0_f64, 1.0, 5.0] {
        for i in -40..=40 {
            let x = 0.25 * i as f64 + lam * (1.0 + t);
            let f = |x: f64, t: f64| heat_kernel(x, t, lam).0;
            let ft = (-3.0 * f(x, t) + 4.0 * f(x, t + k) - f(x, t + 2.0 * k)) / (2.0 * k);
            let fx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let fxx = (f(x + h, t) - 2.0 * f(x, t) + f(x - h, t)) / (h * h);
            worst = worst.max((ft + lam * fx - fxx).abs());
            let (_, ax, axx) = heat_kernel(x, t, lam);
            assert!((ax - fx).abs() <= 1e-7 && (axx - fxx).abs() <= 1e-5);
        }
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn ansatz_reduces_to_contact_wave() {
    let m = model(0.1, 0.0, 0.0);
    let g = Grid1D::new(40.0, 801).unwrap();
    let we = m.ensemble(&g, 1.0).unwrap();
    let cw = &we.contact;
    assert_eq!(we.v_tilde.values(), cw.v_bar.values());
    assert_eq!(we.u_tilde.values(), cw.u_bar.values());
    assert!(max_diff(we.theta_tilde.values(), cw.theta_bar.values()) <= 1e-15);
    let r = &we.residuals;
    assert_eq!(r.rt1.max_abs(), 0.0);
    assert!(max_diff(r.rt2.values(), r.r1.values()) <= 1e-15);
    assert!(max_diff(r.rt3.values(), r.r2.values()) <= 1e-15);
}

#[test]
fn ansatz_conserved_vector_identity() {
    let m = model(0.2, 0.03, -0.02);
    let g = Grid1D::new(60.0, 1201).unwrap();
    let eig = endpoint_eigen(&m.ends, &m.gas).unwrap();
    for t in [0.0, 4.0] {
        let we = m.ensemble(&g, t).unwrap();
        let cw = &we.contact;
        for i in 0..g.len() {
            let mt = conserved(we.v_tilde.values()[i], we.u_tilde.values()[i], we.theta_tilde.values()[i], &m.gas);
            let mb = conserved(cw.v_bar.values()[i], cw.u_bar.values()[i], cw.theta_bar.values()[i], &m.gas);
            let (t1, t3) = (we.diffusion.theta1.values()[i], we.diffusion.theta3.values()[i]);
            for k in 0..3 {
                let rhs = mb[k] + 0.03 * t1 * eig.r1_minus[k] - 0.02 * t3 * eig.r3_plus[k];
                assert!((mt[k] - rhs).abs() <= 1e-12);
            }
            let e = m.gas.r * we.theta_tilde.values()[i] / (m.gas.gamma - 1.0);
            assert!((we.e_tilde.values()[i] - e).abs() <= 1e-12);
            let rt1 = -0.03 * we.diffusion.theta1_x.values()[i] + 0.02 * we.diffusion.theta3_x.values()[i];
            assert!((we.residuals.rt1.values()[i] - rt1).abs() <= 1e-15);
        }
    }
}

#[test]
fn ansatz_rejects_mismatched_inputs_and_lost_positivity() {
    let m = model(0.1, 0.0, 0.0);
    let g = Grid1D::new(40.0, 801).unwrap();
    let cw = m.contact(&g, 1.0).unwrap();
    let dw = diffusion_waves(&m.ends, &m.gas, &g, 2.0).unwrap();
    assert!(build_ansatz(&cw, &dw, &m.coeffs, &m.gas).is_err());
    let dw = diffusion_waves(&m.ends, &m.gas, &Grid1D::new(40.0, 401).unwrap(), 1.0).unwrap();
    assert!(build_ansatz(&cw, &dw, &m.coeffs, &m.gas).is_err());
    let big = model(0.1, 10.0, 0.0);
    assert!(matches!(big.ensemble(&g, 0.0), Err(cwave::Error::InvalidState(_))));
}

#[test]
fn zero_excess_mass_of_the_ansatz() {
    let m = model(0.1, 0.0, 0.0);
    let g = Grid1D::new(80.0, 3201).unwrap();
    let cw = m.contact(&g, 0.0).unwrap();
    let p_plus = m.ends.p_plus(&m.gas);
    let eps = 0.01;
    let spec = PerturbationSpec {
        shape: Shape::Bump,
        eps_v: eps,
        eps_u: 0.0,
        eps_theta: -(m.gas.gamma - 1.0) * p_plus * eps / m.gas.r,
        width: 4.0,
        center: 0.0,
    };
    let init = initial_data(&cw, &spec, &m.gas).unwrap();
    let eig = endpoint_eigen(&m.ends, &m.gas).unwrap();
    let dec = decompose_mass(&excess_mass(&init, &cw, &m.gas).unwrap(), &eig).unwrap();
    assert!(dec.theta_bar_2.abs() <= 1e-8);
    let full = WaveModel { coeffs: dec, ..m };
    let we = full.ensemble(&g, 0.0).unwrap();
    let mut comp = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for i in 0..g.len() {
        let a = conserved(init.v.values()[i], init.u.values()[i], init.theta.values()[i], &full.gas);
        let b = conserved(we.v_tilde.values()[i], we.u_tilde.values()[i], we.theta_tilde.values()[i], &full.gas);
        for k in 0..3 {
            comp[k][i] = a[k] - b[k];
        }
    }
    for c in comp {
        let s = cwave::grid::trapz(&c, g.dx());
        assert!(s.abs() <= 1e-8, "{s}");
    }
}

#[test]
fn ansatz_system_defect_at_moderate_resolution() {
    let m = model(0.1, 0.02, -0.01);
    let g = Grid1D::new(60.0, 2401).unwrap();
    assert!((g.dx() - 0.05).abs() < 1e-12);
    let d = ansatz_system_defect(&m, &g, 2.0, 0.01).unwrap();
    assert!(d.iter().all(|&x| x <= 1e-4), "{d:?}");
}

#[test]
fn ansatz_envelope_bounded_and_linear_in_delta() {
    let g = Grid1D::new(400.0, 16001).unwrap();
    let times = [0.0, 1.0, 10.0, 100.0];
    let mut sups = vec![];
    for d in [0.05, 0.1, 0.2] {
        let m = model(d, 0.0, 0.0);
        let rep = ansatz_residuals(&m, &g, &times, default_envelope_rate(&m.profile)).unwrap();
        let per_t: Vec<f64> = rep.ratios.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).collect();
        let lo = per_t.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rep.sup / lo < 10.0, "{per_t:?}");
        sups.push(rep.sup);
    }
    let slope = (sups[2] / sups[0]).ln() / 4.0_f64.ln();
    assert!((slope - 1.0).abs() <= 0.3, "{slope}");
}

#[test]
fn nonlinear_residual_is_quadratic_in_the_acoustic_mass() {
    // R̃₁ = -θ̄₁θ₁ₓ - θ̄₃θ₃ₓ is linear; the momentum residual is where θ̄² enters
    let g = Grid1D::new(400.0, 16001).unwrap();
    let times = [0.0, 1.0, 10.0, 100.0];
    let run = |a: f64| ansatz_residuals(&model(0.0, a, 0.0), &g, &times, 0.125).unwrap();
    let (lo, hi) = (run(1e-3), run(1e-1));
    let sup = |r: &cwave::waves::EnvelopeReport, k: usize| r.ratios.iter().map(|x| x[k]).fold(0.0, f64::max);
    let slope = |k: usize| (sup(&hi, k) / sup(&lo, k)).log10() / 2.0;
    assert!((slope(0) - 1.0).abs() <= 0.05, "{}", slope(0));
    assert!((slope(1) - 2.0).abs() <= 0.3, "{}", slope(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ansatz_stays_positive_in_tested_range(
        d in 0.0..0.3f64,
        a1 in -0.05..0.05f64,
        a3 in -0.05..0.05f64,
        t in 0.0..50.0f64,
    ) {
        let m = model(d, a1, a3);
        let g = Grid1D::new(120.0, 601).unwrap();
        let we = m.ensemble(&g, t).unwrap();
        prop_assert!(we.v_tilde.values().iter().all(|&v| v > 0.0));
        prop_assert!(we.theta_tilde.values().iter().all(|&v| v > 0.0));
        let r = &we.residuals;
        prop_assert!(r.rt1.is_finite() && r.rt2.is_finite() && r.rt3.is_finite());
    }
}
