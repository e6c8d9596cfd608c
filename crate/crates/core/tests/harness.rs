use cwave::diagnostics::Mode;
use cwave::harness::run::error_code;
use cwave::harness::verdict::default_window;
use cwave::harness::{
    audit_run, exit_code, fit_power, fit_power_fixed_q, fit_power_log, identity_suite, run_experiment, verify_theorem,
    zero_mass_default, DecaySeries, ExperimentConfig, Outcome, Overrides, RunReport,
};
use cwave::solver::Shape;
use cwave::{EndStates, Error, GasModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn times(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (1.0 + t_end).powf(i as f64 / (n - 1) as f64) - 1.0).collect()
}

fn series(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> Vec<(f64, f64)> {
    times(t_end, n).into_iter().map(|t| (t, f(t))).collect()
}

fn ln2(t: f64) -> f64 {
    (2.0 + t).ln()
}

#[test]
fn power_fit_is_exact_on_its_model() {
    let s = series(|t| (1.0 + t).powf(-0.5), 2000.0, 100);
    let f = fit_power(&s, (10.0, 2000.0)).unwrap();
    assert!((f.p - 0.5).abs() <= 1e-10 && f.q == 0.0);
    assert!(f.residual <= 1e-12);
    let s = series(|t| 3.0 * (1.0 + t).powf(-0.75), 2000.0, 100);
    let f = fit_power(&s, (10.0, 2000.0)).unwrap();
    assert!((f.p - 0.75).abs() <= 1e-10 && (f.intercept - 3.0_f64.ln()).abs() <= 1e-10);
    assert!((f.eval(500.0) - 3.0 * 501.0_f64.powf(-0.75)).abs() <= 1e-10);
    assert!(f.samples >= 10 && f.t_lo >= 10.0 && f.t_hi <= 2000.0);
}

#[test]
fn power_fit_tolerates_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s: Vec<(f64, f64)> = times(2000.0, 200)
        .into_iter()
        .map(|t| (t, (1.0 + t).powf(-0.25) * (1.0 + rng.gen_range(-0.01..0.01))))
        .collect();
    let f = fit_power(&s, (10.0, 2000.0)).unwrap();
    assert!((f.p - 0.25).abs() <= 0.02, "{}", f.p);
}

#[test]
fn log_fit_is_exact_on_its_model() {
    let s = series(|t| (1.0 + t).powf(-0.5) * ln2(t).sqrt(), 1e4, 200);
    let f = fit_power_log(&s, (10.0, 1e4)).unwrap();
    assert!((f.p - 0.5).abs() <= 1e-10 && (f.q - 0.5).abs() <= 1e-10, "{f:?}");
    let g = fit_power_fixed_q(&s, (10.0, 1e4), 0.5).unwrap();
    assert!((g.p - 0.5).abs() <= 1e-10 && g.q == 0.5 && g.residual <= 1e-12);
}

#[test]
fn log_fit_of_pure_power() {
    let s = series(|t| 1.0 / (1.0 + t), 1e4, 200);
    let f = fit_power_log(&s, (10.0, 1e4)).unwrap();
    assert!((f.p - 1.0).abs() <= 0.02 && f.q.abs() <= 0.02, "{f:?}");
}

#[test]
fn short_window_is_ill_conditioned() {
    let s = series(|t| (1.0 + t).powf(-0.5) * ln2(t).sqrt(), 30.0, 40);
    match fit_power_log(&s, (10.0, 30.0)) {
        Err(Error::IllConditioned { cond }) => assert!(cond > 500.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fit_input_errors() {
    let s = series(|t| (1.0 + t).powf(-0.5), 2000.0, 100);
    assert!(matches!(fit_power(&s, (3000.0, 4000.0)), Err(Error::InvalidArgument(_))));
    assert!(fit_power(&s, (20.0, 10.0)).is_err());
    let mut bad = s.clone();
    bad[60].1 = 0.0;
    assert!(matches!(fit_power(&bad, (10.0, 2000.0)), Err(Error::InvalidArgument(_))));
    assert!(fit_power_log(&bad, (10.0, 2000.0)).is_err());
}

fn synthetic(mode: Mode, t_end: f64, n: usize) -> DecaySeries {
    let t = times(t_end, n);
    let rate = |p: f64, q: f64| -> Vec<f64> { t.iter().map(|&t| 0.01 * (1.0 + t).powf(-p) * ln2(t).powf(q)).collect() };
    let q = if mode == Mode::ZeroMass { 0.5 } else { 0.0 };
    let (a, b, c) = match mode {
        Mode::NonzeroMass => (0.25, 0.75, 0.5),
        Mode::ZeroMass => (0.5, 1.0, 0.75),
    };
    DecaySeries { l2: rate(a, q), h1: rate(b, q), linf: rate(c, q), t }
}

#[test]
fn exact_rates_pass_in_both_modes() {
    for mode in [Mode::NonzeroMass, Mode::ZeroMass] {
        let rep = verify_theorem(&synthetic(mode, 2000.0, 80), mode, None);
        assert_eq!(rep.outcome, Outcome::Pass, "{}", rep.render());
        assert_eq!(rep.window, (100.0, 2000.0));
        for v in &rep.series {
            assert!((v.p - v.target_p).abs() <= 1e-10, "{}", rep.render());
        }
        assert_eq!(rep.log_preferred, mode == Mode::ZeroMass);
    }
}

#[test]
fn wrong_rates_fail() {
    let mut s = synthetic(Mode::NonzeroMass, 2000.0, 80);
    s.l2 = s.t.iter().map(|&t| (1.0 + t).powf(-0.5)).collect();
    let rep = verify_theorem(&s, Mode::NonzeroMass, None);
    assert_eq!(rep.outcome, Outcome::Fail);
    assert!(!rep.series[0].within_band && rep.series[1].within_band);
    // right exponents without the log factor fail the zero-mass comparison
    let rep = verify_theorem(&synthetic(Mode::NonzeroMass, 2000.0, 80), Mode::ZeroMass, None);
    assert_eq!(rep.outcome, Outcome::Fail);
}

#[test]
fn short_ledgers_are_inconclusive() {
    for (t_end, n) in [(400.0, 80), (2000.0, 30)] {
        let rep = verify_theorem(&synthetic(Mode::NonzeroMass, t_end, n), Mode::NonzeroMass, None);
        assert_eq!(rep.outcome, Outcome::Inconclusive);
        assert!(!rep.note.is_empty());
    }
    assert_eq!(Outcome::Inconclusive.as_str(), "INCONCLUSIVE");
}

#[test]
fn verdicts_are_deterministic() {
    let s = synthetic(Mode::ZeroMass, 2000.0, 120);
    let a = verify_theorem(&s, Mode::ZeroMass, None);
    let b = verify_theorem(&s, Mode::ZeroMass, None);
    assert_eq!(a, b);
    assert_eq!(a.render(), b.render());
}

#[test]
fn default_window_rule() {
    assert_eq!(default_window(2000.0), (100.0, 2000.0));
    assert_eq!(default_window(100.0), (10.0, 100.0));
}

#[test]
fn config_round_trips_through_toml() {
    let c = zero_mass_default();
    let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
    assert_eq!(c, back);
    back.validate().unwrap();
}

#[test]
fn config_errors_map_to_exit_two() {
    let e = ExperimentConfig::from_toml_str("[grid]\nn = 64\nbogus = 1\n").unwrap_err();
    assert!(matches!(e, Error::Config(_)));
    assert_eq!(error_code(&e), 2);

    let mut z = zero_mass_default();
    z.perturbation.shape = Shape::Bump;
    assert_eq!(exit_code(&run_experiment(&z)), 2);

    let mut c = ExperimentConfig::default();
    c.grid.half_width = Some(400.0);
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    c.time.t_end = 100.0;
    c.validate().unwrap();

    for bad in [
        |c: &mut ExperimentConfig| c.time.cfl = 0.0,
        |c: &mut ExperimentConfig| c.time.rho = 1.0,
        |c: &mut ExperimentConfig| c.grid.n = 8,
        |c: &mut ExperimentConfig| c.perturbation.width = -1.0,
        |c: &mut ExperimentConfig| c.ends.delta = -2.0,
        |c: &mut ExperimentConfig| c.time.t_end = -1.0,
    ] {
        let mut c = ExperimentConfig::default();
        bad(&mut c);
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
    }
}

#[test]
fn overrides_switch_mode_and_shape() {
    let mut c = ExperimentConfig::default();
    c.perturbation.eps_theta = Some(0.3);
    c.apply(&Overrides {
        mode: Some(Mode::ZeroMass),
        t_end: Some(50.0),
        delta: Some(0.2),
        eps: Some(0.02),
        grid_n: Some(512),
        seed: Some(9),
        ..Default::default()
    });
    assert_eq!(c.mode(), Mode::ZeroMass);
    assert_eq!(c.perturbation.shape, Shape::BumpDerivative);
    assert_eq!((c.time.t_end, c.ends.delta, c.grid.n, c.seed), (50.0, 0.2, 512, 9));
    assert_eq!(c.perturbation.eps_theta, None);
    let sp = c.perturbation_spec().unwrap();
    let gas = GasModel::default();
    let pp = c.end_states().unwrap().p_plus(&gas);
    assert!((sp.eps_theta + gas.gm1_r() * pp * 0.02).abs() < 1e-15);
    c.validate().unwrap();
}

#[test]
fn center_jitter_is_seeded() {
    let mut c = ExperimentConfig::default();
    c.perturbation.center_jitter = 2.0;
    let a = c.perturbation_spec().unwrap().center;
    assert_eq!(a, c.perturbation_spec().unwrap().center);
    assert!(a.abs() <= 2.0);
    c.seed = 1;
    assert_ne!(a, c.perturbation_spec().unwrap().center);
}

#[test]
fn identity_suite_passes_and_is_seeded() {
    let gas = GasModel::default();
    let ends = EndStates::with_delta(&gas, 0.1).unwrap();
    let a = identity_suite(&gas, &ends, 7, 300).unwrap();
    assert!(a.all_pass(), "{}", a.render());
    for name in [
        "L*R = I",
        "L*A1*R = Lambda",
        "A4 symmetric",
        "z'A4z = dissipation form",
        "dissipation form >= 0",
        "mass decomposition round trip",
        "sup g = sqrt(pi/alpha)",
        "4 alpha g_t = omega_x",
    ] {
        assert!(a.get(name).is_some(), "{name}");
    }
    assert_eq!(a, identity_suite(&gas, &ends, 7, 300).unwrap());
}

fn small(dir: &std::path::Path, mode: Mode, t_end: f64) -> ExperimentConfig {
    let mut c = match mode {
        Mode::ZeroMass => zero_mass_default(),
        Mode::NonzeroMass => ExperimentConfig::default(),
    };
    c.out_dir = dir.to_path_buf();
    c.time.t_end = t_end;
    c.grid.n = 256;
    c
}

#[test]
fn identities_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), Mode::NonzeroMass, 0.0);
    c.run_identities = true;
    let r = run_experiment(&c);
    assert_eq!(exit_code(&r), 0);
    assert!(matches!(r.unwrap(), RunReport::Identities(_)));
    assert!(dir.path().join("identities.txt").exists());
    assert!(!dir.path().join("ledger.tsv").exists());
}

#[test]
fn zero_horizon_run_has_initial_diagnostics_only() {
    for mode in [Mode::NonzeroMass, Mode::ZeroMass] {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(dir.path(), mode, 0.0));
        assert_eq!(exit_code(&r), 0);
        let RunReport::Simulation(s) = r.unwrap() else { panic!() };
        assert_eq!(s.ledger.rows.len(), 1);
        assert_eq!(s.verdict.outcome, Outcome::Inconclusive);
        for f in [
            "config.toml",
            "ledger.tsv",
            "fit_report.txt",
            "checkpoint.bin",
            "conservation.txt",
            "profile.tsv",
            "massdecomp.txt",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        for f in ["l2.tsv", "h1.tsv", "linf.tsv"] {
            assert!(dir.path().join("plotdata").join(f).exists());
        }
        assert_eq!(std::fs::read_dir(dir.path().join("snapshots")).unwrap().count(), 1);
        let text = std::fs::read_to_string(dir.path().join("ledger.tsv")).unwrap();
        let (series, m) = DecaySeries::parse_tsv(&text).unwrap();
        assert_eq!((series.t, m), (vec![0.0], Some(mode)));
        assert_eq!(dir.path().join("poincare.tsv").exists(), mode == Mode::ZeroMass);
    }
}

#[test]
fn runs_are_reproducible_and_auditable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let r = run_experiment(&small(d.path(), Mode::ZeroMass, 20.0));
        assert_eq!(exit_code(&r), 0);
    }
    for f in ["ledger.tsv", "fit_report.txt", "checkpoint.bin", "poincare.tsv", "plotdata/l2.tsv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let rep = audit_run(a.path()).unwrap();
    assert_eq!(rep.mode, Mode::ZeroMass);
    assert!(rep.items.iter().any(|i| i.name.starts_with("conservation drift")));
    let drift = rep.items.iter().filter(|i| i.name.starts_with("conservation drift"));
    assert!(drift.clone().count() >= 1 && drift.clone().all(|i| i.pass), "{}", rep.render());
    assert!(audit_run(&a.path().join("missing")).is_err());
}

#[test]
fn alpha_above_profile_rate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), Mode::ZeroMass, 0.0);
    c.mode.alpha = Some(10.0);
    assert_eq!(exit_code(&run_experiment(&c)), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn power_fit_recovers_any_exponent(p in 0.0..2.0f64, c in -3.0..3.0f64) {
        let s = series(|t| (c - p * (1.0 + t).ln()).exp(), 2000.0, 60);
        let f = fit_power(&s, (10.0, 2000.0)).unwrap();
        prop_assert!((f.p - p).abs() <= 1e-10 && (f.intercept - c).abs() <= 1e-9);
    }

    #[test]
    fn log_fit_recovers_any_pair(p in 0.0..2.0f64, q in -1.0..1.0f64) {
        let s = series(|t| (1.0 + t).powf(-p) * ln2(t).powf(q), 1e4, 120);
        let f = fit_power_log(&s, (10.0, 1e4)).unwrap();
        prop_assert!((f.p - p).abs() <= 1e-9 && (f.q - q).abs() <= 1e-9);
    }
}
