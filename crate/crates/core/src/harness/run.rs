//! End-to-end experiment pipeline and its on-disk artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{ledger_row, weight_exponent, Base, EnergyLedger, Mode, PoincareAudit, PoincareSummary};
use crate::error::{Error, Result, StageExt};
use crate::grid::Grid1D;
use crate::harness::config::ExperimentConfig;
use crate::harness::identities::{identity_suite, IdentityReport, SAMPLES};
use crate::harness::verdict::{targets, verify_theorem, DecaySeries, Outcome, VerdictReport, SERIES_NAMES};
use crate::massdecomp::{decompose_mass, endpoint_eigen, excess_mass, MassDecomposition};
use crate::profile::{solve_profile_default, verify_gaussian_bounds};
use crate::solver::{
    geometric_schedule, initial_data, simulate, write_checkpoint, ConservationTracker, DriftReport, StepConfig,
};
use crate::waves::{contact_wave, WaveModel};

/// Contact-field coefficient above which the ansatz normalisation is reported.
pub const THETA2_WARN: f64 = 1e-8;
/// Poincaré ratio variation is measured over this time window.
pub const POINCARE_WINDOW: (f64, f64) = (500.0, 2000.0);
/// Conservation drift is additionally reported up to this time.
pub const DRIFT_HORIZON: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub out_dir: PathBuf,
    pub mode: Mode,
    pub alpha: f64,
    pub profile_residual: f64,
    pub gauss_c2: f64,
    pub decomposition: MassDecomposition,
    pub ledger: EnergyLedger,
    pub verdict: VerdictReport,
    pub drift: Option<DriftReport>,
    pub drift_early: Option<DriftReport>,
    pub poincare: Option<PoincareSummary>,
    pub steps: usize,
    pub rejections: usize,
}

#[derive(Debug, Clone)]
pub enum RunReport {
    Identities(IdentityReport),
    Simulation(Box<SimulationReport>),
}

impl RunReport {
    pub fn passed(&self) -> bool {
        match self {
            RunReport::Identities(r) => r.all_pass(),
            RunReport::Simulation(s) => s.verdict.outcome != Outcome::Fail,
        }
    }
}

/// 0 pass or inconclusive, 1 failed verdict, 2 configuration error, 3 anything else.
pub fn exit_code(r: &Result<RunReport>) -> i32 {
    match r {
        Ok(rep) if rep.passed() => 0,
        Ok(_) => 1,
        Err(e) => error_code(e),
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate().stage("config")?;
    let gas = cfg.gas;
    let ends = cfg.end_states().stage("config")?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).stage("output")?;
    fs::write(out.join("config.toml"), cfg.to_toml_string()).stage("output")?;

    if cfg.run_identities {
        let rep = identity_suite(&gas, &ends, cfg.seed, SAMPLES).stage("identities")?;
        fs::write(out.join("identities.txt"), rep.render()).stage("output")?;
        return Ok(RunReport::Identities(rep));
    }

    let mode = cfg.mode();
    let t_end = cfg.time.t_end;
    let profile = solve_profile_default(&gas, &ends).stage("profile")?;
    let gauss = verify_gaussian_bounds(&profile);
    let c2 = if gauss.c2 > 0.0 { gauss.c2 } else { 0.25 };
    let alpha_max = c2 / 4.0;
    let alpha = cfg.mode.alpha.unwrap_or(alpha_max);
    if alpha > alpha_max * (1.0 + 1e-12) {
        return Err(Error::Config(format!("[mode] alpha = {alpha} exceeds c2/4 = {alpha_max:.6}"))).stage("config");
    }
    profile.write_table(create(&out.join("profile.tsv"))?).stage("output")?;

    let grid = Grid1D::new(cfg.half_width()?, cfg.grid.n).stage("grid")?;
    let cw0 = contact_wave(&profile, &gas, &ends, &grid, 0.0).stage("contact wave")?;
    let spec = cfg.perturbation_spec().stage("config")?;
    let init = initial_data(&cw0, &spec, &gas).stage("initial data")?;

    let eig = endpoint_eigen(&ends, &gas).stage("mass decomposition")?;
    let excess = excess_mass(&init, &cw0, &gas).stage("mass decomposition")?;
    let full = decompose_mass(&excess, &eig).stage("mass decomposition")?;
    full.write_report(&eig, create(&out.join("massdecomp.txt"))?).stage("output")?;
    if mode == Mode::NonzeroMass && full.theta_bar_2.abs() > THETA2_WARN {
        log::warn!(
            "contact-field coefficient theta_bar_2 = {:.3e}; the ansatz keeps the untranslated contact wave",
            full.theta_bar_2
        );
    }
    let coeffs = match mode {
        Mode::NonzeroMass => full,
        Mode::ZeroMass => MassDecomposition::zero(),
    };
    let model = WaveModel { gas, ends, profile: profile.clone(), coeffs };

    let mut step_cfg = StepConfig::from_cfl(&init, &gas, cfg.time.cfl).stage("solver")?;
    step_cfg.theta_scheme = cfg.time.theta_scheme;
    let schedule = geometric_schedule(0.0, t_end, cfg.time.rho).stage("solver")?;
    let snap_dir = out.join("snapshots");
    fs::create_dir_all(&snap_dir).stage("output")?;
    let mut snap_marks: Vec<f64> = vec![0.0];
    let mut m = 10.0;
    while m < t_end {
        snap_marks.push(m);
        m *= 10.0;
    }
    snap_marks.push(t_end);

    let mut audit = match mode {
        Mode::ZeroMass => Some(PoincareAudit::new(alpha, &gas, ends.p_plus(&gas)).stage("diagnostics")?),
        Mode::NonzeroMass => None,
    };
    let mut ledger = EnergyLedger::new(mode, weight_exponent(&ends));
    let mut tracker = ConservationTracker::default();
    let mut next_mark = 0;
    let summary = simulate(init, &step_cfg, &gas, &schedule, |s, inflow| {
        tracker.record(s, &gas, inflow);
        let (row, _) = match mode {
            Mode::ZeroMass => {
                let cw = model.contact(&grid, s.t)?;
                ledger_row(s, Base::Contact(&cw), &ends, &gas, audit.as_mut())?
            }
            Mode::NonzeroMass => {
                let we = model.ensemble(&grid, s.t)?;
                ledger_row(s, Base::Ansatz(&we), &ends, &gas, None)?
            }
        };
        ledger.push(row);
        if next_mark < snap_marks.len() && s.t >= snap_marks[next_mark] - 1e-9 {
            while next_mark < snap_marks.len() && s.t >= snap_marks[next_mark] - 1e-9 {
                next_mark += 1;
            }
            let path = snap_dir.join(format!("state_t{:011.4}.tsv", s.t));
            s.write_snapshot(create(&path)?)?;
        }
        Ok(())
    })
    .stage("simulation")?;

    ledger.finalize();
    ledger.write_tsv(create(&out.join("ledger.tsv"))?).stage("output")?;
    write_checkpoint(&summary.state, create(&out.join("checkpoint.bin"))?).stage("output")?;

    let (drift, drift_early) = if tracker.rows.len() >= 2 {
        let early: Vec<_> = tracker.rows.iter().filter(|r| r.0 <= DRIFT_HORIZON).cloned().collect();
        let de = if early.len() >= 2 { Some(crate::solver::conservation_audit(&early)?) } else { None };
        (Some(tracker.report()?), de)
    } else {
        (None, None)
    };
    write_conservation(&out.join("conservation.txt"), drift.as_ref(), drift_early.as_ref()).stage("output")?;

    let poincare = audit.as_ref().and_then(|a| {
        let (lo, hi) = POINCARE_WINDOW;
        a.summary(lo.min(t_end), hi.min(t_end))
    });
    if let Some(a) = &audit {
        let mut w = create(&out.join("poincare.tsv"))?;
        writeln!(w, "# alpha = {alpha:.10e}")?;
        writeln!(w, "t\tlhs\trhs\tratio\tomega_l2\theat_lhs\theat_rhs")?;
        for r in &a.rows {
            writeln!(
                w,
                "{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}",
                r.t, r.lhs, r.rhs, r.ratio, r.weighted_l2, r.heat_lhs, r.heat_rhs
            )?;
        }
        if let Some(s) = &poincare {
            writeln!(w, "# sup_ratio = {:.10e}", s.sup_ratio)?;
            writeln!(w, "# variation = {:.10e}", s.variation)?;
            writeln!(w, "# heat_ratio_max = {:.10e}", s.heat_ratio_max)?;
        }
    }

    let series = DecaySeries::from_ledger(&ledger);
    let verdict = verify_theorem(&series, mode, None);
    write_fit_report(&out.join("fit_report.txt"), &verdict, &ledger).stage("output")?;
    write_plotdata(&out.join("plotdata"), &series, &verdict).stage("output")?;

    Ok(RunReport::Simulation(Box::new(SimulationReport {
        out_dir: out,
        mode,
        alpha,
        profile_residual: profile.residual,
        gauss_c2: gauss.c2,
        decomposition: full,
        ledger,
        verdict,
        drift,
        drift_early,
        poincare,
        steps: summary.steps,
        rejections: summary.rejections,
    })))
}

fn write_conservation(path: &Path, all: Option<&DriftReport>, early: Option<&DriftReport>) -> Result<()> {
    let mut w = create(path)?;
    let row = |w: &mut BufWriter<File>, name: &str, d: Option<&DriftReport>| -> std::io::Result<()> {
        match d {
            Some(d) => writeln!(
                w,
                "{name}\trelative {:.3e} {:.3e} {:.3e}\tabsolute {:.3e} {:.3e} {:.3e}",
                d.relative[0], d.relative[1], d.relative[2], d.absolute[0], d.absolute[1], d.absolute[2]
            ),
            None => writeln!(w, "{name}\tfewer than two records"),
        }
    };
    row(&mut w, "run", all)?;
    row(&mut w, &format!("t<={DRIFT_HORIZON}"), early)?;
    Ok(())
}

fn write_fit_report(path: &Path, v: &VerdictReport, ledger: &EnergyLedger) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "{}", v.render())?;
    writeln!(w, "C_hat\t{}", ledger.c_hat)?;
    writeln!(w, "C_bar\t{:.10e}", ledger.c_bar)?;
    writeln!(w, "dominance_failures\t{}", ledger.dominance_failures().len())?;
    Ok(())
}

/// One file per norm: `t`, value, log-log coordinates, the target slope
/// anchored at the first window sample, and both fitted models.
fn write_plotdata(dir: &Path, s: &DecaySeries, v: &VerdictReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tg = targets(v.mode);
    for k in 0..3 {
        let mut w = create(&dir.join(format!("{}.tsv", SERIES_NAMES[k])))?;
        let (p, q) = tg[k];
        writeln!(w, "# target p = {p}  q = {q}")?;
        writeln!(w, "t\tvalue\tln_1pt\tln_value\treference\tpower_fit\tlog_fit")?;
        let pts = s.pairs(k);
        let shape = |t: f64| (1.0 + t).powf(-p) * (2.0 + t).ln().ln().powf(q);
        let anchor = pts.iter().find(|(t, _)| *t >= v.window.0).or(pts.first()).cloned();
        let fits = v.series.get(k);
        for &(t, y) in &pts {
            let reference = anchor.map(|(ta, ya)| ya * shape(t) / shape(ta)).unwrap_or(f64::NAN);
            let (pf, lf) = fits.map(|f| (f.power.eval(t), f.log_model.eval(t))).unwrap_or((f64::NAN, f64::NAN));
            let lv = if y > 0.0 { y.ln() } else { f64::NAN };
            writeln!(
                w,
                "{t:.10e}\t{y:.10e}\t{:.10e}\t{lv:.10e}\t{reference:.10e}\t{pf:.10e}\t{lf:.10e}",
                (1.0 + t).ln()
            )?;
        }
    }
    Ok(())
}
