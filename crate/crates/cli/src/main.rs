use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cwave::diagnostics::Mode;
use cwave::harness::run::error_code;
use cwave::harness::{
    audit_run, exit_code, identity_suite, run_experiment, verify_theorem, DecaySeries, ExperimentConfig, Outcome,
    Overrides, RunReport,
};
use cwave::profile::{solve_profile_default, verify_gaussian_bounds};
use cwave::{Error, Result};

#[derive(Parser)]
#[command(name = "cwave", version, about = "Viscous contact wave decay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the self-similar profile and write profile.tsv.
    Profile(Common),
    /// Run the algebraic identity suite.
    Identities(Common),
    /// Full simulation with diagnostics, fits and verdict.
    Simulate(Common),
    /// Re-fit the ledger of an existing run.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Ledger file; defaults to OUT/ledger.tsv.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        t_lo: Option<f64>,
        #[arg(long)]
        t_hi: Option<f64>,
    },
    /// Conservation, mass and Poincaré audits of an existing run.
    Audit(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Zero,
    Nonzero,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Zero => Mode::ZeroMass,
            ModeArg::Nonzero => Mode::NonzeroMass,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            out_dir: self.out.clone(),
            mode: self.mode.map(Into::into),
            t_end: self.t_end,
            delta: self.delta,
            eps: self.eps,
            grid_n: self.grid_n,
            seed: self.seed,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn profile(c: &Common) -> Result<i32> {
    let cfg = c.load()?;
    let ends = cfg.end_states()?;
    let p = solve_profile_default(&cfg.gas, &ends)?;
    let g = verify_gaussian_bounds(&p);
    fs::create_dir_all(&cfg.out_dir)?;
    p.write_table(fs::File::create(cfg.out_dir.join("profile.tsv"))?)?;
    println!("residual\t{:.3e}", p.residual);
    println!("newton_iterations\t{}", p.newton_iterations);
    println!("gauss_c1\t{:.6}", g.c1);
    println!("gauss_c2\t{:.6}", g.c2);
    Ok(0)
}

fn identities(c: &Common) -> Result<i32> {
    let cfg = c.load()?;
    let rep = identity_suite(&cfg.gas, &cfg.end_states()?, cfg.seed, cwave::harness::identities::SAMPLES)?;
    print!("{}", rep.render());
    Ok(if rep.all_pass() { 0 } else { 1 })
}

fn simulate(c: &Common) -> i32 {
    let res = c.load().and_then(|cfg| run_experiment(&cfg));
    match &res {
        Ok(RunReport::Identities(r)) => print!("{}", r.render()),
        Ok(RunReport::Simulation(s)) => {
            print!("{}", s.verdict.render());
            if let Some(p) = &s.poincare {
                println!(
                    "poincare\tsup {:.4e}  variation {:.4}  heat {:.4}",
                    p.sup_ratio, p.variation, p.heat_ratio_max
                );
            }
            println!("steps\t{}  rejections {}", s.steps, s.rejections);
            println!("artifacts\t{}", s.out_dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&res)
}

fn fit(c: &Common, ledger: Option<PathBuf>, t_lo: Option<f64>, t_hi: Option<f64>) -> Result<i32> {
    let path = match ledger {
        Some(p) => p,
        None => c.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("ledger.tsv"),
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let (series, ledger_mode) = DecaySeries::parse_tsv(&text)?;
    let mode = c
        .mode
        .map(Into::into)
        .or(ledger_mode)
        .ok_or_else(|| Error::Config("ledger has no mode line; pass --mode".into()))?;
    let window = match (t_lo, t_hi) {
        (None, None) => None,
        (lo, hi) => {
            let d = cwave::harness::verdict::default_window(series.t_end());
            Some((lo.unwrap_or(d.0), hi.unwrap_or(d.1)))
        }
    };
    let v = verify_theorem(&series, mode, window);
    print!("{}", v.render());
    Ok(if v.outcome == Outcome::Fail { 1 } else { 0 })
}

fn audit(c: &Common) -> Result<i32> {
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let rep = audit_run(&dir)?;
    print!("{}", rep.render());
    Ok(if rep.all_pass() { 0 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Simulate(c) => simulate(c),
        other => {
            let r = match other {
                Command::Profile(c) => profile(c),
                Command::Identities(c) => identities(c),
                Command::Fit { common, ledger, t_lo, t_hi } => fit(common, ledger.clone(), *t_lo, *t_hi),
                Command::Audit(c) => audit(c),
                Command::Simulate(_) => unreachable!(),
            };
            r.unwrap_or_else(|e| {
                eprintln!("error: {e}");
                error_code(&e)
            })
        }
    };
    ExitCode::from(code as u8)
}
