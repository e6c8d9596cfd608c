//! Decay-rate verdicts for the nonzero- and zero-mass theorems.

use std::fmt::Write as _;

use crate::diagnostics::{EnergyLedger, Mode};
use crate::error::{Error, Result};
use crate::harness::audit::Table;
use crate::harness::fit::{fit_power, fit_power_fixed_q, fit_power_log, DecayFit};

/// Half-width of the acceptance band around each target exponent.
pub const BAND: f64 = 0.15;
/// Ledger must reach this time to support a verdict.
pub const MIN_SPAN: f64 = 500.0;
pub const MIN_ROWS: usize = 40;

/// The three norms fitted per run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecaySeries {
    pub t: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub linf: Vec<f64>,
}

impl DecaySeries {
    pub fn from_ledger(ledger: &EnergyLedger) -> Self {
        let mut s = Self::default();
        for r in &ledger.rows {
            s.t.push(r.t);
            s.l2.push(r.l2);
            s.h1.push(r.h1);
            s.linf.push(r.linf);
        }
        s
    }

    /// Reads the `t`, `l2`, `h1`, `linf` columns and the mode line of a ledger file.
    pub fn parse_tsv(text: &str) -> Result<(Self, Option<Mode>)> {
        let t = Table::parse(text)?;
        if t.header.is_empty() {
            return Err(Error::InvalidArgument("ledger has no header".into()));
        }
        let mode = t.meta("mode").map(str::parse).transpose()?;
        let s = Self { t: t.column("t")?, l2: t.column("l2")?, h1: t.column("h1")?, linf: t.column("linf")? };
        Ok((s, mode))
    }

    pub fn pairs(&self, which: usize) -> Vec<(f64, f64)> {
        let y = [&self.l2, &self.h1, &self.linf][which];
        self.t.iter().cloned().zip(y.iter().cloned()).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.t.last().cloned().unwrap_or(0.0)
    }
}

pub const SERIES_NAMES: [&str; 3] = ["l2", "h1", "linf"];

/// Target `(p, q)` per series.
pub fn targets(mode: Mode) -> [(f64, f64); 3] {
    match mode {
        Mode::NonzeroMass => [(0.25, 0.0), (0.75, 0.0), (0.5, 0.0)],
        Mode::ZeroMass => [(0.5, 0.5), (1.0, 0.5), (0.75, 0.5)],
    }
}

/// Default window `[max(10, t_end/20), t_end]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    ((t_end / 20.0).max(10.0), t_end)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesVerdict {
    pub name: &'static str,
    pub target_p: f64,
    pub target_q: f64,
    pub power: DecayFit,
    /// `q` pinned at the target value.
    pub log_model: DecayFit,
    /// Both exponents free; for information, refused when ill-conditioned.
    pub free: std::result::Result<DecayFit, String>,
    /// Exponent compared with the band.
    pub p: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictReport {
    pub mode: Mode,
    pub window: (f64, f64),
    pub series: Vec<SeriesVerdict>,
    /// Log-corrected model fits the L² series strictly better.
    pub log_preferred: bool,
    pub outcome: Outcome,
    pub note: String,
}

impl VerdictReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode\t{}", self.mode.as_str());
        let _ = writeln!(s, "window\t[{:.4}, {:.4}]", self.window.0, self.window.1);
        for v in &self.series {
            let _ = writeln!(s, "series\t{}", v.name);
            let _ = writeln!(s, "  target\tp = {:.4}  q = {:.4}", v.target_p, v.target_q);
            let f = &v.power;
            let _ = writeln!(
                s,
                "  power\tp = {:.6}  ln C = {:.6}  residual = {:.4e}  samples = {}",
                f.p, f.intercept, f.residual, f.samples
            );
            let f = &v.log_model;
            let _ = writeln!(
                s,
                "  log\tp = {:.6}  q = {:.3}  ln C = {:.6}  residual = {:.4e}",
                f.p, f.q, f.intercept, f.residual
            );
            match &v.free {
                Ok(f) => {
                    let _ = writeln!(s, "  free\tp = {:.6}  q = {:.6}  cond = {:.3e}", f.p, f.q, f.cond);
                }
                Err(e) => {
                    let _ = writeln!(s, "  free\t{e}");
                }
            }
            let _ = writeln!(
                s,
                "  band\t|{:.6} - {:.4}| <= {:.2}: {}",
                v.p,
                v.target_p,
                BAND,
                if v.within_band { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s, "log_model_preferred\t{}", self.log_preferred);
        let _ = writeln!(s, "verdict\t{}", self.outcome.as_str());
        if !self.note.is_empty() {
            let _ = writeln!(s, "note\t{}", self.note);
        }
        s
    }
}

fn inconclusive(mode: Mode, window: (f64, f64), note: String) -> VerdictReport {
    VerdictReport { mode, window, series: Vec::new(), log_preferred: false, outcome: Outcome::Inconclusive, note }
}

/// Nonzero mass: pure power fits, pass iff every `p` is in band and the
/// log-corrected model is not preferred. Zero mass: `p` from the model
/// with `q = 1/2`, pass iff every `p` is in band and that model beats the
/// pure power law on the L² series.
pub fn verify_theorem(series: &DecaySeries, mode: Mode, window: Option<(f64, f64)>) -> VerdictReport {
    let win = window.unwrap_or_else(|| default_window(series.t_end()));
    if series.t_end() < MIN_SPAN || series.t.len() < MIN_ROWS {
        return inconclusive(
            mode,
            win,
            format!(
                "ledger spans t <= {} with {} rows; need t >= {MIN_SPAN} and {MIN_ROWS} rows",
                series.t_end(),
                series.t.len()
            ),
        );
    }
    let tg = targets(mode);
    let mut out = Vec::new();
    for k in 0..3 {
        let pts = series.pairs(k);
        let (power, log_model) = match (fit_power(&pts, win), fit_power_fixed_q(&pts, win, 0.5)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return inconclusive(mode, win, format!("{}: {e}", SERIES_NAMES[k])),
        };
        let free = fit_power_log(&pts, win).map_err(|e| e.to_string());
        let p = match mode {
            Mode::NonzeroMass => power.p,
            Mode::ZeroMass => log_model.p,
        };
        out.push(SeriesVerdict {
            name: SERIES_NAMES[k],
            target_p: tg[k].0,
            target_q: tg[k].1,
            power,
            log_model,
            free,
            p,
            within_band: (p - tg[k].0).abs() <= BAND,
        });
    }
    let log_preferred = out[0].log_model.residual < out[0].power.residual;
    let bands = out.iter().all(|v| v.within_band);
    let pass = match mode {
        Mode::NonzeroMass => bands && !log_preferred,
        Mode::ZeroMass => bands && log_preferred,
    };
    VerdictReport {
        mode,
        window: win,
        series: out,
        log_preferred,
        outcome: if pass { Outcome::Pass } else { Outcome::Fail },
        note: String::new(),
    }
}
