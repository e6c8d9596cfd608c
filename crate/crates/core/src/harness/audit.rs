//! Post-run audits read back from a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::{Mode, TOL_MASS};
use crate::error::{Error, Result};
use crate::harness::run::POINCARE_WINDOW;

/// Largest accepted relative change of the Poincaré ratio over the window.
pub const MAX_VARIATION: f64 = 0.2;
/// Relative conservation drift accepted by the audit.
pub const MAX_DRIFT: f64 = 1e-6;

/// Header and numeric rows of a tab-separated file with `#` comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::default();
        for line in text.lines() {
            if let Some(c) = line.strip_prefix('#') {
                t.comments.push(c.trim().to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if t.header.is_empty() {
                t.header = line.split('\t').map(str::to_string).collect();
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split('\t').map(str::parse::<f64>).collect();
            let row = row.map_err(|e| Error::InvalidArgument(format!("bad row `{line}`: {e}")))?;
            if row.len() != t.header.len() {
                return Err(Error::InvalidArgument(format!(
                    "row width {} != header width {}",
                    row.len(),
                    t.header.len()
                )));
            }
            t.rows.push(row);
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Value of a `# key = value` comment.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| c.strip_prefix(key)?.trim_start().strip_prefix('=').map(str::trim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditItem {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub mode: Mode,
    pub items: Vec<AuditItem>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn render(&self) -> String {
        let mut s = format!("mode\t{}\n", self.mode.as_str());
        for i in &self.items {
            let _ = writeln!(
                s,
                "{}\t{:.4e}\tlimit {:.1e}\t{}",
                i.name,
                i.value,
                i.limit,
                if i.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

fn item(name: impl Into<String>, value: f64, limit: f64, pass: bool) -> AuditItem {
    AuditItem { name: name.into(), value, limit, pass }
}

/// Conservation, mass and (zero-mass) Poincaré / heat-kernel audits of the
/// artifacts in `dir`.
pub fn audit_run(dir: &Path) -> Result<AuditReport> {
    let read = |f: &str| {
        fs::read_to_string(dir.join(f)).map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.join(f).display())))
    };
    let ledger = Table::parse(&read("ledger.tsv")?)?;
    let mode: Mode =
        ledger.meta("mode").ok_or_else(|| Error::InvalidArgument("ledger lacks its mode line".into()))?.parse()?;
    let mut items = Vec::new();

    for line in read("conservation.txt")?.lines() {
        let mut parts = line.split('\t');
        let (Some(name), Some(rel)) = (parts.next(), parts.next()) else { continue };
        let Some(nums) = rel.strip_prefix("relative ") else { continue };
        let worst = nums.split_whitespace().map(|x| x.parse::<f64>().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        items.push(item(format!("conservation drift ({name})"), worst, MAX_DRIFT, worst <= MAX_DRIFT));
    }

    let zeta = ledger.column("zeta_residual")?.into_iter().fold(0.0, f64::max);
    items.push(item("zeta identity residual (report)", zeta, f64::INFINITY, true));
    if mode == Mode::ZeroMass {
        let mut mass = 0.0_f64;
        for c in ["Phi_end", "Psi_end", "Wbar_end"] {
            mass = ledger.column(c)?.into_iter().fold(mass, |m, v| m.max(v.abs()));
        }
        items.push(item("right-end anti-derivatives", mass, TOL_MASS, mass <= TOL_MASS));

        let p = Table::parse(&read("poincare.tsv")?)?;
        let t = p.column("t")?;
        let ratio = p.column("ratio")?;
        let (hl, hr) = (p.column("heat_lhs")?, p.column("heat_rhs")?);
        let sup = ratio.iter().cloned().fold(0.0, f64::max);
        items.push(item("Poincare ratio sup", sup, f64::INFINITY, sup.is_finite()));
        let t_end = t.last().cloned().unwrap_or(0.0);
        let (lo, hi) = (POINCARE_WINDOW.0, POINCARE_WINDOW.1.min(t_end));
        let win: Vec<f64> = t.iter().zip(&ratio).filter(|(t, _)| **t >= lo && **t <= hi).map(|(_, r)| *r).collect();
        if win.len() >= 2 {
            let mx = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mn = win.iter().cloned().fold(f64::INFINITY, f64::min);
            let var = if mx > 0.0 { (mx - mn) / mx } else { 0.0 };
            items.push(item(
                format!("Poincare ratio variation on [{lo}, {hi}]"),
                var,
                MAX_VARIATION,
                var < MAX_VARIATION,
            ));
        } else {
            items.push(item("Poincare ratio variation (run too short, skipped)", f64::NAN, MAX_VARIATION, true));
        }
        let heat = hl.iter().zip(&hr).filter(|(_, r)| **r > 0.0).map(|(l, r)| l / r).fold(0.0, f64::max);
        items.push(item("heat-kernel lemma lhs/rhs", heat, 1.0, heat <= 1.0));
    }
    Ok(AuditReport { mode, items })
}
