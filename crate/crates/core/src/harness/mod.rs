//! Configuration, decay fits, theorem verdicts and the experiment pipeline.

pub mod audit;
pub mod config;
pub mod fit;
pub mod identities;
pub mod run;
pub mod verdict;

pub use audit::{audit_run, AuditReport};
pub use config::{domain_rule, zero_mass_default, ExperimentConfig, Overrides};
pub use fit::{fit_power, fit_power_fixed_q, fit_power_log, DecayFit};
pub use identities::{identity_suite, IdentityReport};
pub use run::{exit_code, run_experiment, RunReport, SimulationReport};
pub use verdict::{verify_theorem, DecaySeries, Outcome, VerdictReport};
