//! Gronwall and growth checkers, closed-form oracles and the scenario runner.

mod gronwall;
mod growth;
mod oracle;
mod scenario;

pub use gronwall::{
    check_gronwall, gen_gronwall_instance, gen_gronwall_instance_on, gronwall_envelope, GridFunction, GronwallProfile,
    GronwallReport, GRONWALL_CELLS,
};
pub use growth::{check_growth, GrowthReport};
pub use oracle::{characteristic_root, random_history, random_kernel};
pub use scenario::{
    gronwall_suite, run_scenario, GapNorm, GapRow, GronwallRow, GrowthRow, ReportBundle, Sampling, ScenarioConfig,
    SpecialRow, Suite, SuiteResult, Tolerances,
};
