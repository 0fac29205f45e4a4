//! Offline oracles, regret bounds and the experiment runner.

pub mod bounds;
pub mod oracle;
pub mod runner;
pub mod validate;

pub use bounds::{bound_table, BoundEntry, BoundTable};
pub use oracle::{oracle_bruteforce, oracle_partition_lowerbound, oracle_sum};
pub use runner::{
    run_experiment, run_on_trace, Accounting, ExperimentConfig, PolicyKind, RegretRecord,
};
