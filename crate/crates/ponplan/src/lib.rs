//! Techno-economic migration planning for access networks.
//!
//! Given a starting technology, a graph of allowed migrations, cost and
//! tariff datasets and a stochastic subscriber-churn model, the engine
//! finds the migration plan (which technology to adopt in which year) that
//! maximizes the expected Net Present Value over the network life-cycle.
//! The search is an Expectimax tree of maximizer, chance and terminal
//! nodes over (year, technology, churn outcome) states; a memoized
//! evaluator computes the same plan without materializing the tree, and an
//! exhaustive policy-enumeration oracle verifies both on small instances.

pub mod economics;
pub mod error;
pub mod expectimax;
pub mod model;
pub mod oracle;
pub mod scenario_io;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::EngineError;
pub use expectimax::{
    build_tree, evaluate, evaluate_memoized, Action, MigrationStep, Node, NodeKind, PlanResult,
    Policy,
};
pub use model::{goal_set, validate_scenario, ScenarioConfig, Violation, ViolationCode};
pub use oracle::{oracle_best, OracleLimits, OracleOutcome};
pub use scenario_io::{load_scenario, write_result, LoadError, OutputFormat};
