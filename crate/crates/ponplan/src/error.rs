//! Engine error type shared by the economics, search and oracle modules.

use std::fmt;

use crate::model::SubscriberClass;

/// Errors raised by engine operations on already-validated scenarios.
///
/// Data-shape problems in scenario *inputs* are reported as
/// [`crate::model::Violation`]s by the validator instead; these errors cover
/// conditions that only surface while computing.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    /// A demanded subscriber class has no tariff entry at the offered rate.
    TariffMissing { class: SubscriberClass, rate: u32 },
    /// A technology in the graph has no record in the cost dataset.
    CostMissing { technology: String },
    /// The penetration curve does not cover a year the computation needs.
    CurveMissingYear { year: i32 },
    /// No technology in the goal set is reachable from the start technology
    /// within the migration window.
    GoalUnreachable { reason: String },
    /// The naive search tree would exceed the configured node cap.
    TreeTooLarge { estimated: u128, cap: u64 },
    /// The instance exceeds the oracle's exhaustive-enumeration bounds.
    InstanceTooLarge { reason: String },
    /// A tree handed to the evaluator is malformed or was never evaluated.
    Unevaluated { reason: String },
}

impl EngineError {
    /// Stable machine-readable code for CLI diagnostics and tests.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::TariffMissing { .. } => "TARIFF_MISSING",
            EngineError::CostMissing { .. } => "COST_MISSING",
            EngineError::CurveMissingYear { .. } => "CURVE_MISSING_YEAR",
            EngineError::GoalUnreachable { .. } => "GOAL_UNREACHABLE",
            EngineError::TreeTooLarge { .. } => "TREE_TOO_LARGE",
            EngineError::InstanceTooLarge { .. } => "INSTANCE_TOO_LARGE",
            EngineError::Unevaluated { .. } => "UNEVALUATED",
        }
    }
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::TariffMissing { class, rate } => {
                write!(f, "no tariff entry for {class} at {rate} Mbps")
            }
            EngineError::CostMissing { technology } => {
                write!(f, "no cost record for technology {technology}")
            }
            EngineError::CurveMissingYear { year } => {
                write!(f, "penetration curve has no value for year {year}")
            }
            EngineError::GoalUnreachable { reason } => {
                write!(f, "goal unreachable: {reason}")
            }
            EngineError::TreeTooLarge { estimated, cap } => {
                write!(
                    f,
                    "search tree would hold {estimated} nodes, above the cap of {cap}; \
                     use the memoized evaluator"
                )
            }
            EngineError::InstanceTooLarge { reason } => {
                write!(f, "instance too large for exhaustive oracle: {reason}")
            }
            EngineError::Unevaluated { reason } => write!(f, "malformed tree: {reason}"),
        }
    }
}

impl std::error::Error for EngineError {}
