//! Per-session charging schedules for the four pricing regimes.

mod cost;
mod greedy;
pub mod oracle;
mod strategy;

use thiserror::Error;

use crate::model::ModelError;

pub use cost::{evaluate_cost, objective_value, CostBreakdown};
pub use greedy::{
    dispatch, dispatch_dynamic, dispatch_segmented_dynamic, dispatch_segmented_flat,
    dispatch_unoptimized,
};
pub use oracle::oracle_dispatch;
pub use strategy::{DispatchStrategy, StrategyTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error("session {session_id}: {shortfall_kwh} kWh cannot be delivered")]
    Infeasible {
        session_id: String,
        shortfall_kwh: f64,
    },
    #[error("oracle: {0}")]
    Oracle(String),
}
