//! Domain types shared by the dispatch, aggregation and I/O layers.

mod grid;
mod prices;
mod profile;
mod session;
mod tariff;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use grid::{make_time_grid, TimeGrid};
pub use prices::{derive_segment_price_from_quantile, quantile, quantile_sorted, PriceSeries};
pub use profile::{PowerProfile, SegmentSplit};
pub use session::{validate_session, ChargingSession, ClipReport, SessionWindow};
pub use tariff::{segmented_step_cost, SegmentedTariff, StepCost, CP_CAPACITY_KW};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("session {session_id}: {reason}")]
    InvalidSession { session_id: String, reason: String },
    #[error("invalid tariff: {0}")]
    InvalidTariff(String),
    #[error("invalid price series: {0}")]
    InvalidPrices(String),
    #[error("no price for {instant}")]
    PriceCoverage { instant: DateTime<Utc> },
    #[error("power {power_kw} kW outside tariff range [0, {capacity_kw}] kW")]
    PowerOutOfRange { power_kw: f64, capacity_kw: f64 },
}
