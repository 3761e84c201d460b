//! Session and price ingestion, scenario files, synthetic data, and result tables.

mod prices;
mod results;
mod scenario;
mod sessions;
mod synthetic;

use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use thiserror::Error;

use crate::model::ModelError;

pub use prices::{load_prices, read_prices, write_prices, PriceUnit};
pub use results::{
    read_cost_table, read_peak_study, read_quantile_profile, write_results, ResultFormat,
    ResultRef, SessionCostRow,
};
pub use scenario::{
    GridSpec, PriceSource, PriceSpec, ScenarioConfig, SessionSource, StudySpec, TariffSpec,
    PRESET_ALIASES,
};
pub use sessions::{load_sessions, read_sessions, write_sessions, RejectReason, RejectedRow, SessionLoad};
pub use synthetic::{
    generate_synthetic_fleet, generate_synthetic_prices, ArrivalMode, PowerChoice,
    SyntheticFleetParams, SyntheticPriceParams,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("prices: {0}")]
    Prices(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("synthetic generator: {0}")]
    Synthetic(String),
    #[error("result table: {0}")]
    Results(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses an ISO-8601 UTC timestamp; a missing offset is read as UTC.
pub fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|t| t.and_utc())
}

pub fn format_utc(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Column positions for `wanted` in a CSV header, or the list of absent names.
pub(crate) fn column_index(
    headers: &csv::StringRecord,
    wanted: &[&str],
) -> Result<Vec<usize>, DataError> {
    let mut missing = Vec::new();
    let idx = wanted
        .iter()
        .map(|w| {
            headers.iter().position(|h| h.trim() == *w).unwrap_or_else(|| {
                missing.push(w.to_string());
                usize::MAX
            })
        })
        .collect();
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(DataError::MissingColumns(missing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn timestamps_parse_with_and_without_offset() {
        let want = Utc.with_ymd_and_hms(2022, 3, 1, 8, 0, 0).unwrap();
        assert_eq!(parse_utc("2022-03-01T08:00:00Z"), Some(want));
        assert_eq!(parse_utc("2022-03-01T09:00:00+01:00"), Some(want));
        assert_eq!(parse_utc("2022-03-01 08:00:00"), Some(want));
        assert_eq!(parse_utc("yesterday"), None);
        assert_eq!(format_utc(want), "2022-03-01T08:00:00Z");
    }
}
