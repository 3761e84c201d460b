//! Fleet-level load: aggregation, hour-of-day distributions, and the peak study.

mod hourly;
mod peak;
mod sampling;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::DispatchError;
use crate::model::{PowerProfile, TimeGrid, CP_CAPACITY_KW};

pub use hourly::{quantile_by_hour, QuantileProfile};
pub use peak::{
    cp_load_profiles, peak_study, peak_study_from_loads, CpFleet, CpLoads, LevelResult,
    PeakStudyResult, StudyParams, SummaryPoint, DEFAULT_SUMMARY_QUANTILES,
};
pub use sampling::{derive_child_seed, sample_fleet};
pub(crate) use sampling::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("profile for session {session_id} is on a different grid")]
    GridMismatch { session_id: String },
    #[error("cannot sample {requested} charging points from a population of {population}")]
    SampleTooLarge { requested: usize, population: usize },
    #[error("diversity factor undefined: {0}")]
    UndefinedDiversity(String),
    #[error("invalid study parameters: {0}")]
    Study(String),
    #[error("hour-of-day profile needs {0}")]
    Horizon(String),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// Summed power of a set of charging points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateProfile {
    pub grid: TimeGrid,
    pub n_cps: usize,
    pub power_kw: Vec<f64>,
}

impl AggregateProfile {
    pub fn zeros(grid: &TimeGrid, n_cps: usize) -> Self {
        Self {
            grid: *grid,
            n_cps,
            power_kw: vec![0.0; grid.n_steps],
        }
    }

    pub fn peak_kw(&self) -> f64 {
        self.power_kw.iter().copied().fold(0.0, f64::max)
    }

    /// Annual peak divided by the number of charging points.
    pub fn peak_per_cp_kw(&self) -> f64 {
        self.peak_kw() / self.n_cps.max(1) as f64
    }
}

/// Element-wise sum of session profiles; `n_cps` counts distinct charging points.
pub fn aggregate_profiles<'a, I>(profiles: I, grid: &TimeGrid) -> Result<AggregateProfile, AggregateError>
where
    I: IntoIterator<Item = &'a PowerProfile>,
{
    let mut agg = AggregateProfile::zeros(grid, 0);
    let mut cps = BTreeSet::new();
    for p in profiles {
        if !p.grid.same_as(grid) {
            return Err(AggregateError::GridMismatch {
                session_id: p.session_id.clone(),
            });
        }
        p.add_into(&mut agg.power_kw);
        cps.insert(p.cp_id.as_str());
    }
    agg.n_cps = cps.len();
    Ok(agg)
}

/// Ratio of a single connection's capacity to the observed peak per charging point.
pub fn diversity_factor(agg: &AggregateProfile) -> Result<f64, AggregateError> {
    if agg.n_cps == 0 {
        return Err(AggregateError::UndefinedDiversity("no charging points".into()));
    }
    let per_cp = agg.peak_per_cp_kw();
    if per_cp <= 0.0 {
        return Err(AggregateError::UndefinedDiversity("aggregate load is zero".into()));
    }
    Ok(diversity_from_peak(per_cp))
}

pub(crate) fn diversity_from_peak(max_per_cp_kw: f64) -> f64 {
    CP_CAPACITY_KW / max_per_cp_kw
}
