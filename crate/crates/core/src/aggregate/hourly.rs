use chrono::Timelike;
use serde::{Deserialize, Serialize};

use super::{AggregateError, AggregateProfile};
use crate::model::quantile_sorted;

/// Distribution across days of the per-CP power in each hour of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileProfile {
    pub quantile_levels: Vec<f64>,
    /// `values_kw[hour][k]` is the `quantile_levels[k]` quantile for that hour.
    pub values_kw: Vec<Vec<f64>>,
    pub max_kw: Vec<f64>,
}

/// Hour-of-day quantiles of the hourly mean power per charging point, taken over all days.
pub fn quantile_by_hour(
    agg: &AggregateProfile,
    quantile_levels: &[f64],
) -> Result<QuantileProfile, AggregateError> {
    if let Some(q) = quantile_levels.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(AggregateError::Study(format!("quantile level {q} outside [0, 1]")));
    }
    let grid = &agg.grid;
    let per_hour = grid
        .steps_per_hour()
        .ok_or_else(|| AggregateError::Horizon("a step that divides one hour".into()))?;
    let start = grid.start;
    if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
        return Err(AggregateError::Horizon("a grid starting on the hour".into()));
    }
    let steps_per_day = 24 * per_hour;
    if !grid.n_steps.is_multiple_of(steps_per_day) {
        return Err(AggregateError::Horizon(format!(
            "a whole number of days, got {} h",
            grid.horizon_hours()
        )));
    }
    let n_days = grid.n_steps / steps_per_day;
    let scale = 1.0 / agg.n_cps.max(1) as f64;
    let first_hour = start.hour() as usize;

    let mut by_hour: Vec<Vec<f64>> = (0..24).map(|_| Vec::with_capacity(n_days)).collect();
    for (k, chunk) in agg.power_kw.chunks_exact(per_hour).enumerate() {
        let mean = chunk.iter().sum::<f64>() / per_hour as f64;
        by_hour[(first_hour + k) % 24].push(mean * scale);
    }

    let mut values_kw = Vec::with_capacity(24);
    let mut max_kw = Vec::with_capacity(24);
    for mut samples in by_hour {
        samples.sort_by(f64::total_cmp);
        values_kw.push(
            quantile_levels
                .iter()
                .map(|&q| quantile_sorted(&samples, q))
                .collect(),
        );
        max_kw.push(*samples.last().expect("at least one day"));
    }
    Ok(QuantileProfile {
        quantile_levels: quantile_levels.to_vec(),
        values_kw,
        max_kw,
    })
}
