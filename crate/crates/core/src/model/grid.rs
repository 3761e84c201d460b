use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::ModelError;

const MS_PER_HOUR: f64 = 3_600_000.0;

/// Uniform simulation grid. Step `t` covers `[start + t*step, start + (t+1)*step)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: DateTime<Utc>,
    pub step_hours: f64,
    pub n_steps: usize,
}

/// Builds a grid covering `[start, end)`. The horizon must be an integer number of steps.
pub fn make_time_grid(
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    step_hours: f64,
) -> Result<TimeGrid, ModelError> {
    if !(step_hours.is_finite() && step_hours > 0.0) {
        return Err(ModelError::Config(format!(
            "step must be positive, got {step_hours} h"
        )));
    }
    if end <= start {
        return Err(ModelError::Config(format!(
            "grid end {end} is not after start {start}"
        )));
    }
    let step_ms = step_hours * MS_PER_HOUR;
    if (step_ms - step_ms.round()).abs() > 1e-6 {
        return Err(ModelError::Config(format!(
            "step of {step_hours} h is not a whole number of milliseconds"
        )));
    }
    let horizon_h = (end - start).num_milliseconds() as f64 / MS_PER_HOUR;
    let n = horizon_h / step_hours;
    let n_round = n.round();
    if (n - n_round).abs() * step_hours > 1e-9 || n_round < 1.0 {
        return Err(ModelError::Config(format!(
            "horizon of {horizon_h} h is not divisible by step {step_hours} h"
        )));
    }
    Ok(TimeGrid {
        start,
        step_hours,
        n_steps: n_round as usize,
    })
}

impl TimeGrid {
    pub fn step_ms(&self) -> i64 {
        (self.step_hours * MS_PER_HOUR).round() as i64
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.step_start(self.n_steps)
    }

    pub fn horizon_hours(&self) -> f64 {
        self.n_steps as f64 * self.step_hours
    }

    /// Start instant of step `t`. `t == n_steps` yields the horizon end.
    pub fn step_start(&self, t: usize) -> DateTime<Utc> {
        self.start + Duration::milliseconds(self.step_ms() * t as i64)
    }

    /// Index of the step containing `instant`, or `None` outside the horizon.
    pub fn step_of(&self, instant: DateTime<Utc>) -> Option<usize> {
        let offset = (instant - self.start).num_milliseconds();
        if offset < 0 {
            return None;
        }
        let t = (offset / self.step_ms()) as usize;
        (t < self.n_steps).then_some(t)
    }

    /// Milliseconds from grid start to `instant` (negative before the start).
    pub(crate) fn offset_ms(&self, instant: DateTime<Utc>) -> i64 {
        (instant - self.start).num_milliseconds()
    }

    /// True when two grids index the same instants.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.start == other.start && self.step_ms() == other.step_ms() && self.n_steps == other.n_steps
    }

    /// Steps per hour when the step divides an hour evenly.
    pub fn steps_per_hour(&self) -> Option<usize> {
        let ms = self.step_ms();
        (3_600_000 % ms == 0).then(|| (3_600_000 / ms) as usize)
    }
}
