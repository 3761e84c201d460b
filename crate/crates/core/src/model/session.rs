use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ModelError, TimeGrid};

/// One charging transaction as recorded by the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub session_id: String,
    pub cp_id: String,
    pub arrival: DateTime<Utc>,
    pub departure: DateTime<Utc>,
    pub max_power_kw: f64,
    pub energy_kwh: f64,
}

impl ChargingSession {
    pub fn duration_hours(&self) -> f64 {
        (self.departure - self.arrival).num_milliseconds() as f64 / 3_600_000.0
    }

    /// Energy the vehicle could take at full power over the whole connection.
    pub fn deliverable_kwh(&self) -> f64 {
        self.max_power_kw * self.duration_hours()
    }
}

/// Emitted when a session's demanded energy exceeds what its window can deliver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub session_id: String,
    pub requested_kwh: f64,
    pub delivered_kwh: f64,
}

/// A session discretized onto a [`TimeGrid`].
///
/// `availability` is stored for `first_step..=last_step` only; every step outside that
/// range has zero availability. Boundary steps carry the connected fraction of the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionWindow {
    pub session_id: String,
    pub cp_id: String,
    pub grid: TimeGrid,
    pub first_step: usize,
    pub availability: Vec<f64>,
    pub max_power_kw: f64,
    /// Demanded energy after clipping to the window's capacity.
    pub energy_kwh: f64,
}

impl SessionWindow {
    pub fn last_step(&self) -> usize {
        self.first_step + self.availability.len() - 1
    }

    pub fn len(&self) -> usize {
        self.availability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.availability.is_empty()
    }

    /// Availability at absolute grid step `t`.
    pub fn availability_at(&self, t: usize) -> f64 {
        t.checked_sub(self.first_step)
            .and_then(|i| self.availability.get(i).copied())
            .unwrap_or(0.0)
    }

    /// Upper bound on power at local step `i`.
    pub fn power_cap_kw(&self, i: usize) -> f64 {
        self.max_power_kw * self.availability[i]
    }

    pub fn connected_hours(&self) -> f64 {
        self.availability.iter().sum::<f64>() * self.grid.step_hours
    }

    pub fn deliverable_kwh(&self) -> f64 {
        self.max_power_kw * self.connected_hours()
    }
}

/// Maps a session onto the grid and clips its energy to what the window can deliver.
pub fn validate_session(
    session: &ChargingSession,
    grid: &TimeGrid,
) -> Result<(SessionWindow, Option<ClipReport>), ModelError> {
    let bad = |reason: &str| ModelError::InvalidSession {
        session_id: session.session_id.clone(),
        reason: reason.to_string(),
    };
    if session.departure <= session.arrival {
        return Err(bad("non-positive duration"));
    }
    if !(session.max_power_kw.is_finite() && session.max_power_kw > 0.0) {
        return Err(bad("non-positive max power"));
    }
    if !(session.energy_kwh.is_finite() && session.energy_kwh > 0.0) {
        return Err(bad("non-positive energy"));
    }

    let step_ms = grid.step_ms();
    let horizon_ms = step_ms * grid.n_steps as i64;
    let arr = grid.offset_ms(session.arrival).max(0);
    let dep = grid.offset_ms(session.departure).min(horizon_ms);
    if dep <= arr {
        return Err(bad("no overlap with grid horizon"));
    }

    let first = arr / step_ms;
    // last step touched by the half-open interval [arr, dep)
    let last = (dep - 1) / step_ms;
    let availability = (first..=last)
        .map(|t| {
            let lo = (t * step_ms).max(arr);
            let hi = ((t + 1) * step_ms).min(dep);
            if hi - lo == step_ms {
                1.0
            } else {
                (hi - lo) as f64 / step_ms as f64
            }
        })
        .collect();

    let mut window = SessionWindow {
        session_id: session.session_id.clone(),
        cp_id: session.cp_id.clone(),
        grid: *grid,
        first_step: first as usize,
        availability,
        max_power_kw: session.max_power_kw,
        energy_kwh: session.energy_kwh,
    };

    let deliverable = window.deliverable_kwh();
    let clip = (session.energy_kwh > deliverable).then(|| {
        window.energy_kwh = deliverable;
        ClipReport {
            session_id: session.session_id.clone(),
            requested_kwh: session.energy_kwh,
            delivered_kwh: deliverable,
        }
    });
    Ok((window, clip))
}
