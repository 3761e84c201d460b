use serde::{Deserialize, Serialize};

use super::{SessionWindow, TimeGrid};

/// Per-band power drawn at each step, stored row-major (`step * n_segments + segment`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSplit {
    pub n_segments: usize,
    pub values_kw: Vec<f64>,
}

impl SegmentSplit {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values_kw[i * self.n_segments..(i + 1) * self.n_segments]
    }
}

/// Dispatch result for one session.
///
/// Power is stored for the session's window only, starting at absolute grid step
/// `first_step`; every other step of the grid is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub session_id: String,
    pub cp_id: String,
    pub grid: TimeGrid,
    pub first_step: usize,
    pub power_kw: Vec<f64>,
    pub segment_power_kw: Option<SegmentSplit>,
}

impl PowerProfile {
    pub fn zeros_for(window: &SessionWindow) -> Self {
        Self {
            session_id: window.session_id.clone(),
            cp_id: window.cp_id.clone(),
            grid: window.grid,
            first_step: window.first_step,
            power_kw: vec![0.0; window.len()],
            segment_power_kw: None,
        }
    }

    pub fn end_step(&self) -> usize {
        self.first_step + self.power_kw.len()
    }

    /// Power at absolute grid step `t`.
    pub fn power_at(&self, t: usize) -> f64 {
        t.checked_sub(self.first_step)
            .and_then(|i| self.power_kw.get(i).copied())
            .unwrap_or(0.0)
    }

    pub fn delivered_kwh(&self) -> f64 {
        self.power_kw.iter().sum::<f64>() * self.grid.step_hours
    }

    /// Energy delivered by the end of each local step.
    pub fn cumulative_kwh(&self) -> Vec<f64> {
        let dt = self.grid.step_hours;
        self.power_kw
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p * dt;
                Some(*acc)
            })
            .collect()
    }

    pub fn peak_kw(&self) -> f64 {
        self.power_kw.iter().copied().fold(0.0, f64::max)
    }

    /// Full-horizon power series.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_steps];
        self.add_into(&mut out);
        out
    }

    /// Adds this profile onto a full-horizon series.
    pub fn add_into(&self, series: &mut [f64]) {
        for (dst, p) in series[self.first_step..self.end_step()]
            .iter_mut()
            .zip(&self.power_kw)
        {
            *dst += p;
        }
    }

    /// Checks power bounds, energy delivery and the band decomposition against `window`.
    pub fn check_against(&self, window: &SessionWindow, energy_tol_kwh: f64) -> Result<(), String> {
        if self.first_step != window.first_step || self.power_kw.len() != window.len() {
            return Err("profile does not span the session window".into());
        }
        for (i, p) in self.power_kw.iter().enumerate() {
            let cap = window.power_cap_kw(i);
            if *p < 0.0 || *p > cap + 1e-9 {
                return Err(format!("step {i}: power {p} outside [0, {cap}]"));
            }
        }
        let delivered = self.delivered_kwh();
        if (delivered - window.energy_kwh).abs() > energy_tol_kwh {
            return Err(format!(
                "delivered {delivered} kWh, demanded {} kWh",
                window.energy_kwh
            ));
        }
        if let Some(split) = &self.segment_power_kw {
            for (i, p) in self.power_kw.iter().enumerate() {
                let sum: f64 = split.row(i).iter().sum();
                if (sum - p).abs() > 1e-9 {
                    return Err(format!("step {i}: bands sum to {sum}, power is {p}"));
                }
            }
        }
        Ok(())
    }
}
