//! Exhaustive reference solver for small instances.
//!
//! Power is restricted to multiples of a lattice step and the schedule is found by
//! dynamic programming over (step, energy delivered so far). It shares nothing with the
//! sorted-fill solvers beyond the single-step tariff split, and exists to check them.

use super::{DispatchError, DispatchStrategy};
use crate::model::{segmented_step_cost, PowerProfile, SegmentSplit, SessionWindow};

/// Largest DP table the oracle will build.
pub const MAX_ORACLE_STATES: usize = 10_000_000;

pub fn oracle_dispatch(
    window: &SessionWindow,
    strategy: &DispatchStrategy,
    lattice_kw: f64,
) -> Result<PowerProfile, DispatchError> {
    if !(lattice_kw.is_finite() && lattice_kw > 0.0) {
        return Err(DispatchError::Oracle(format!("invalid lattice {lattice_kw} kW")));
    }
    let n = window.len();
    let dt = window.grid.step_hours;
    let unit_kwh = lattice_kw * dt;
    let target = (window.energy_kwh / unit_kwh).round();
    if (target * unit_kwh - window.energy_kwh).abs() > 1e-9 {
        return Err(DispatchError::Oracle(format!(
            "demand {} kWh is not a multiple of {} kWh",
            window.energy_kwh, unit_kwh
        )));
    }
    let target = target as usize;
    let states = (n + 1) * (target + 1);
    if states > MAX_ORACLE_STATES {
        return Err(DispatchError::Oracle(format!(
            "{states} states exceeds the limit of {MAX_ORACLE_STATES}"
        )));
    }

    let tariff_cap = strategy.tariff().map_or(f64::INFINITY, |t| t.capacity_kw());
    let max_level: Vec<usize> = (0..n)
        .map(|i| {
            let cap = window.power_cap_kw(i).min(tariff_cap);
            (cap / lattice_kw + 1e-9).floor() as usize
        })
        .collect();
    let step_prices = match strategy.prices() {
        Some(p) => Some(p.step_prices(&window.grid, window.first_step, n)?),
        None => None,
    };

    // cost of drawing k lattice units at step i, having delivered `before` units already
    let step_cost = |i: usize, before: usize, k: usize| -> Result<f64, DispatchError> {
        let p = k as f64 * lattice_kw;
        Ok(match strategy {
            DispatchStrategy::Unoptimized => -(((before + k) as f64) * unit_kwh),
            _ => {
                let energy = step_prices.as_ref().map_or(0.0, |sp| sp[i] * p * dt);
                let network = match strategy.tariff() {
                    Some(t) => segmented_step_cost(p.min(t.capacity_kw()), t, dt)?.cost_eur,
                    None => 0.0,
                };
                energy + network
            }
        })
    };

    // value[i][d]: best cost of steps i.. given d units delivered before step i
    let width = target + 1;
    let mut value = vec![f64::INFINITY; (n + 1) * width];
    let mut choice = vec![0usize; n * width];
    value[n * width + target] = 0.0;
    for i in (0..n).rev() {
        for d in 0..=target {
            let mut best = f64::INFINITY;
            let mut best_k = 0;
            for k in 0..=max_level[i].min(target - d) {
                let rest = value[(i + 1) * width + d + k];
                if !rest.is_finite() {
                    continue;
                }
                let v = step_cost(i, d, k)? + rest;
                if v < best - 1e-12 {
                    best = v;
                    best_k = k;
                }
            }
            value[i * width + d] = best;
            choice[i * width + d] = best_k;
        }
    }
    if !value[0].is_finite() {
        return Err(DispatchError::Infeasible {
            session_id: window.session_id.clone(),
            shortfall_kwh: window.energy_kwh,
        });
    }

    let mut profile = PowerProfile::zeros_for(window);
    let mut d = 0;
    for i in 0..n {
        let k = choice[i * width + d];
        profile.power_kw[i] = k as f64 * lattice_kw;
        d += k;
    }
    if let Some(t) = strategy.tariff() {
        let mut values_kw = Vec::with_capacity(n * t.n_segments());
        for &p in &profile.power_kw {
            values_kw.extend(segmented_step_cost(p, t, dt)?.segment_power_kw);
        }
        profile.segment_power_kw = Some(SegmentSplit {
            n_segments: t.n_segments(),
            values_kw,
        });
    }
    Ok(profile)
}
