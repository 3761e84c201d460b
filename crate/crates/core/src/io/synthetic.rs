//! Deterministic stand-ins for the session log and the day-ahead price series.

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::aggregate::mix_seed;
use crate::model::{ChargingSession, PriceSeries, CP_CAPACITY_KW};

/// One component of the arrival mixture, with its own dwell-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalMode {
    pub weight: f64,
    pub arrival_mean_h: f64,
    pub arrival_sd_h: f64,
    pub duration_mean_h: f64,
    pub duration_sd_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerChoice {
    pub max_power_kw: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFleetParams {
    pub n_cps: usize,
    pub start: DateTime<Utc>,
    pub n_days: usize,
    /// Mean sessions per charging point over `n_days`.
    pub sessions_per_cp: f64,
    /// Each charging point's session count is scaled by a factor drawn from
    /// `[1 - spread, 1 + spread]`.
    pub popularity_spread: f64,
    pub arrival_modes: Vec<ArrivalMode>,
    pub min_duration_h: f64,
    pub max_duration_h: f64,
    pub energy_median_kwh: f64,
    pub energy_log_sd: f64,
    pub min_energy_kwh: f64,
    pub power_choices: Vec<PowerChoice>,
    pub seed: u64,
}

impl SyntheticFleetParams {
    /// Reference fleet used throughout the test suite: 300 charging points over 2022,
    /// about 45,000 sessions, seed 1.
    pub fn reference() -> Self {
        Self {
            n_cps: 300,
            start: Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            n_days: 365,
            sessions_per_cp: 150.0,
            popularity_spread: 0.4,
            arrival_modes: vec![
                // commuters parking at work
                ArrivalMode {
                    weight: 0.35,
                    arrival_mean_h: 8.5,
                    arrival_sd_h: 1.0,
                    duration_mean_h: 8.5,
                    duration_sd_h: 1.5,
                },
                // residents plugging in overnight
                ArrivalMode {
                    weight: 0.45,
                    arrival_mean_h: 18.0,
                    arrival_sd_h: 1.5,
                    duration_mean_h: 13.0,
                    duration_sd_h: 2.5,
                },
                // short daytime visits
                ArrivalMode {
                    weight: 0.20,
                    arrival_mean_h: 13.0,
                    arrival_sd_h: 3.0,
                    duration_mean_h: 2.5,
                    duration_sd_h: 1.5,
                },
            ],
            min_duration_h: 0.25,
            max_duration_h: 72.0,
            energy_median_kwh: 14.0,
            energy_log_sd: 0.55,
            min_energy_kwh: 0.5,
            power_choices: vec![
                PowerChoice { max_power_kw: 3.7, weight: 0.10 },
                PowerChoice { max_power_kw: 7.4, weight: 0.25 },
                PowerChoice { max_power_kw: 11.0, weight: 0.50 },
                PowerChoice { max_power_kw: 22.0, weight: 0.15 },
            ],
            seed: 1,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Synthetic(m));
        if self.n_cps == 0 || self.n_days == 0 {
            return bad("n_cps and n_days must be positive".into());
        }
        if !(self.sessions_per_cp > 0.0) {
            return bad("sessions_per_cp must be positive".into());
        }
        if !(0.0..1.0).contains(&self.popularity_spread) {
            return bad("popularity_spread must lie in [0, 1)".into());
        }
        if self.arrival_modes.is_empty() {
            return bad("no arrival modes".into());
        }
        for (i, m) in self.arrival_modes.iter().enumerate() {
            if !(m.weight > 0.0 && m.arrival_sd_h > 0.0 && m.duration_sd_h > 0.0 && m.duration_mean_h > 0.0) {
                return bad(format!("arrival mode {i} has a zero-width or non-positive distribution"));
            }
        }
        if !(self.min_duration_h > 0.0 && self.max_duration_h > self.min_duration_h) {
            return bad("duration bounds must satisfy 0 < min < max".into());
        }
        if !(self.energy_median_kwh > 0.0 && self.energy_log_sd > 0.0 && self.min_energy_kwh > 0.0) {
            return bad("energy distribution must have positive median, spread and floor".into());
        }
        if self.power_choices.is_empty()
            || self.power_choices.iter().any(|c| {
                !(c.weight > 0.0 && c.max_power_kw > 0.0 && c.max_power_kw <= CP_CAPACITY_KW)
            })
        {
            return bad(format!(
                "power choices must be non-empty with positive weights and powers in (0, {CP_CAPACITY_KW}] kW"
            ));
        }
        Ok(())
    }
}

struct Draft {
    arrival: DateTime<Utc>,
    departure: DateTime<Utc>,
    max_power_kw: f64,
    energy_draw_kwh: f64,
}

/// Generates a session log. Each charging point draws from its own seeded stream, so the
/// output is independent of thread count.
pub fn generate_synthetic_fleet(params: &SyntheticFleetParams) -> Result<Vec<ChargingSession>, DataError> {
    params.validate()?;
    let modes = WeightedIndex::new(params.arrival_modes.iter().map(|m| m.weight))
        .map_err(|e| DataError::Synthetic(e.to_string()))?;
    let powers = WeightedIndex::new(params.power_choices.iter().map(|c| c.weight))
        .map_err(|e| DataError::Synthetic(e.to_string()))?;
    let energy = LogNormal::new(params.energy_median_kwh.ln(), params.energy_log_sd)
        .map_err(|e| DataError::Synthetic(e.to_string()))?;
    let mode_dists = params
        .arrival_modes
        .iter()
        .map(|m| {
            Ok((
                Normal::new(m.arrival_mean_h, m.arrival_sd_h)?,
                Normal::new(m.duration_mean_h, m.duration_sd_h)?,
            ))
        })
        .collect::<Result<Vec<_>, rand_distr::NormalError>>()
        .map_err(|e| DataError::Synthetic(e.to_string()))?;

    let per_cp: Vec<Vec<ChargingSession>> = (0..params.n_cps)
        .into_par_iter()
        .map(|cp| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[params.seed, 0x5e55_1045, cp as u64]));
            let spread = params.popularity_spread;
            let popularity = 1.0 - spread + 2.0 * spread * rng.random::<f64>();
            let count = ((params.sessions_per_cp * popularity).round() as usize).clamp(1, params.n_days);
            let mut days = rand::seq::index::sample(&mut rng, params.n_days, count).into_vec();
            days.sort_unstable();

            let mut drafts: Vec<Draft> = Vec::with_capacity(count);
            for day in days {
                let (arr_dist, dur_dist) = &mode_dists[modes.sample(&mut rng)];
                let arrival_h = arr_dist.sample(&mut rng).rem_euclid(24.0);
                let duration_h = dur_dist
                    .sample(&mut rng)
                    .clamp(params.min_duration_h, params.max_duration_h);
                let max_power_kw = params.power_choices[powers.sample(&mut rng)].max_power_kw;
                let energy_draw_kwh = energy.sample(&mut rng).max(params.min_energy_kwh);

                let arrival = params.start
                    + Duration::days(day as i64)
                    + Duration::minutes((arrival_h * 60.0).round() as i64);
                let departure = arrival + Duration::minutes((duration_h * 60.0).round().max(1.0) as i64);
                if let Some(prev) = drafts.last_mut() {
                    if arrival < prev.departure {
                        // the earlier vehicle leaves when the next one plugs in
                        let kept = (arrival - prev.arrival).num_minutes() as f64 / 60.0;
                        if kept < params.min_duration_h {
                            continue;
                        }
                        prev.departure = arrival;
                    }
                }
                drafts.push(Draft {
                    arrival,
                    departure,
                    max_power_kw,
                    energy_draw_kwh,
                });
            }

            drafts
                .into_iter()
                .enumerate()
                .map(|(k, d)| {
                    let hours = (d.departure - d.arrival).num_minutes() as f64 / 60.0;
                    // metered to the Wh, never above what the connection could deliver
                    let cap_wh = (d.max_power_kw * hours * 1000.0).floor();
                    let energy_kwh = (d.energy_draw_kwh * 1000.0).round().min(cap_wh) / 1000.0;
                    ChargingSession {
                        session_id: format!("cp{cp:04}-{k:04}"),
                        cp_id: format!("cp{cp:04}"),
                        arrival: d.arrival,
                        departure: d.departure,
                        max_power_kw: d.max_power_kw,
                        energy_kwh,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_cp.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPriceParams {
    pub start: DateTime<Utc>,
    pub n_hours: usize,
    pub mean_eur_per_kwh: f64,
    /// Day-to-day persistence of the price level.
    pub daily_persistence: f64,
    pub daily_sd_eur_per_kwh: f64,
    pub hourly_noise_sd_eur_per_kwh: f64,
    pub floor_eur_per_kwh: f64,
    pub cap_eur_per_kwh: f64,
    pub seed: u64,
}

impl SyntheticPriceParams {
    /// Hourly series over 2022 with a volatility loosely resembling that year's Dutch
    /// day-ahead market.
    pub fn reference(seed: u64) -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            n_hours: 8760,
            mean_eur_per_kwh: 0.22,
            daily_persistence: 0.85,
            daily_sd_eur_per_kwh: 0.04,
            hourly_noise_sd_eur_per_kwh: 0.015,
            floor_eur_per_kwh: -0.05,
            cap_eur_per_kwh: 0.8,
            seed,
        }
    }
}

/// Relative price level per hour of day: night trough, morning ramp, solar dip, evening peak.
const HOURLY_SHAPE: [f64; 24] = [
    0.78, 0.74, 0.72, 0.70, 0.71, 0.76, 0.90, 1.08, 1.15, 1.06, 0.95, 0.88, 0.84, 0.82, 0.85,
    0.93, 1.06, 1.24, 1.32, 1.25, 1.12, 1.02, 0.94, 0.86,
];

pub fn generate_synthetic_prices(params: &SyntheticPriceParams) -> Result<PriceSeries, DataError> {
    if params.n_hours == 0 {
        return Err(DataError::Synthetic("n_hours must be positive".into()));
    }
    if !(0.0..1.0).contains(&params.daily_persistence) {
        return Err(DataError::Synthetic("daily_persistence must lie in [0, 1)".into()));
    }
    if !(params.cap_eur_per_kwh > params.floor_eur_per_kwh) {
        return Err(DataError::Synthetic("price cap must exceed the floor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[params.seed, 0x009e_1ce5]));
    let daily = Normal::new(0.0, params.daily_sd_eur_per_kwh.max(f64::MIN_POSITIVE))
        .map_err(|e| DataError::Synthetic(e.to_string()))?;
    let hourly = Normal::new(0.0, params.hourly_noise_sd_eur_per_kwh.max(f64::MIN_POSITIVE))
        .map_err(|e| DataError::Synthetic(e.to_string()))?;

    let mut deviation = 0.0;
    let mut values = Vec::with_capacity(params.n_hours);
    for h in 0..params.n_hours {
        let t = params.start + Duration::hours(h as i64);
        if h % 24 == 0 {
            deviation = params.daily_persistence * deviation + daily.sample(&mut rng);
        }
        let season = 1.0 + 0.15 * (2.0 * std::f64::consts::PI * (t.ordinal0() as f64 - 15.0) / 365.0).cos();
        let level = (params.mean_eur_per_kwh * season + deviation).max(0.02);
        let shape = HOURLY_SHAPE[(t.hour_of_day()) as usize];
        let p = (level * shape + hourly.sample(&mut rng))
            .clamp(params.floor_eur_per_kwh, params.cap_eur_per_kwh);
        // quoted to 0.01 €/MWh like exchange data
        values.push((p * 1e5).round() / 1e5);
    }
    Ok(PriceSeries::new(params.start.duration_round_hour(), values)?)
}

trait HourOfDay {
    fn hour_of_day(&self) -> u32;
    fn duration_round_hour(self) -> Self;
}

impl HourOfDay for DateTime<Utc> {
    fn hour_of_day(&self) -> u32 {
        chrono::Timelike::hour(self)
    }

    fn duration_round_hour(self) -> Self {
        chrono::DurationRound::duration_trunc(self, Duration::hours(1)).expect("in-range timestamp")
    }
}
