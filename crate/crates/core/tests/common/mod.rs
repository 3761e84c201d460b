#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evpeak::dispatch::DispatchStrategy;
use evpeak::io::{generate_synthetic_fleet, ScenarioConfig, SyntheticFleetParams};
use evpeak::model::{
    make_time_grid, validate_session, ChargingSession, PriceSeries, SegmentedTariff,
    SessionWindow, TimeGrid,
};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()
}

pub fn year_grid() -> TimeGrid {
    make_time_grid(t0(), Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(), 0.25).unwrap()
}

pub fn reference_sessions() -> &'static [ChargingSession] {
    static S: OnceLock<Vec<ChargingSession>> = OnceLock::new();
    S.get_or_init(|| generate_synthetic_fleet(&SyntheticFleetParams::reference()).unwrap())
}

pub fn reference_windows() -> &'static [SessionWindow] {
    static W: OnceLock<Vec<SessionWindow>> = OnceLock::new();
    W.get_or_init(|| {
        let grid = year_grid();
        reference_sessions()
            .iter()
            .map(|s| validate_session(s, &grid).unwrap().0)
            .collect()
    })
}

/// The eight shipped scenarios resolved against their configured (synthetic) prices.
pub fn preset_strategies() -> &'static [(String, DispatchStrategy)] {
    static P: OnceLock<Vec<(String, DispatchStrategy)>> = OnceLock::new();
    P.get_or_init(|| {
        ScenarioConfig::presets()
            .into_iter()
            .map(|cfg| {
                let prices = cfg.load_prices(None).unwrap();
                let s = cfg.build_strategy(prices).unwrap();
                (cfg.alias, s)
            })
            .collect()
    })
}

pub fn preset(alias: &str) -> &'static DispatchStrategy {
    &preset_strategies().iter().find(|(a, _)| a == alias).unwrap().1
}

/// A small dispatch problem whose optimum lies on the oracle's power lattice.
#[derive(Debug, Clone)]
pub struct Instance {
    pub window: SessionWindow,
    pub tariff: SegmentedTariff,
    pub prices: Arc<PriceSeries>,
    pub lattice_kw: f64,
}

impl Instance {
    pub fn strategies(&self) -> Vec<DispatchStrategy> {
        vec![
            DispatchStrategy::Unoptimized,
            DispatchStrategy::DynamicEnergy { prices: self.prices.clone() },
            DispatchStrategy::SegmentedFlat { tariff: self.tariff.clone() },
            DispatchStrategy::SegmentedDynamic {
                tariff: self.tariff.clone(),
                prices: self.prices.clone(),
            },
        ]
    }
}

/// Up to 8 steps and 3 bands. Boundary steps may be partially available; every cap is a
/// multiple of the 0.25 kW lattice and the demand a multiple of one lattice step's energy.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_hours = if rng.random_bool(0.5) { 1.0 } else { 0.25 };
    let n_steps = rng.random_range(1..=8usize);
    let grid = make_time_grid(
        t0(),
        t0() + Duration::milliseconds((n_steps as f64 * step_hours * 3.6e6) as i64),
        step_hours,
    )
    .unwrap();
    let step_ms = (step_hours * 3.6e6) as i64;
    let quarter = |k: i64| Duration::milliseconds(step_ms * k / 4);
    let first = rng.random_range(0..n_steps) as i64;
    let last = rng.random_range(first as usize..n_steps) as i64;
    let arrival = t0() + quarter(4 * first + rng.random_range(0..4));
    let mut departure = t0() + quarter(4 * last + rng.random_range(1..=4));
    if departure <= arrival {
        departure = arrival + quarter(1);
    }

    let n_seg = rng.random_range(1..=3usize);
    let widths: Vec<f64> = (0..n_seg).map(|_| rng.random_range(1..=8) as f64).collect();
    let mut band_prices: Vec<f64> = (0..n_seg)
        .map(|_| (rng.random_range(0.0..1.0f64) * 1000.0).round() / 1000.0)
        .collect();
    band_prices.sort_by(f64::total_cmp);
    if rng.random_bool(0.5) {
        band_prices[0] = 0.0;
    }
    let capacity: f64 = widths.iter().sum();
    let tariff = SegmentedTariff::new(widths, band_prices).unwrap();
    let max_power = rng.random_range(1..=(capacity as usize).min(12)) as f64;

    let n_hours = (n_steps as f64 * step_hours).ceil() as usize;
    let prices = PriceSeries::new(
        t0(),
        (0..n_hours)
            .map(|_| (rng.random_range(-0.05..0.5f64) * 1000.0).round() / 1000.0)
            .collect(),
    )
    .unwrap();

    let lattice_kw = 0.25;
    let probe = ChargingSession {
        session_id: format!("rand-{seed}"),
        cp_id: "cp".into(),
        arrival,
        departure,
        max_power_kw: max_power,
        energy_kwh: 1e9,
    };
    let (probe_window, _) = validate_session(&probe, &grid).unwrap();
    let unit = lattice_kw * step_hours;
    let max_units: usize = (0..probe_window.len())
        .map(|i| (probe_window.power_cap_kw(i) / lattice_kw).round() as usize)
        .sum();
    let units = rng.random_range(1..=max_units);
    let session = ChargingSession {
        energy_kwh: units as f64 * unit,
        ..probe
    };
    let (window, clip) = validate_session(&session, &grid).unwrap();
    assert!(clip.is_none());
    Instance {
        window,
        tariff,
        prices: Arc::new(prices),
        lattice_kw,
    }
}
