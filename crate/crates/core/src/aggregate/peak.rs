use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::sample_indices;
use super::{derive_child_seed, diversity_from_peak, AggregateError};
use crate::dispatch::{dispatch, DispatchStrategy};
use crate::model::{quantile_sorted, SessionWindow, TimeGrid};

pub const DEFAULT_SUMMARY_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Session windows grouped by charging point, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFleet {
    pub grid: TimeGrid,
    pub sessions_by_cp: BTreeMap<String, Vec<SessionWindow>>,
}

impl CpFleet {
    pub fn from_windows(grid: TimeGrid, windows: impl IntoIterator<Item = SessionWindow>) -> Self {
        let mut sessions_by_cp: BTreeMap<String, Vec<SessionWindow>> = BTreeMap::new();
        for w in windows {
            sessions_by_cp.entry(w.cp_id.clone()).or_default().push(w);
        }
        Self { grid, sessions_by_cp }
    }

    pub fn n_cps(&self) -> usize {
        self.sessions_by_cp.len()
    }

    pub fn n_sessions(&self) -> usize {
        self.sessions_by_cp.values().map(Vec::len).sum()
    }

    pub fn cp_ids(&self) -> Vec<String> {
        self.sessions_by_cp.keys().cloned().collect()
    }

    pub fn windows(&self) -> impl Iterator<Item = &SessionWindow> {
        self.sessions_by_cp.values().flatten()
    }
}

/// Full-horizon load of every charging point under one strategy, in sorted id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CpLoads {
    pub grid: TimeGrid,
    pub cp_ids: Vec<String>,
    pub series_kw: Vec<Vec<f64>>,
}

/// Dispatches every session of the fleet and sums the profiles per charging point.
pub fn cp_load_profiles(
    fleet: &CpFleet,
    strategy: &DispatchStrategy,
) -> Result<CpLoads, AggregateError> {
    let grid = fleet.grid;
    let per_cp: Vec<(&String, &Vec<SessionWindow>)> = fleet.sessions_by_cp.iter().collect();
    let series: Vec<Result<Vec<f64>, AggregateError>> = per_cp
        .par_iter()
        .map(|(_, windows)| {
            let mut load = vec![0.0; grid.n_steps];
            for w in windows.iter() {
                if !w.grid.same_as(&grid) {
                    return Err(AggregateError::GridMismatch {
                        session_id: w.session_id.clone(),
                    });
                }
                dispatch(w, strategy)?.add_into(&mut load);
            }
            Ok(load)
        })
        .collect();
    Ok(CpLoads {
        grid,
        cp_ids: per_cp.iter().map(|(id, _)| (*id).clone()).collect(),
        series_kw: series.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub levels: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub summary_quantiles: Vec<f64>,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            levels: (0..=10).map(|k| 1usize << k).collect(),
            repeats: 100,
            seed: 1,
            summary_quantiles: DEFAULT_SUMMARY_QUANTILES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub q: f64,
    pub max_per_cp_kw: f64,
    pub diversity_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n_cps: usize,
    /// Annual peak per charging point, one entry per repeat.
    pub max_per_cp_kw: Vec<f64>,
    pub diversity_factor: Vec<f64>,
    pub summary: Vec<SummaryPoint>,
}

impl LevelResult {
    pub fn from_peaks(n_cps: usize, max_per_cp_kw: Vec<f64>, summary_quantiles: &[f64]) -> Self {
        let diversity_factor = max_per_cp_kw.iter().map(|m| diversity_from_peak(*m)).collect();
        let mut sorted = max_per_cp_kw.clone();
        sorted.sort_by(f64::total_cmp);
        let summary = summary_quantiles
            .iter()
            .map(|&q| {
                let m = quantile_sorted(&sorted, q);
                SummaryPoint {
                    q,
                    max_per_cp_kw: m,
                    diversity_factor: diversity_from_peak(m),
                }
            })
            .collect();
        Self {
            n_cps,
            max_per_cp_kw,
            diversity_factor,
            summary,
        }
    }

    pub fn median_max_per_cp_kw(&self) -> f64 {
        let mut sorted = self.max_per_cp_kw.clone();
        sorted.sort_by(f64::total_cmp);
        quantile_sorted(&sorted, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakStudyResult {
    pub levels: Vec<LevelResult>,
}

impl PeakStudyResult {
    pub fn level(&self, n_cps: usize) -> Option<&LevelResult> {
        self.levels.iter().find(|l| l.n_cps == n_cps)
    }
}

/// Samples fleets of each size, sums their load, and records the annual peak per charging point.
pub fn peak_study(
    fleet: &CpFleet,
    strategy: &DispatchStrategy,
    params: &StudyParams,
) -> Result<PeakStudyResult, AggregateError> {
    validate_params(params, fleet.n_cps())?;
    let loads = cp_load_profiles(fleet, strategy)?;
    peak_study_from_loads(&loads, params)
}

/// Peak study over precomputed per-CP loads. Fleets depend only on the seed, so calls
/// with different strategies but the same parameters compare identical fleets.
pub fn peak_study_from_loads(
    loads: &CpLoads,
    params: &StudyParams,
) -> Result<PeakStudyResult, AggregateError> {
    let population = loads.cp_ids.len();
    validate_params(params, population)?;
    let units: Vec<(usize, usize)> = params
        .levels
        .iter()
        .flat_map(|&n| (0..params.repeats).map(move |r| (n, r)))
        .collect();
    let peaks: Vec<Result<f64, AggregateError>> = units
        .par_iter()
        .map_init(
            || vec![0.0; loads.grid.n_steps],
            |buf, &(n, r)| {
                buf.iter_mut().for_each(|x| *x = 0.0);
                for i in sample_indices(population, n, derive_child_seed(params.seed, n, r)) {
                    for (acc, p) in buf.iter_mut().zip(&loads.series_kw[i]) {
                        *acc += p;
                    }
                }
                let peak = buf.iter().copied().fold(0.0, f64::max);
                if peak <= 0.0 {
                    return Err(AggregateError::UndefinedDiversity(format!(
                        "fleet of {n} (repeat {r}) draws no power"
                    )));
                }
                Ok(peak / n as f64)
            },
        )
        .collect();
    let peaks = peaks.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(PeakStudyResult {
        levels: params
            .levels
            .iter()
            .zip(peaks.chunks(params.repeats))
            .map(|(&n, chunk)| LevelResult::from_peaks(n, chunk.to_vec(), &params.summary_quantiles))
            .collect(),
    })
}

fn validate_params(params: &StudyParams, population: usize) -> Result<(), AggregateError> {
    if params.repeats == 0 {
        return Err(AggregateError::Study("repeats must be at least 1".into()));
    }
    if params.levels.is_empty() {
        return Err(AggregateError::Study("no aggregation levels".into()));
    }
    if let Some(&n) = params.levels.iter().find(|&&n| n == 0) {
        return Err(AggregateError::Study(format!("aggregation level {n} is empty")));
    }
    if let Some(&n) = params.levels.iter().find(|&&n| n > population) {
        return Err(AggregateError::SampleTooLarge {
            requested: n,
            population,
        });
    }
    if let Some(q) = params.summary_quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(AggregateError::Study(format!("summary quantile {q} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_time_grid, validate_session, ChargingSession, CP_CAPACITY_KW};
    use chrono::{Duration, TimeZone, Utc};

    fn fleet(n_cps: usize) -> CpFleet {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let grid = make_time_grid(t0, t0 + Duration::days(2), 0.25).unwrap();
        let windows = (0..n_cps).map(|i| {
            let arr = t0 + Duration::minutes(45 * i as i64);
            let s = ChargingSession {
                session_id: format!("s{i}"),
                cp_id: format!("cp{i:03}"),
                arrival: arr,
                departure: arr + Duration::hours(6),
                max_power_kw: 11.0,
                energy_kwh: 11.0,
            };
            validate_session(&s, &grid).unwrap().0
        });
        CpFleet::from_windows(grid, windows)
    }

    #[test]
    fn saturated_single_cp_has_unit_diversity() {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let grid = make_time_grid(t0, t0 + Duration::days(1), 0.25).unwrap();
        let s = ChargingSession {
            session_id: "s".into(),
            cp_id: "cp".into(),
            arrival: t0,
            departure: t0 + Duration::hours(2),
            max_power_kw: CP_CAPACITY_KW,
            energy_kwh: 46.0,
        };
        let f = CpFleet::from_windows(grid, [validate_session(&s, &grid).unwrap().0]);
        let params = StudyParams {
            levels: vec![1],
            repeats: 3,
            ..StudyParams::default()
        };
        let r = peak_study(&f, &DispatchStrategy::Unoptimized, &params).unwrap();
        assert_eq!(r.levels[0].max_per_cp_kw, vec![23.0; 3]);
        assert_eq!(r.levels[0].diversity_factor, vec![1.0; 3]);
    }

    #[test]
    fn exhaustive_fleet_has_no_spread() {
        let f = fleet(8);
        let params = StudyParams {
            levels: vec![8],
            repeats: 4,
            ..StudyParams::default()
        };
        let r = peak_study(&f, &DispatchStrategy::Unoptimized, &params).unwrap();
        let v = &r.levels[0].max_per_cp_kw;
        assert!(v.iter().all(|x| *x == v[0]));
        // staggered 45-minute arrivals, 1 h at 11 kW each: at most two overlap
        assert!((v[0] - 22.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_ordering_of_outputs() {
        let f = fleet(12);
        let params = StudyParams {
            levels: vec![1, 3, 12],
            repeats: 5,
            seed: 99,
            summary_quantiles: vec![0.0, 0.5, 1.0],
        };
        let r = peak_study(&f, &DispatchStrategy::Unoptimized, &params).unwrap();
        assert_eq!(r.levels.iter().map(|l| l.n_cps).collect::<Vec<_>>(), vec![1, 3, 12]);
        for l in &r.levels {
            assert_eq!(l.max_per_cp_kw.len(), 5);
            for (m, d) in l.max_per_cp_kw.iter().zip(&l.diversity_factor) {
                assert_eq!(*d, CP_CAPACITY_KW / m);
                assert!(*d >= 1.0);
            }
            assert!(l.summary[0].max_per_cp_kw <= l.summary[2].max_per_cp_kw);
        }
        assert_eq!(r, peak_study(&f, &DispatchStrategy::Unoptimized, &params).unwrap());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let f = fleet(4);
        let s = DispatchStrategy::Unoptimized;
        let base = StudyParams { levels: vec![1], repeats: 1, ..StudyParams::default() };
        assert!(peak_study(&f, &s, &StudyParams { repeats: 0, ..base.clone() }).is_err());
        assert!(peak_study(&f, &s, &StudyParams { levels: vec![], ..base.clone() }).is_err());
        assert!(peak_study(&f, &s, &StudyParams { levels: vec![5], ..base.clone() }).is_err());
        assert!(peak_study(&f, &s, &StudyParams { levels: vec![0], ..base }).is_err());
    }
}
