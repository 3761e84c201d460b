//! Python bindings for `evpeak`. Timestamps cross the boundary as ISO-8601 UTC strings.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use evpeak::aggregate::{self, AggregateProfile, CpFleet, CpLoads, StudyParams};
use evpeak::dispatch::{self, DispatchStrategy};
use evpeak::io::{self, ScenarioConfig, SyntheticFleetParams, SyntheticPriceParams};
use evpeak::model;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn utc(s: &str) -> PyResult<DateTime<Utc>> {
    io::parse_utc(s).ok_or_else(|| PyValueError::new_err(format!("not an ISO-8601 UTC timestamp: '{s}'")))
}

#[pyclass(module = "pyevpeak", name = "ChargingSession", from_py_object)]
#[derive(Clone)]
pub struct PySession {
    inner: model::ChargingSession,
}

#[pymethods]
impl PySession {
    #[new]
    fn new(
        session_id: String,
        cp_id: String,
        arrival: &str,
        departure: &str,
        max_power_kw: f64,
        energy_kwh: f64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: model::ChargingSession {
                session_id,
                cp_id,
                arrival: utc(arrival)?,
                departure: utc(departure)?,
                max_power_kw,
                energy_kwh,
            },
        })
    }

    #[getter]
    fn session_id(&self) -> &str {
        &self.inner.session_id
    }

    #[getter]
    fn cp_id(&self) -> &str {
        &self.inner.cp_id
    }

    #[getter]
    fn arrival(&self) -> String {
        io::format_utc(self.inner.arrival)
    }

    #[getter]
    fn departure(&self) -> String {
        io::format_utc(self.inner.departure)
    }

    #[getter]
    fn max_power_kw(&self) -> f64 {
        self.inner.max_power_kw
    }

    #[getter]
    fn energy_kwh(&self) -> f64 {
        self.inner.energy_kwh
    }

    fn duration_hours(&self) -> f64 {
        self.inner.duration_hours()
    }

    fn __repr__(&self) -> String {
        format!(
            "ChargingSession('{}', '{}', '{}', '{}', {}, {})",
            self.inner.session_id,
            self.inner.cp_id,
            io::format_utc(self.inner.arrival),
            io::format_utc(self.inner.departure),
            self.inner.max_power_kw,
            self.inner.energy_kwh
        )
    }
}

#[pyclass(module = "pyevpeak", name = "TimeGrid", from_py_object)]
#[derive(Clone, Copy)]
pub struct PyTimeGrid {
    inner: model::TimeGrid,
}

#[pymethods]
impl PyTimeGrid {
    #[new]
    #[pyo3(signature = (start="2022-01-01T00:00:00Z", end="2023-01-01T00:00:00Z", step_hours=0.25))]
    fn new(start: &str, end: &str, step_hours: f64) -> PyResult<Self> {
        let inner = model::make_time_grid(utc(start)?, utc(end)?, step_hours).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn start(&self) -> String {
        io::format_utc(self.inner.start)
    }

    #[getter]
    fn step_hours(&self) -> f64 {
        self.inner.step_hours
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps
    }

    fn step_start(&self, t: usize) -> String {
        io::format_utc(self.inner.step_start(t))
    }

    fn __repr__(&self) -> String {
        format!(
            "TimeGrid(start='{}', step_hours={}, n_steps={})",
            io::format_utc(self.inner.start),
            self.inner.step_hours,
            self.inner.n_steps
        )
    }
}

#[pyclass(module = "pyevpeak", name = "SegmentedTariff", from_py_object)]
#[derive(Clone)]
pub struct PyTariff {
    inner: model::SegmentedTariff,
}

#[pymethods]
impl PyTariff {
    #[new]
    fn new(widths_kw: Vec<f64>, prices: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: model::SegmentedTariff::new(widths_kw, prices).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_thresholds(thresholds_kw: Vec<f64>, prices: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: model::SegmentedTariff::from_thresholds(&thresholds_kw, prices).map_err(err)?,
        })
    }

    #[getter]
    fn widths_kw(&self) -> Vec<f64> {
        self.inner.widths_kw().to_vec()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.inner.prices().to_vec()
    }

    #[getter]
    fn thresholds_kw(&self) -> Vec<f64> {
        self.inner.thresholds_kw()
    }

    /// Network cost of drawing `power_kw` for one step, and the split over the bands.
    fn step_cost(&self, power_kw: f64, step_hours: f64) -> PyResult<(f64, Vec<f64>)> {
        let c = model::segmented_step_cost(power_kw, &self.inner, step_hours).map_err(err)?;
        Ok((c.cost_eur, c.segment_power_kw))
    }

    fn __repr__(&self) -> String {
        format!("SegmentedTariff({:?}, {:?})", self.inner.widths_kw(), self.inner.prices())
    }
}

#[pyclass(module = "pyevpeak", name = "PriceSeries", from_py_object)]
#[derive(Clone)]
pub struct PyPrices {
    inner: Arc<model::PriceSeries>,
}

#[pymethods]
impl PyPrices {
    /// Hourly prices in EUR/kWh starting at `start`.
    #[new]
    fn new(start: &str, prices_eur_per_kwh: Vec<f64>) -> PyResult<Self> {
        let inner = model::PriceSeries::new(utc(start)?, prices_eur_per_kwh).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Synthetic hourly series; defaults to one year from 2022-01-01.
    #[staticmethod]
    #[pyo3(signature = (seed=1, start=None, hours=None))]
    fn synthetic(seed: u64, start: Option<&str>, hours: Option<usize>) -> PyResult<Self> {
        let mut params = SyntheticPriceParams::reference(seed);
        if let Some(s) = start {
            params.start = utc(s)?;
        }
        if let Some(h) = hours {
            params.n_hours = h;
        }
        let inner = io::generate_synthetic_prices(&params).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn load(path: &str, grid: &PyTimeGrid) -> PyResult<Self> {
        let inner = io::load_prices(std::path::Path::new(path), &grid.inner).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn start(&self) -> String {
        io::format_utc(self.inner.start())
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        model::derive_segment_price_from_quantile(&self.inner, q).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(module = "pyevpeak", name = "Strategy", from_py_object)]
#[derive(Clone)]
pub struct PyStrategy {
    inner: DispatchStrategy,
}

#[pymethods]
impl PyStrategy {
    #[staticmethod]
    fn unoptimized() -> Self {
        Self {
            inner: DispatchStrategy::Unoptimized,
        }
    }

    #[staticmethod]
    fn dynamic_energy(prices: &PyPrices) -> Self {
        Self {
            inner: DispatchStrategy::DynamicEnergy {
                prices: prices.inner.clone(),
            },
        }
    }

    #[staticmethod]
    fn segmented_flat(tariff: &PyTariff) -> Self {
        Self {
            inner: DispatchStrategy::SegmentedFlat {
                tariff: tariff.inner.clone(),
            },
        }
    }

    #[staticmethod]
    fn segmented_dynamic(tariff: &PyTariff, prices: &PyPrices) -> Self {
        Self {
            inner: DispatchStrategy::SegmentedDynamic {
                tariff: tariff.inner.clone(),
                prices: prices.inner.clone(),
            },
        }
    }

    /// Strategy of a built-in scenario, e.g. "FE-p+" or "DE-p-lambda+".
    #[staticmethod]
    fn preset(alias: &str) -> PyResult<Self> {
        let cfg = ScenarioConfig::preset(alias).map_err(err)?;
        let prices = cfg.load_prices(None).map_err(err)?;
        Ok(Self {
            inner: cfg.build_strategy(prices).map_err(err)?,
        })
    }

    #[getter]
    fn tag(&self) -> &'static str {
        self.inner.tag().as_str()
    }

    #[getter]
    fn tariff(&self) -> Option<PyTariff> {
        self.inner.tariff().map(|t| PyTariff { inner: t.clone() })
    }

    fn __repr__(&self) -> String {
        format!("Strategy('{}')", self.inner.tag())
    }
}

#[pyclass(module = "pyevpeak", name = "SessionWindow", from_py_object)]
#[derive(Clone)]
pub struct PyWindow {
    inner: model::SessionWindow,
}

#[pymethods]
impl PyWindow {
    #[getter]
    fn session_id(&self) -> &str {
        &self.inner.session_id
    }

    #[getter]
    fn first_step(&self) -> usize {
        self.inner.first_step
    }

    #[getter]
    fn availability(&self) -> Vec<f64> {
        self.inner.availability.clone()
    }

    #[getter]
    fn energy_kwh(&self) -> f64 {
        self.inner.energy_kwh
    }

    fn deliverable_kwh(&self) -> f64 {
        self.inner.deliverable_kwh()
    }
}

#[pyclass(module = "pyevpeak", name = "PowerProfile")]
pub struct PyProfile {
    inner: model::PowerProfile,
}

#[pymethods]
impl PyProfile {
    #[getter]
    fn session_id(&self) -> &str {
        &self.inner.session_id
    }

    #[getter]
    fn first_step(&self) -> usize {
        self.inner.first_step
    }

    #[getter]
    fn power_kw(&self) -> Vec<f64> {
        self.inner.power_kw.clone()
    }

    /// Per-step band split as a list of rows, or None for strategies without a tariff.
    #[getter]
    fn segment_power_kw(&self) -> Option<Vec<Vec<f64>>> {
        let split = self.inner.segment_power_kw.as_ref()?;
        Some(
            (0..self.inner.power_kw.len())
                .map(|i| split.row(i).to_vec())
                .collect(),
        )
    }

    fn delivered_kwh(&self) -> f64 {
        self.inner.delivered_kwh()
    }

    fn cumulative_kwh(&self) -> Vec<f64> {
        self.inner.cumulative_kwh()
    }

    fn peak_kw(&self) -> f64 {
        self.inner.peak_kw()
    }
}

/// Maps a session onto the grid. Returns the window and whether its energy was clipped.
#[pyfunction]
fn validate_session(session: &PySession, grid: &PyTimeGrid) -> PyResult<(PyWindow, bool)> {
    let (inner, clip) = model::validate_session(&session.inner, &grid.inner).map_err(err)?;
    Ok((PyWindow { inner }, clip.is_some()))
}

#[pyfunction(name = "dispatch")]
fn py_dispatch(window: &PyWindow, strategy: &PyStrategy) -> PyResult<PyProfile> {
    let inner = dispatch::dispatch(&window.inner, &strategy.inner).map_err(err)?;
    Ok(PyProfile { inner })
}

/// Energy, network and total cost of a profile in EUR.
#[pyfunction]
fn evaluate_cost<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    strategy: &PyStrategy,
) -> PyResult<Bound<'py, PyDict>> {
    let c = dispatch::evaluate_cost(&profile.inner, &strategy.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("energy_cost_eur", c.energy_cost_eur)?;
    d.set_item("network_cost_eur", c.network_cost_eur)?;
    d.set_item("total_eur", c.total_eur)?;
    Ok(d)
}

/// Sessions grouped by charging point on a common grid.
#[pyclass(module = "pyevpeak", name = "Fleet")]
pub struct PyFleet {
    inner: CpFleet,
}

#[pymethods]
impl PyFleet {
    /// Validates every session against the grid; invalid sessions raise.
    #[new]
    fn new(py: Python<'_>, sessions: Vec<PySession>, grid: &PyTimeGrid) -> PyResult<Self> {
        let grid = grid.inner;
        let windows = py
            .detach(|| {
                sessions
                    .iter()
                    .map(|s| model::validate_session(&s.inner, &grid).map(|(w, _)| w))
                    .collect::<Result<Vec<_>, _>>()
            })
            .map_err(err)?;
        Ok(Self {
            inner: CpFleet::from_windows(grid, windows),
        })
    }

    #[getter]
    fn n_cps(&self) -> usize {
        self.inner.n_cps()
    }

    #[getter]
    fn n_sessions(&self) -> usize {
        self.inner.n_sessions()
    }

    fn cp_ids(&self) -> Vec<String> {
        self.inner.cp_ids()
    }

    /// Summed fleet load per grid step in kW.
    fn load_kw(&self, py: Python<'_>, strategy: &PyStrategy) -> PyResult<Vec<f64>> {
        let loads = self.loads(py, strategy)?;
        Ok(total(&loads).power_kw)
    }

    /// Capacity of one connection over the fleet's annual peak per charging point.
    fn diversity_factor(&self, py: Python<'_>, strategy: &PyStrategy) -> PyResult<f64> {
        let loads = self.loads(py, strategy)?;
        aggregate::diversity_factor(&total(&loads)).map_err(err)
    }

    /// Hour-of-day quantiles of per-CP load: (levels, values[hour][k], max[hour]).
    #[pyo3(signature = (strategy, quantile_levels=vec![0.25, 0.5, 0.75]))]
    fn quantile_profile(
        &self,
        py: Python<'_>,
        strategy: &PyStrategy,
        quantile_levels: Vec<f64>,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let loads = self.loads(py, strategy)?;
        let q = aggregate::quantile_by_hour(&total(&loads), &quantile_levels).map_err(err)?;
        Ok((q.quantile_levels, q.values_kw, q.max_kw))
    }

    /// Peak per CP and diversity factor over sampled sub-fleets. Returns one dict per level.
    #[pyo3(signature = (strategy, levels, repeats=100, seed=1, summary_quantiles=vec![0.05, 0.5, 0.95]))]
    fn peak_study<'py>(
        &self,
        py: Python<'py>,
        strategy: &PyStrategy,
        levels: Vec<usize>,
        repeats: usize,
        seed: u64,
        summary_quantiles: Vec<f64>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let params = StudyParams {
            levels,
            repeats,
            seed,
            summary_quantiles,
        };
        let loads = self.loads(py, strategy)?;
        let result = py
            .detach(|| aggregate::peak_study_from_loads(&loads, &params))
            .map_err(err)?;
        result
            .levels
            .into_iter()
            .map(|l| {
                let d = PyDict::new(py);
                d.set_item("n_cps", l.n_cps)?;
                d.set_item("max_per_cp_kw", l.max_per_cp_kw)?;
                d.set_item("diversity_factor", l.diversity_factor)?;
                let summary: Vec<(f64, f64, f64)> = l
                    .summary
                    .iter()
                    .map(|s| (s.q, s.max_per_cp_kw, s.diversity_factor))
                    .collect();
                d.set_item("summary", summary)?;
                Ok(d)
            })
            .collect()
    }
}

impl PyFleet {
    fn loads(&self, py: Python<'_>, strategy: &PyStrategy) -> PyResult<CpLoads> {
        let fleet = &self.inner;
        let s = &strategy.inner;
        py.detach(|| aggregate::cp_load_profiles(fleet, s)).map_err(err)
    }
}

fn total(loads: &CpLoads) -> AggregateProfile {
    let mut agg = AggregateProfile::zeros(&loads.grid, loads.cp_ids.len());
    for series in &loads.series_kw {
        for (acc, p) in agg.power_kw.iter_mut().zip(series) {
            *acc += p;
        }
    }
    agg
}

/// Synthetic session log; defaults reproduce the built-in reference fleet.
#[pyfunction]
#[pyo3(signature = (seed=None, n_cps=None, sessions_per_cp=None))]
fn generate_fleet(
    py: Python<'_>,
    seed: Option<u64>,
    n_cps: Option<usize>,
    sessions_per_cp: Option<f64>,
) -> PyResult<Vec<PySession>> {
    let mut params = SyntheticFleetParams::reference();
    if let Some(s) = seed {
        params.seed = s;
    }
    if let Some(n) = n_cps {
        params.n_cps = n;
    }
    if let Some(k) = sessions_per_cp {
        params.sessions_per_cp = k;
    }
    let sessions = py
        .detach(|| io::generate_synthetic_fleet(&params))
        .map_err(err)?;
    Ok(sessions.into_iter().map(|inner| PySession { inner }).collect())
}

/// Reads a session CSV. Malformed rows are skipped and reported as (line, reason) pairs.
#[pyfunction]
fn load_sessions(path: &str) -> PyResult<(Vec<PySession>, Vec<(u64, String)>)> {
    let load = io::load_sessions(std::path::Path::new(path)).map_err(err)?;
    let rejects = load
        .rejects
        .into_iter()
        .map(|r| (r.line, format!("{}: {}", r.reason.code(), r.detail)))
        .collect();
    let sessions = load.sessions.into_iter().map(|inner| PySession { inner }).collect();
    Ok((sessions, rejects))
}

#[pyfunction]
fn preset_aliases() -> Vec<&'static str> {
    io::PRESET_ALIASES.to_vec()
}

/// Linear-interpolation quantile of arbitrary values.
#[pyfunction]
fn quantile(values: Vec<f64>, q: f64) -> PyResult<f64> {
    model::quantile(&values, q).ok_or_else(|| PyValueError::new_err("empty input or q outside [0, 1]"))
}

#[pymodule]
fn pyevpeak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CP_CAPACITY_KW", model::CP_CAPACITY_KW)?;
    m.add_class::<PySession>()?;
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyTariff>()?;
    m.add_class::<PyPrices>()?;
    m.add_class::<PyStrategy>()?;
    m.add_class::<PyWindow>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyFleet>()?;
    m.add_function(wrap_pyfunction!(validate_session, m)?)?;
    m.add_function(wrap_pyfunction!(py_dispatch, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_cost, m)?)?;
    m.add_function(wrap_pyfunction!(generate_fleet, m)?)?;
    m.add_function(wrap_pyfunction!(load_sessions, m)?)?;
    m.add_function(wrap_pyfunction!(preset_aliases, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    Ok(())
}
