use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{
    generate_synthetic_fleet, generate_synthetic_prices, io_err, load_prices, load_sessions,
    DataError, SessionLoad, SyntheticFleetParams, SyntheticPriceParams,
};
use crate::aggregate::{StudyParams, DEFAULT_SUMMARY_QUANTILES};
use crate::dispatch::{DispatchStrategy, StrategyTag};
use crate::model::{
    derive_segment_price_from_quantile, make_time_grid, PriceSeries, SegmentedTariff, TimeGrid,
    CP_CAPACITY_KW,
};

/// The tariff scenarios shipped with the crate, by alias.
pub const PRESET_ALIASES: [&str; 8] = [
    "Unopt", "DE", "FE-p+", "FE-p-", "DE-p+λ-", "DE-p+λ+", "DE-p-λ-", "DE-p-λ+",
];

const PRESETS: [&str; 8] = [
    include_str!("../../scenarios/unopt.toml"),
    include_str!("../../scenarios/de.toml"),
    include_str!("../../scenarios/fe-p+.toml"),
    include_str!("../../scenarios/fe-p-.toml"),
    include_str!("../../scenarios/de-p+lambda-.toml"),
    include_str!("../../scenarios/de-p+lambda+.toml"),
    include_str!("../../scenarios/de-p-lambda-.toml"),
    include_str!("../../scenarios/de-p-lambda+.toml"),
];

/// A band price, either literal or a quantile of the scenario's energy prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceSpec {
    Value(f64),
    /// `"quantile:q"` with `q` in `[0, 1]`.
    Expr(String),
}

impl PriceSpec {
    fn resolve(&self, prices: Option<&PriceSeries>) -> Result<f64, DataError> {
        match self {
            Self::Value(v) => Ok(*v),
            Self::Expr(e) => {
                let q: f64 = e
                    .strip_prefix("quantile:")
                    .and_then(|q| q.trim().parse().ok())
                    .ok_or_else(|| DataError::Scenario(format!("bad band price '{e}', expected quantile:<q>")))?;
                let prices = prices.ok_or_else(|| {
                    DataError::Scenario(format!("band price '{e}' needs an energy price series"))
                })?;
                Ok(derive_segment_price_from_quantile(prices, q)?)
            }
        }
    }

    fn needs_prices(&self) -> bool {
        matches!(self, Self::Expr(_))
    }
}

/// Band structure given either as widths or as cumulative thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths_kw: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds_kw: Option<Vec<f64>>,
    pub prices: Vec<PriceSpec>,
}

impl TariffSpec {
    pub fn resolve(&self, prices: Option<&PriceSeries>) -> Result<SegmentedTariff, DataError> {
        let band_prices = self
            .prices
            .iter()
            .map(|p| p.resolve(prices))
            .collect::<Result<Vec<_>, _>>()?;
        let tariff = match (&self.widths_kw, &self.thresholds_kw) {
            (Some(w), None) => SegmentedTariff::new(w.clone(), band_prices)?,
            (None, Some(t)) => SegmentedTariff::from_thresholds(t, band_prices)?,
            _ => {
                return Err(DataError::Scenario(
                    "tariff needs exactly one of widths_kw or thresholds_kw".into(),
                ))
            }
        };
        if (tariff.capacity_kw() - CP_CAPACITY_KW).abs() > 1e-9 {
            return Err(DataError::Scenario(format!(
                "tariff bands sum to {} kW, expected the {CP_CAPACITY_KW} kW connection",
                tariff.capacity_kw()
            )));
        }
        Ok(tariff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub step_hours: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
            step_hours: 0.25,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid, DataError> {
        Ok(make_time_grid(self.start, self.end, self.step_hours)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceSource {
    File { path: PathBuf },
    /// Synthetic hourly series spanning the grid.
    Synthetic { synthetic_seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SessionSource {
    File { path: PathBuf },
    /// Named generator preset; only `"reference"` exists.
    Preset { preset: String },
    Synthetic { synthetic: SyntheticFleetParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySpec {
    pub levels: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Hour-of-day quantiles; also the summary quantiles of the peak study.
    pub quantile_levels: Vec<f64>,
    /// Draw the same fleets for every scenario of a multi-scenario study.
    pub reuse_fleets: bool,
}

impl Default for StudySpec {
    fn default() -> Self {
        let d = StudyParams::default();
        Self {
            levels: d.levels,
            repeats: d.repeats,
            seed: d.seed,
            quantile_levels: DEFAULT_SUMMARY_QUANTILES.to_vec(),
            reuse_fleets: true,
        }
    }
}

impl StudySpec {
    pub fn params(&self) -> StudyParams {
        StudyParams {
            levels: self.levels.clone(),
            repeats: self.repeats,
            seed: self.seed,
            summary_quantiles: self.quantile_levels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alias: String,
    pub strategy: StrategyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tariff: Option<TariffSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PriceSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<SessionSource>,
    #[serde(default)]
    pub study: StudySpec,
}

impl ScenarioConfig {
    /// Parses a scenario; relative file paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, DataError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| DataError::Scenario(e.message().to_string()))?;
        if let Some(base) = base_dir {
            if let Some(PriceSource::File { path }) = &mut cfg.prices {
                *path = base.join(&*path);
            }
            if let Some(SessionSource::File { path }) = &mut cfg.sessions {
                *path = base.join(&*path);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text, path.parent())
            .map_err(|e| DataError::Scenario(format!("{}: {e}", path.display())))
    }

    /// Loads a shipped scenario by alias. `λ` may be spelled `lambda`.
    pub fn preset(alias: &str) -> Result<Self, DataError> {
        let wanted = alias.replace("lambda", "λ");
        PRESET_ALIASES
            .iter()
            .position(|a| a.eq_ignore_ascii_case(&wanted))
            .map(|i| Self::from_toml_str(PRESETS[i], None))
            .unwrap_or_else(|| {
                Err(DataError::Scenario(format!(
                    "unknown preset '{alias}', expected one of {}",
                    PRESET_ALIASES.join(", ")
                )))
            })
    }

    pub fn presets() -> Vec<Self> {
        PRESET_ALIASES.iter().map(|a| Self::preset(a).expect("shipped preset parses")).collect()
    }

    /// A preset path or alias: existing files win over aliases.
    pub fn resolve(name_or_path: &str) -> Result<Self, DataError> {
        let p = Path::new(name_or_path);
        if p.is_file() {
            Self::from_file(p)
        } else {
            Self::preset(name_or_path)
        }
    }

    fn check(&self) -> Result<(), DataError> {
        if self.alias.trim().is_empty() {
            return Err(DataError::Scenario("alias is empty".into()));
        }
        match (self.strategy.needs_tariff(), &self.tariff) {
            (true, None) => {
                return Err(DataError::Scenario(format!("strategy {} needs a [tariff] table", self.strategy)))
            }
            (false, Some(_)) => {
                return Err(DataError::Scenario(format!("strategy {} takes no tariff", self.strategy)))
            }
            _ => {}
        }
        if let Some(t) = &self.tariff {
            // validates everything except quantile expressions
            if !t.prices.iter().any(PriceSpec::needs_prices) {
                t.resolve(None)?;
            }
        }
        if let Some(SessionSource::Preset { preset }) = &self.sessions {
            if preset != "reference" {
                return Err(DataError::Scenario(format!("unknown session preset '{preset}'")));
            }
        }
        self.grid.build()?;
        Ok(())
    }

    /// Whether building the strategy requires an energy price series.
    pub fn needs_prices(&self) -> bool {
        self.strategy.needs_prices()
            || self
                .tariff
                .as_ref()
                .is_some_and(|t| t.prices.iter().any(PriceSpec::needs_prices))
    }

    /// Energy prices for the grid, from `override_path` if given, else the configured source.
    /// `None` when the scenario does not use prices.
    pub fn load_prices(&self, override_path: Option<&Path>) -> Result<Option<Arc<PriceSeries>>, DataError> {
        if !self.needs_prices() {
            return Ok(None);
        }
        let grid = self.grid.build()?;
        let source = match override_path {
            Some(p) => PriceSource::File { path: p.to_path_buf() },
            None => self.prices.clone().ok_or_else(|| {
                DataError::Scenario(format!("scenario {} needs energy prices", self.alias))
            })?,
        };
        let series = match source {
            PriceSource::File { path } => load_prices(&path, &grid)?,
            PriceSource::Synthetic { synthetic_seed } => synthetic_prices_for(&grid, synthetic_seed)?,
        };
        Ok(Some(Arc::new(series)))
    }

    pub fn build_strategy(&self, prices: Option<Arc<PriceSeries>>) -> Result<DispatchStrategy, DataError> {
        let tariff = self
            .tariff
            .as_ref()
            .map(|t| t.resolve(prices.as_deref()))
            .transpose()?;
        let prices = if self.strategy.needs_prices() { prices } else { None };
        DispatchStrategy::from_parts(self.strategy, tariff, prices)
            .map_err(|e| DataError::Scenario(format!("{}: {e}", self.alias)))
    }

    /// Sessions from `override_path` if given, else the configured source.
    pub fn load_sessions(&self, override_path: Option<&Path>) -> Result<SessionLoad, DataError> {
        let source = match override_path {
            Some(p) => SessionSource::File { path: p.to_path_buf() },
            None => self.sessions.clone().ok_or_else(|| {
                DataError::Scenario(format!("scenario {} has no session source", self.alias))
            })?,
        };
        match source {
            SessionSource::File { path } => load_sessions(&path),
            SessionSource::Preset { .. } => Ok(SessionLoad {
                sessions: generate_synthetic_fleet(&SyntheticFleetParams::reference())?,
                ..SessionLoad::default()
            }),
            SessionSource::Synthetic { synthetic } => Ok(SessionLoad {
                sessions: generate_synthetic_fleet(&synthetic)?,
                ..SessionLoad::default()
            }),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Synthetic prices over the whole hours spanning `grid`.
fn synthetic_prices_for(grid: &TimeGrid, seed: u64) -> Result<PriceSeries, DataError> {
    let start = chrono::DurationRound::duration_trunc(grid.start, chrono::Duration::hours(1))
        .expect("in-range timestamp");
    let n_hours = ((grid.end() - start).num_milliseconds() as u64).div_ceil(3_600_000) as usize;
    generate_synthetic_prices(&SyntheticPriceParams {
        start,
        n_hours,
        ..SyntheticPriceParams::reference(seed)
    })
}
