use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{ModelError, TimeGrid};

const MS_PER_HOUR: i64 = 3_600_000;

/// Hourly energy prices in €/kWh, starting at an hour boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    start: DateTime<Utc>,
    prices_eur_per_kwh: Vec<f64>,
}

impl PriceSeries {
    pub fn new(start: DateTime<Utc>, prices_eur_per_kwh: Vec<f64>) -> Result<Self, ModelError> {
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(ModelError::InvalidPrices(format!(
                "series start {start} is not on an hour boundary"
            )));
        }
        if prices_eur_per_kwh.is_empty() {
            return Err(ModelError::InvalidPrices("empty price series".into()));
        }
        if let Some(i) = prices_eur_per_kwh.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::InvalidPrices(format!(
                "non-finite price at hour {i}"
            )));
        }
        Ok(Self {
            start,
            prices_eur_per_kwh,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::hours(self.prices_eur_per_kwh.len() as i64)
    }

    pub fn values(&self) -> &[f64] {
        &self.prices_eur_per_kwh
    }

    pub fn len(&self) -> usize {
        self.prices_eur_per_kwh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices_eur_per_kwh.is_empty()
    }

    /// Price of the hour containing `instant`.
    pub fn price_at(&self, instant: DateTime<Utc>) -> Option<f64> {
        let off = (instant - self.start).num_milliseconds();
        if off < 0 {
            return None;
        }
        self.prices_eur_per_kwh
            .get((off / MS_PER_HOUR) as usize)
            .copied()
    }

    pub fn covers(&self, grid: &TimeGrid) -> bool {
        self.start <= grid.start && self.end() >= grid.end()
    }

    /// Prices for grid steps `first..first+len`, each step taking the price of the hour it
    /// starts in.
    pub fn step_prices(
        &self,
        grid: &TimeGrid,
        first: usize,
        len: usize,
    ) -> Result<Vec<f64>, ModelError> {
        let base = (grid.start - self.start).num_milliseconds();
        let step_ms = grid.step_ms();
        (first..first + len)
            .map(|t| {
                let off = base + step_ms * t as i64;
                (off >= 0)
                    .then(|| self.prices_eur_per_kwh.get((off / MS_PER_HOUR) as usize))
                    .flatten()
                    .copied()
                    .ok_or_else(|| ModelError::PriceCoverage {
                        instant: grid.step_start(t),
                    })
            })
            .collect()
    }
}

/// Linear-interpolation quantile of already sorted values (index `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Quantile of arbitrary finite values; `None` when `values` is empty.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, q))
}

/// Middle-band price derived as the `q`-quantile of the hourly energy prices.
pub fn derive_segment_price_from_quantile(prices: &PriceSeries, q: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(ModelError::Config(format!("quantile level {q} outside [0, 1]")));
    }
    quantile(prices.values(), q).ok_or_else(|| ModelError::InvalidPrices("empty price series".into()))
}
