use serde::{Deserialize, Serialize};

use super::ModelError;

/// Network capacity of a single charging point, in kW.
pub const CP_CAPACITY_KW: f64 = 23.0;

const CAPACITY_SLACK_KW: f64 = 1e-9;

/// Volumetric network tariff billed per power band.
///
/// Band `s` spans `widths_kw[s]` kW on top of all lower bands and is billed at
/// `prices[s]` €/kWh. Prices never decrease with the band index, which is what makes
/// bottom-up filling of the bands the cheapest split of any power level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedTariff {
    segment_widths_kw: Vec<f64>,
    segment_prices: Vec<f64>,
}

impl SegmentedTariff {
    pub fn new(widths_kw: Vec<f64>, prices: Vec<f64>) -> Result<Self, ModelError> {
        if widths_kw.is_empty() {
            return Err(ModelError::InvalidTariff("no segments".into()));
        }
        if widths_kw.len() != prices.len() {
            return Err(ModelError::InvalidTariff(format!(
                "{} widths but {} prices",
                widths_kw.len(),
                prices.len()
            )));
        }
        if let Some(w) = widths_kw.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(ModelError::InvalidTariff(format!(
                "segment width must be positive, got {w}"
            )));
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(ModelError::InvalidTariff(format!(
                "segment price must be non-negative, got {p}"
            )));
        }
        if let Some(s) = prices.windows(2).position(|w| w[0] > w[1]) {
            return Err(ModelError::InvalidTariff(format!(
                "segment prices must be nondecreasing, but price[{}]={} > price[{}]={}",
                s,
                prices[s],
                s + 1,
                prices[s + 1]
            )));
        }
        Ok(Self {
            segment_widths_kw: widths_kw,
            segment_prices: prices,
        })
    }

    /// Builds a tariff from cumulative thresholds, e.g. `{4, 12, 23}` for widths `{4, 8, 11}`.
    pub fn from_thresholds(thresholds_kw: &[f64], prices: Vec<f64>) -> Result<Self, ModelError> {
        let mut prev = 0.0;
        let mut widths = Vec::with_capacity(thresholds_kw.len());
        for &th in thresholds_kw {
            if th <= prev {
                return Err(ModelError::InvalidTariff(format!(
                    "thresholds must be strictly increasing from 0, got {th} after {prev}"
                )));
            }
            widths.push(th - prev);
            prev = th;
        }
        Self::new(widths, prices)
    }

    pub fn widths_kw(&self) -> &[f64] {
        &self.segment_widths_kw
    }

    pub fn prices(&self) -> &[f64] {
        &self.segment_prices
    }

    pub fn n_segments(&self) -> usize {
        self.segment_widths_kw.len()
    }

    pub fn capacity_kw(&self) -> f64 {
        self.segment_widths_kw.iter().sum()
    }

    /// Cumulative upper thresholds of each band.
    pub fn thresholds_kw(&self) -> Vec<f64> {
        self.segment_widths_kw
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }

    /// Tariff with the same bands but every price set to zero.
    pub fn zero_priced(&self) -> Self {
        Self {
            segment_widths_kw: self.segment_widths_kw.clone(),
            segment_prices: vec![0.0; self.n_segments()],
        }
    }

    /// Cost rate in €/h of drawing `power_kw`; skips the per-segment split.
    pub(crate) fn cost_rate(&self, power_kw: f64) -> f64 {
        let mut left = power_kw.max(0.0);
        let mut rate = 0.0;
        for (w, price) in self.segment_widths_kw.iter().zip(&self.segment_prices) {
            if left <= 0.0 {
                break;
            }
            let p = left.min(*w);
            rate += price * p;
            left -= p;
        }
        rate
    }
}

/// Network cost of one step and the power drawn within each band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCost {
    pub cost_eur: f64,
    pub segment_power_kw: Vec<f64>,
}

/// Splits `power_kw` bottom-up over the bands and prices it for one step of `step_hours`.
pub fn segmented_step_cost(
    power_kw: f64,
    tariff: &SegmentedTariff,
    step_hours: f64,
) -> Result<StepCost, ModelError> {
    let cap = tariff.capacity_kw();
    if !(power_kw.is_finite() && power_kw >= -CAPACITY_SLACK_KW && power_kw <= cap + CAPACITY_SLACK_KW)
    {
        return Err(ModelError::PowerOutOfRange {
            power_kw,
            capacity_kw: cap,
        });
    }
    let mut left = power_kw.max(0.0);
    let mut cost = 0.0;
    let segment_power_kw = tariff
        .widths_kw()
        .iter()
        .zip(tariff.prices())
        .map(|(w, price)| {
            let p = left.min(*w);
            left -= p;
            cost += price * p * step_hours;
            p
        })
        .collect();
    Ok(StepCost {
        cost_eur: cost,
        segment_power_kw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_i_plus() -> SegmentedTariff {
        SegmentedTariff::new(vec![4.0, 8.0, 11.0], vec![0.0, 0.055, 0.9]).unwrap()
    }

    #[test]
    fn zero_power_costs_nothing() {
        let c = segmented_step_cost(0.0, &table_i_plus(), 0.25).unwrap();
        assert_eq!(c.cost_eur, 0.0);
        assert_eq!(c.segment_power_kw, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn eight_kw_spills_into_middle_band() {
        let c = segmented_step_cost(8.0, &table_i_plus(), 1.0).unwrap();
        assert_eq!(c.segment_power_kw, vec![4.0, 4.0, 0.0]);
        assert!((c.cost_eur - 0.22).abs() < 1e-12);
    }

    #[test]
    fn full_capacity_low_thresholds() {
        let t = SegmentedTariff::new(vec![2.0, 4.0, 17.0], vec![0.0, 0.158, 0.9]).unwrap();
        let c = segmented_step_cost(23.0, &t, 0.25).unwrap();
        assert_eq!(c.segment_power_kw, vec![2.0, 4.0, 17.0]);
        assert!((c.cost_eur - 3.983).abs() < 1e-12);
    }

    #[test]
    fn power_above_capacity_is_an_error() {
        assert!(segmented_step_cost(23.5, &table_i_plus(), 0.25).is_err());
        assert!(segmented_step_cost(-1.0, &table_i_plus(), 0.25).is_err());
    }

    #[test]
    fn invalid_tariffs_are_rejected() {
        assert!(SegmentedTariff::new(vec![4.0, 8.0], vec![0.1, 0.0]).is_err());
        assert!(SegmentedTariff::new(vec![4.0, 0.0], vec![0.0, 0.1]).is_err());
        assert!(SegmentedTariff::new(vec![4.0], vec![-0.1]).is_err());
        assert!(SegmentedTariff::new(vec![4.0], vec![0.1, 0.2]).is_err());
        assert!(SegmentedTariff::new(vec![], vec![]).is_err());
    }

    #[test]
    fn thresholds_convert_to_widths() {
        let t = SegmentedTariff::from_thresholds(&[4.0, 12.0, 23.0], vec![0.0, 0.055, 0.9]).unwrap();
        assert_eq!(t, table_i_plus());
        assert_eq!(t.thresholds_kw(), vec![4.0, 12.0, 23.0]);
        assert!(SegmentedTariff::from_thresholds(&[4.0, 4.0, 23.0], vec![0.0, 0.1, 0.9]).is_err());
    }

    fn arb_tariff() -> impl Strategy<Value = SegmentedTariff> {
        (1usize..=3)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(1u32..=60, n),
                    proptest::collection::vec(0u32..=100, n),
                )
            })
            .prop_map(|(w, mut p)| {
                p.sort_unstable();
                SegmentedTariff::new(
                    w.into_iter().map(|x| x as f64 / 10.0).collect(),
                    p.into_iter().map(|x| x as f64 / 100.0).collect(),
                )
                .unwrap()
            })
    }

    /// Cheapest split of `units` lattice units over the bands, by exhaustive search.
    fn brute_force_min(tariff: &SegmentedTariff, units: u32, lattice: f64) -> f64 {
        let caps: Vec<u32> = tariff
            .widths_kw()
            .iter()
            .map(|w| (w / lattice).round() as u32)
            .collect();
        fn go(s: usize, left: u32, caps: &[u32], prices: &[f64], lattice: f64) -> f64 {
            if s == caps.len() {
                return if left == 0 { 0.0 } else { f64::INFINITY };
            }
            (0..=caps[s].min(left))
                .map(|k| {
                    prices[s] * k as f64 * lattice
                        + go(s + 1, left - k, caps, prices, lattice)
                })
                .fold(f64::INFINITY, f64::min)
        }
        go(0, units, &caps, tariff.prices(), lattice)
    }

    proptest! {
        #[test]
        fn greedy_split_is_cheapest(tariff in arb_tariff(), frac in 0.0f64..=1.0) {
            let total_units = (tariff.capacity_kw() / 0.1).round() as u32;
            let units = (frac * total_units as f64).floor() as u32;
            let p = units as f64 * 0.1;
            let got = segmented_step_cost(p, &tariff, 1.0).unwrap();
            let want = brute_force_min(&tariff, units, 0.1);
            prop_assert!((got.cost_eur - want).abs() < 1e-9, "{} vs {}", got.cost_eur, want);
            let sum: f64 = got.segment_power_kw.iter().sum();
            prop_assert!((sum - p).abs() < 1e-9);
            for (ps, w) in got.segment_power_kw.iter().zip(tariff.widths_kw()) {
                prop_assert!(*ps >= 0.0 && *ps <= *w);
            }
        }

        #[test]
        fn cost_is_convex_and_nondecreasing(tariff in arb_tariff()) {
            let n = (tariff.capacity_kw() / 0.1).round() as usize;
            let costs: Vec<f64> = (0..=n)
                .map(|k| segmented_step_cost((k as f64 * 0.1).min(tariff.capacity_kw()), &tariff, 1.0).unwrap().cost_eur)
                .collect();
            for w in costs.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for w in costs.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
        }
    }
}
