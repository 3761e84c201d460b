use serde::{Deserialize, Serialize};

use super::{DispatchError, DispatchStrategy};
use crate::model::PowerProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy_cost_eur: f64,
    pub network_cost_eur: f64,
    pub total_eur: f64,
}

/// Prices a profile under the strategy's signals.
///
/// A flat energy price is not part of any objective, so it contributes nothing here;
/// likewise the network cost is zero when the strategy carries no segmented tariff.
pub fn evaluate_cost(
    profile: &PowerProfile,
    strategy: &DispatchStrategy,
) -> Result<CostBreakdown, DispatchError> {
    let dt = profile.grid.step_hours;
    let energy_cost_eur = match strategy.prices() {
        Some(prices) => {
            let step_prices =
                prices.step_prices(&profile.grid, profile.first_step, profile.power_kw.len())?;
            profile
                .power_kw
                .iter()
                .zip(&step_prices)
                .map(|(p, price)| price * p * dt)
                .sum()
        }
        None => 0.0,
    };
    let network_cost_eur = match strategy.tariff() {
        Some(tariff) => {
            let cap = tariff.capacity_kw();
            let mut total = 0.0;
            for &p in &profile.power_kw {
                if p > cap + 1e-9 {
                    return Err(DispatchError::Model(crate::model::ModelError::PowerOutOfRange {
                        power_kw: p,
                        capacity_kw: cap,
                    }));
                }
                total += tariff.cost_rate(p) * dt;
            }
            total
        }
        None => 0.0,
    };
    Ok(CostBreakdown {
        energy_cost_eur,
        network_cost_eur,
        total_eur: energy_cost_eur + network_cost_eur,
    })
}

/// Value of the quantity each regime optimizes: total cost for the price-driven
/// strategies, and minus the summed cumulative energy for unoptimized charging.
pub fn objective_value(
    profile: &PowerProfile,
    strategy: &DispatchStrategy,
) -> Result<f64, DispatchError> {
    match strategy {
        DispatchStrategy::Unoptimized => Ok(-profile.cumulative_kwh().iter().sum::<f64>()),
        _ => Ok(evaluate_cost(profile, strategy)?.total_eur),
    }
}
