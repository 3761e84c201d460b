use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::model::{PriceSeries, SegmentedTariff};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyTag {
    Unoptimized,
    DynamicEnergy,
    SegmentedFlat,
    SegmentedDynamic,
}

impl StrategyTag {
    pub fn needs_tariff(self) -> bool {
        matches!(self, Self::SegmentedFlat | Self::SegmentedDynamic)
    }

    pub fn needs_prices(self) -> bool {
        matches!(self, Self::DynamicEnergy | Self::SegmentedDynamic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unoptimized => "unoptimized",
            Self::DynamicEnergy => "dynamic_energy",
            Self::SegmentedFlat => "segmented_flat",
            Self::SegmentedDynamic => "segmented_dynamic",
        }
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyTag {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unoptimized" | "Unopt" => Ok(Self::Unoptimized),
            "dynamic_energy" | "DE" => Ok(Self::DynamicEnergy),
            "segmented_flat" => Ok(Self::SegmentedFlat),
            "segmented_dynamic" => Ok(Self::SegmentedDynamic),
            other => Err(DispatchError::Strategy(format!("unknown strategy '{other}'"))),
        }
    }
}

/// A dispatch regime together with the price signals it responds to.
///
/// Energy prices are shared between strategies and across threads, hence the `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub enum DispatchStrategy {
    Unoptimized,
    DynamicEnergy {
        prices: Arc<PriceSeries>,
    },
    SegmentedFlat {
        tariff: SegmentedTariff,
    },
    SegmentedDynamic {
        tariff: SegmentedTariff,
        prices: Arc<PriceSeries>,
    },
}

impl DispatchStrategy {
    pub fn from_parts(
        tag: StrategyTag,
        tariff: Option<SegmentedTariff>,
        prices: Option<Arc<PriceSeries>>,
    ) -> Result<Self, DispatchError> {
        let missing = |what: &str| DispatchError::Strategy(format!("{tag} requires {what}"));
        Ok(match tag {
            StrategyTag::Unoptimized => Self::Unoptimized,
            StrategyTag::DynamicEnergy => Self::DynamicEnergy {
                prices: prices.ok_or_else(|| missing("energy prices"))?,
            },
            StrategyTag::SegmentedFlat => Self::SegmentedFlat {
                tariff: tariff.ok_or_else(|| missing("a segmented tariff"))?,
            },
            StrategyTag::SegmentedDynamic => Self::SegmentedDynamic {
                tariff: tariff.ok_or_else(|| missing("a segmented tariff"))?,
                prices: prices.ok_or_else(|| missing("energy prices"))?,
            },
        })
    }

    pub fn tag(&self) -> StrategyTag {
        match self {
            Self::Unoptimized => StrategyTag::Unoptimized,
            Self::DynamicEnergy { .. } => StrategyTag::DynamicEnergy,
            Self::SegmentedFlat { .. } => StrategyTag::SegmentedFlat,
            Self::SegmentedDynamic { .. } => StrategyTag::SegmentedDynamic,
        }
    }

    pub fn tariff(&self) -> Option<&SegmentedTariff> {
        match self {
            Self::SegmentedFlat { tariff } | Self::SegmentedDynamic { tariff, .. } => Some(tariff),
            _ => None,
        }
    }

    pub fn prices(&self) -> Option<&Arc<PriceSeries>> {
        match self {
            Self::DynamicEnergy { prices } | Self::SegmentedDynamic { prices, .. } => Some(prices),
            _ => None,
        }
    }
}
