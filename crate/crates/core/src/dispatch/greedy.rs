//! Sorted-fill solvers.
//!
//! Every regime is a linear program whose variables are (step, band) cells with
//! independent upper bounds, coupled only by the total energy constraint. Filling cells
//! in order of unit cost until the demand is met is therefore exact. Bands are priced in
//! nondecreasing order, so within a step the fill is always bottom-up and each band's
//! bound can be computed up front from the session cap.

use super::{DispatchError, DispatchStrategy};
use crate::model::{PowerProfile, PriceSeries, SegmentSplit, SegmentedTariff, SessionWindow};

#[derive(Debug, Clone, Copy)]
struct Cell {
    cost: f64,
    step: u32,
    segment: u32,
    cap_kw: f64,
}

#[derive(Debug, Clone, Copy)]
enum TieBreak {
    /// equal cost: earlier step first, then lower band
    StepThenSegment,
    /// equal cost: lower band first, then earlier step
    SegmentThenStep,
}

/// Charge at full available power from arrival until the demand is met.
pub fn dispatch_unoptimized(window: &SessionWindow) -> PowerProfile {
    let dt = window.grid.step_hours;
    let mut profile = PowerProfile::zeros_for(window);
    let mut remaining = window.energy_kwh;
    for (i, p) in profile.power_kw.iter_mut().enumerate() {
        if remaining <= 0.0 {
            break;
        }
        let cap = window.power_cap_kw(i);
        if cap * dt >= remaining {
            *p = remaining / dt;
            remaining = 0.0;
        } else {
            *p = cap;
            remaining -= cap * dt;
        }
    }
    profile
}

/// Minimum energy cost under hourly prices; ties go to the earliest step.
pub fn dispatch_dynamic(
    window: &SessionWindow,
    prices: &PriceSeries,
) -> Result<PowerProfile, DispatchError> {
    let step_prices = prices.step_prices(&window.grid, window.first_step, window.len())?;
    let cells = (0..window.len())
        .map(|i| Cell {
            cost: step_prices[i],
            step: i as u32,
            segment: 0,
            cap_kw: window.power_cap_kw(i),
        })
        .collect();
    let (power, _) = fill(window, cells, 1, TieBreak::StepThenSegment)?;
    Ok(PowerProfile {
        power_kw: power,
        ..PowerProfile::zeros_for(window)
    })
}

/// Minimum network cost under a segmented tariff with a flat energy price.
///
/// Among equally cheap schedules the one delivering energy earliest is chosen, which
/// is the limit of a vanishing reward on cumulative energy.
pub fn dispatch_segmented_flat(
    window: &SessionWindow,
    tariff: &SegmentedTariff,
) -> Result<PowerProfile, DispatchError> {
    segmented(window, tariff, None, TieBreak::StepThenSegment)
}

/// Minimum combined network and energy cost; ties go to the lower band, then the earlier step.
pub fn dispatch_segmented_dynamic(
    window: &SessionWindow,
    tariff: &SegmentedTariff,
    prices: &PriceSeries,
) -> Result<PowerProfile, DispatchError> {
    let step_prices = prices.step_prices(&window.grid, window.first_step, window.len())?;
    segmented(window, tariff, Some(&step_prices), TieBreak::SegmentThenStep)
}

pub fn dispatch(
    window: &SessionWindow,
    strategy: &DispatchStrategy,
) -> Result<PowerProfile, DispatchError> {
    match strategy {
        DispatchStrategy::Unoptimized => Ok(dispatch_unoptimized(window)),
        DispatchStrategy::DynamicEnergy { prices } => dispatch_dynamic(window, prices),
        DispatchStrategy::SegmentedFlat { tariff } => dispatch_segmented_flat(window, tariff),
        DispatchStrategy::SegmentedDynamic { tariff, prices } => {
            dispatch_segmented_dynamic(window, tariff, prices)
        }
    }
}

fn segmented(
    window: &SessionWindow,
    tariff: &SegmentedTariff,
    step_prices: Option<&[f64]>,
    tie: TieBreak,
) -> Result<PowerProfile, DispatchError> {
    let n_seg = tariff.n_segments();
    let mut cells = Vec::with_capacity(window.len() * n_seg);
    for i in 0..window.len() {
        let session_cap = window.power_cap_kw(i);
        let energy_price = step_prices.map_or(0.0, |p| p[i]);
        let mut floor = 0.0;
        for (s, (w, price)) in tariff.widths_kw().iter().zip(tariff.prices()).enumerate() {
            let cap_kw = (session_cap - floor).clamp(0.0, *w);
            floor += w;
            if cap_kw <= 0.0 {
                break;
            }
            // Energy prices are per kWh like the band prices, so both scale with dt alike.
            cells.push(Cell {
                cost: price + energy_price,
                step: i as u32,
                segment: s as u32,
                cap_kw,
            });
        }
    }
    let (power, split) = fill(window, cells, n_seg, tie)?;
    Ok(PowerProfile {
        power_kw: power,
        segment_power_kw: Some(split),
        ..PowerProfile::zeros_for(window)
    })
}

fn fill(
    window: &SessionWindow,
    mut cells: Vec<Cell>,
    n_seg: usize,
    tie: TieBreak,
) -> Result<(Vec<f64>, SegmentSplit), DispatchError> {
    cells.sort_unstable_by(|a, b| {
        a.cost.total_cmp(&b.cost).then_with(|| match tie {
            TieBreak::StepThenSegment => a.step.cmp(&b.step).then(a.segment.cmp(&b.segment)),
            TieBreak::SegmentThenStep => a.segment.cmp(&b.segment).then(a.step.cmp(&b.step)),
        })
    });

    let dt = window.grid.step_hours;
    let mut power = vec![0.0; window.len()];
    let mut split = vec![0.0; window.len() * n_seg];
    let mut remaining = window.energy_kwh;
    for cell in &cells {
        if remaining <= 0.0 {
            break;
        }
        let p = if cell.cap_kw * dt >= remaining {
            let p = remaining / dt;
            remaining = 0.0;
            p
        } else {
            remaining -= cell.cap_kw * dt;
            cell.cap_kw
        };
        let i = cell.step as usize;
        power[i] += p;
        split[i * n_seg + cell.segment as usize] = p;
    }
    if remaining > 1e-9 {
        return Err(DispatchError::Infeasible {
            session_id: window.session_id.clone(),
            shortfall_kwh: remaining,
        });
    }
    Ok((power, SegmentSplit { n_segments: n_seg, values_kw: split }))
}
