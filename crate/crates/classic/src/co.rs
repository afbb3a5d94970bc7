use nilm_core::model::output_series;
use nilm_core::series::is_gap;
use nilm_core::PowerSeries;

use crate::joint::JointStateIndex;
use crate::states::ApplianceStateModel;
use crate::{ClassicError, Result};

pub const DEFAULT_CO_CAP: usize = 4096;

/// Flat joint state chosen at each time step: the one whose level sum is
/// closest to the aggregate, smallest flat index on ties.
pub fn co_states(aggregate: &[f64], models: &[ApplianceStateModel], cap: usize) -> Result<(JointStateIndex, Vec<usize>)> {
    let sizes: Vec<usize> = models.iter().map(|m| m.k()).collect();
    let index = JointStateIndex::new(&sizes, cap)?;
    let table = index.table();
    let n = models.len();
    let sums: Vec<f64> = (0..index.len())
        .map(|f| {
            models
                .iter()
                .zip(&table[f * n..(f + 1) * n])
                .map(|(m, &s)| m.levels()[s])
                .sum()
        })
        .collect();
    let mut chosen = Vec::with_capacity(aggregate.len());
    for &y in aggregate {
        if is_gap(y) {
            return Err(ClassicError::Gaps);
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (f, s) in sums.iter().enumerate() {
            let d = (y - s).abs();
            if d < best_d {
                best = f;
                best_d = d;
            }
        }
        chosen.push(best);
    }
    Ok((index, chosen))
}

/// Combinatorial-optimization disaggregation. Returns one series per model,
/// labelled like the model, holding that appliance's chosen level.
pub fn co_disaggregate(aggregate: &PowerSeries, models: &[ApplianceStateModel], cap: usize) -> Result<Vec<PowerSeries>> {
    let (index, chosen) = co_states(aggregate.values(), models, cap)?;
    levels_to_series(aggregate, models, &index, &chosen)
}

pub(crate) fn levels_to_series(
    aggregate: &PowerSeries,
    models: &[ApplianceStateModel],
    index: &JointStateIndex,
    flat_path: &[usize],
) -> Result<Vec<PowerSeries>> {
    let table = index.table();
    let n = models.len();
    models
        .iter()
        .enumerate()
        .map(|(a, m)| {
            let values = flat_path.iter().map(|&f| m.levels()[table[f * n + a]]).collect();
            Ok(output_series(aggregate, m.label(), values)?)
        })
        .collect()
}
