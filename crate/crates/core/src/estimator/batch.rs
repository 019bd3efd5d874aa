use crate::measures::SampleSequence;
use crate::partitions::{cell_of, window_variation, VariationBudget};

use super::{accumulate, EstimatorError};

/// Stopping times `tau_0 = 1 < tau_1 < ...` reached within `seq`, searching
/// resolutions up to `max_resolution`.
///
/// Each candidate `n` is decided by recomputing every window variation from
/// the cell statistics; nothing is carried over between candidates except the
/// statistics themselves.
pub fn stopping_times(
    seq: &SampleSequence,
    budget: &VariationBudget,
    max_resolution: u32,
) -> Result<Vec<usize>, EstimatorError> {
    let pairs = seq.pairs();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let mut tau = vec![1usize];
    for k in 1..=max_resolution {
        let start = *tau.last().expect("tau_0 recorded");
        let mut cells = accumulate(&pairs[..start], k)?;
        let mut found = None;
        for (idx, &(x, y)) in pairs.iter().enumerate().skip(start) {
            cells.entry(cell_of(x, k)?.j).or_default().add(y);
            let passes = (1..=k).all(|i| {
                window_variation(&cells, k, i, 0.0, |s| s.value()) < 4.0 * budget.alpha(i)
            });
            if passes {
                found = Some(idx + 1);
                break;
            }
        }
        match found {
            Some(n) => tau.push(n),
            None => break,
        }
    }
    Ok(tau)
}
