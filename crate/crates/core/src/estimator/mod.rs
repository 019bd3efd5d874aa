//! The adaptive histogram estimator.
//!
//! `m_{k,n}` is the resolution-`k` histogram of the first `n` pairs. The
//! stopping time `tau_k` is the first `n > tau_{k-1}` at which
//! `V(m_{k,n}: -i, i) < 4 alpha(i)` for every `1 <= i <= k`, and the estimate
//! after `n` pairs is the histogram frozen at the largest `tau_k <= n`.

mod batch;
mod stream;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::SampleSequence;
use crate::partitions::{cell_of, PartitionError, PiecewiseDyadicFn, VariationBudget};

pub use batch::stopping_times;
pub use stream::{Estimator, EstimatorCheckpoint, EstimatorConfig, EstimatorStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("sample count {n} outside 1..={len}")]
    BadSampleCount { n: usize, len: usize },
    #[error("pair ({x}, {y}) is not finite")]
    NonFinite { x: f64, y: f64 },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("checkpoint does not match the sequence: {0}")]
    CheckpointMismatch(String),
}

/// Per-cell count and running sum of `y`.
///
/// Sums are accumulated with plain `+=` in insertion order so that every
/// path that builds a histogram from the same prefix produces the same bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct CellStat {
    pub count: u64,
    pub y_sum: f64,
}

impl CellStat {
    pub fn add(&mut self, y: f64) {
        self.count += 1;
        self.y_sum += y;
    }

    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.y_sum / self.count as f64
        }
    }
}

pub(crate) fn accumulate(
    pairs: &[(f64, f64)],
    k: u32,
) -> Result<BTreeMap<i64, CellStat>, PartitionError> {
    let mut cells: BTreeMap<i64, CellStat> = BTreeMap::new();
    for &(x, y) in pairs {
        cells.entry(cell_of(x, k)?.j).or_default().add(y);
    }
    Ok(cells)
}

pub(crate) fn to_function<'a>(k: u32, cells: impl IntoIterator<Item = (&'a i64, &'a CellStat)>) -> PiecewiseDyadicFn {
    PiecewiseDyadicFn::from_cells(k, 0.0, cells.into_iter().map(|(&j, s)| (j, s.value())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEstimate {
    pub k: u32,
    pub n: usize,
    pub function: PiecewiseDyadicFn,
}

/// `m_{k,n}`: cell averages of `y` over the first `n` pairs, 0 on empty cells.
pub fn histogram_estimate(
    seq: &SampleSequence,
    k: u32,
    n: usize,
) -> Result<HistogramEstimate, EstimatorError> {
    if n == 0 || n > seq.len() {
        return Err(EstimatorError::BadSampleCount { n, len: seq.len() });
    }
    let cells = accumulate(&seq.pairs()[..n], k)?;
    Ok(HistogramEstimate {
        k,
        n,
        function: to_function(k, &cells),
    })
}

/// True iff `V(f: -i, i) < 4 alpha(i)` for every `1 <= i <= k`.
pub fn variation_check(f: &PiecewiseDyadicFn, budget: &VariationBudget) -> bool {
    (1..=f.resolution()).all(|i| f.total_variation_window(i) < 4.0 * budget.alpha(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_examples() {
        let seq = SampleSequence::new(vec![(0.1, 1.0), (0.3, 0.0), (0.6, 1.0)]).unwrap();
        let h = histogram_estimate(&seq, 1, 3).unwrap();
        assert_eq!(h.function.eval(0.2), 0.5);
        assert_eq!(h.function.eval(0.7), 1.0);
        assert_eq!(h.function.eval(3.0), 0.0);
        let h0 = histogram_estimate(&seq, 0, 3).unwrap();
        assert_eq!(h0.function.eval(-100.0), 2.0 / 3.0);
        assert!(histogram_estimate(&seq, 1, 0).is_err());
        assert!(histogram_estimate(&seq, 1, 4).is_err());
    }

    #[test]
    fn variation_check_examples() {
        let zero = PiecewiseDyadicFn::new(3, 0.0);
        assert!(variation_check(&zero, &VariationBudget::Constant(1e-9)));
        let h2 = PiecewiseDyadicFn::from_cells(2, 0.0, [(1, 1.0), (2, 0.0), (3, 1.0), (4, 0.0)]);
        assert!(!variation_check(&h2, &VariationBudget::Constant(1.0)));
        assert!(variation_check(&h2, &VariationBudget::Constant(1.01)));
    }
}
