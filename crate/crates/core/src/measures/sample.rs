use super::piecewise::compensated_prefix;
use super::{Interval, MeasureError};

/// A finite prefix `(x_1, y_1), ..., (x_n, y_n)` of an individual sequence.
///
/// Insertion order is kept as-is; a stable sort by `x` and compensated
/// prefix sums of `y` in that order answer interval queries with two binary
/// searches.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pairs: Vec<(f64, f64)>,
    order: Vec<usize>,
    sorted_x: Vec<f64>,
    y_prefix: Vec<f64>,
}

impl SampleSequence {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if let Some(index) = pairs
            .iter()
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(MeasureError::NonFiniteSample { index });
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&i, &j| pairs[i].0.total_cmp(&pairs[j].0));
        let sorted_x = order.iter().map(|&i| pairs[i].0).collect();
        let y_prefix = compensated_prefix(order.iter().map(|&i| pairs[i].1));
        Ok(SampleSequence {
            pairs,
            order,
            sorted_x,
            y_prefix,
        })
    }

    pub fn empty() -> Self {
        SampleSequence::new(Vec::new()).expect("empty sequence is valid")
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(f64, f64)> {
        self.pairs
    }

    /// Positions of the pairs sorted by `x`, ties kept in insertion order.
    pub fn sorted_index(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted_x(&self) -> &[f64] {
        &self.sorted_x
    }

    /// `y_prefix()[j]` is the sum of the first `j` y-values in sorted-x order.
    pub fn y_prefix(&self) -> &[f64] {
        &self.y_prefix
    }

    /// The first `m` pairs as a new sequence.
    pub fn prefix(&self, m: usize) -> SampleSequence {
        SampleSequence::new(self.pairs[..m.min(self.len())].to_vec())
            .expect("prefix of a valid sequence")
    }

    fn rank_range(&self, interval: Interval) -> (usize, usize) {
        let lo = match interval {
            Interval::UpTo { .. } => 0,
            Interval::Between { a, .. } => self.sorted_x.partition_point(|&x| x <= a),
        };
        let hi = self.sorted_x.partition_point(|&x| x <= interval.upper());
        (lo, hi.max(lo))
    }

    /// Number of sample points in the interval.
    pub fn count_in(&self, interval: Interval) -> usize {
        let (lo, hi) = self.rank_range(interval);
        hi - lo
    }

    /// Relative frequency of the interval among the pairs.
    pub fn empirical_mass(&self, interval: Interval) -> Result<f64, MeasureError> {
        if self.is_empty() {
            return Err(MeasureError::EmptySequence);
        }
        Ok(self.count_in(interval) as f64 / self.len() as f64)
    }

    /// `(1/n) * sum of y_i over x_i in the interval`.
    pub fn empirical_weighted_mass(&self, interval: Interval) -> Result<f64, MeasureError> {
        if self.is_empty() {
            return Err(MeasureError::EmptySequence);
        }
        let (lo, hi) = self.rank_range(interval);
        Ok((self.y_prefix[hi] - self.y_prefix[lo]) / self.len() as f64)
    }

    /// Relative frequency of the singleton `{u}`.
    pub fn atom_frequency(&self, u: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let lo = self.sorted_x.partition_point(|&x| x < u);
        let hi = self.sorted_x.partition_point(|&x| x <= u);
        (hi - lo) as f64 / self.len() as f64
    }

    /// `(1/n) * sum of y_i over x_i == u`.
    pub fn atom_weighted_frequency(&self, u: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let lo = self.sorted_x.partition_point(|&x| x < u);
        let hi = self.sorted_x.partition_point(|&x| x <= u);
        (self.y_prefix[hi] - self.y_prefix[lo]) / self.len() as f64
    }
}
