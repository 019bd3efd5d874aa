/// A finite signed measure on the line: point masses plus an absolutely
/// continuous part whose density is affine on each of finitely many disjoint
/// half-open pieces `(lo, hi]`.
///
/// Cumulative values are answered by binary search over compensated prefix
/// sums, so every query is `O(log size)`.
#[derive(Debug, Clone)]
pub(crate) struct PiecewiseMeasure {
    points: Vec<(f64, f64)>,
    point_prefix: Vec<f64>,
    pieces: Vec<Piece>,
    piece_prefix: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    g_lo: f64,
    g_hi: f64,
}

impl Piece {
    /// Integral of the density over `(lo, t]` for `lo <= t <= hi`.
    fn partial(&self, t: f64) -> f64 {
        if t >= self.hi {
            return self.full();
        }
        let len = t - self.lo;
        let g_t = self.g_lo + (self.g_hi - self.g_lo) * (len / (self.hi - self.lo));
        0.5 * len * (self.g_lo + g_t)
    }

    fn full(&self) -> f64 {
        0.5 * (self.hi - self.lo) * (self.g_lo + self.g_hi)
    }
}

/// Neumaier-compensated running sums; `out[i]` is the sum of the first `i` terms.
pub(crate) fn compensated_prefix(terms: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let terms = terms.into_iter();
    let mut out = Vec::with_capacity(terms.size_hint().0 + 1);
    out.push(0.0);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
        out.push(sum + comp);
    }
    out
}

impl PiecewiseMeasure {
    /// `points`: `(location, weight)`; `pieces`: `(lo, hi, density at lo+, density at hi-)`.
    /// Both lists must be sorted, pieces disjoint.
    pub(crate) fn new(mut points: Vec<(f64, f64)>, pieces: Vec<(f64, f64, f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pieces: Vec<Piece> = pieces
            .into_iter()
            .filter(|p| p.0 < p.1)
            .map(|(lo, hi, g_lo, g_hi)| Piece { lo, hi, g_lo, g_hi })
            .collect();
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let point_prefix = compensated_prefix(points.iter().map(|p| p.1));
        let piece_prefix = compensated_prefix(pieces.iter().map(Piece::full));
        PiecewiseMeasure {
            points,
            point_prefix,
            pieces,
            piece_prefix,
        }
    }

    fn continuous_upto(&self, t: f64) -> f64 {
        let full = self.pieces.partition_point(|p| p.hi <= t);
        let mut acc = self.piece_prefix[full];
        if let Some(p) = self.pieces.get(full) {
            if p.lo < t {
                acc += p.partial(t);
            }
        }
        acc
    }

    /// Measure of `(-inf, t]`.
    pub(crate) fn cumulative(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= t);
        self.point_prefix[k] + self.continuous_upto(t)
    }

    /// Measure of `(-inf, t)`.
    pub(crate) fn cumulative_left(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 < t);
        self.point_prefix[k] + self.continuous_upto(t)
    }

    pub(crate) fn mass(&self, interval: super::Interval) -> f64 {
        let hi = self.cumulative(interval.upper());
        match interval {
            super::Interval::UpTo { .. } => hi,
            super::Interval::Between { a, .. } => hi - self.cumulative(a),
        }
    }

    #[cfg(test)]
    pub(crate) fn total(&self) -> f64 {
        self.point_prefix[self.points.len()] + self.piece_prefix[self.pieces.len()]
    }

    /// Sorted, deduplicated locations where the cumulative function can jump
    /// or change its piecewise form. Between consecutive knots the cumulative
    /// is continuous and monotone.
    pub(crate) fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.points.iter().map(|p| p.0).collect();
        for p in &self.pieces {
            k.push(p.lo);
            k.push(p.hi);
        }
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}
