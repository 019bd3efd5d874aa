//! Supremum discrepancies between empirical and target measures over the
//! interval class.
//!
//! With `D(t) = G_n(t) - G(t)` (empirical minus target cumulative, both
//! right-continuous), `sup over (a, b] of |D(b) - D(a)|` with `a` possibly
//! `-inf` is `max D - min D` taken over `0` (the value at `-inf`), the values
//! `D(c)` and the left limits `D(c-)` at every sample point and every knot of
//! the target. Between consecutive candidates `D` is continuous and monotone,
//! so nothing else can be extremal. The supremum may be approached without
//! being attained, which is exactly what the left limits capture.

use super::{DistributionModel, MeasureError, PiecewiseMeasure, SampleSequence, SignedMeasureModel};

/// How the empirical cumulative over the first `i` sorted samples is formed.
#[derive(Clone, Copy)]
enum EmpiricalCumulative<'a> {
    /// `i / n`.
    Frequency,
    /// `prefix[i] / n` with `prefix` the sorted-order y prefix sums.
    Weighted(&'a [f64]),
}

impl EmpiricalCumulative<'_> {
    fn at(&self, i: usize, n: f64) -> f64 {
        match self {
            EmpiricalCumulative::Frequency => i as f64 / n,
            EmpiricalCumulative::Weighted(p) => p[i] / n,
        }
    }
}

/// Returns `(min D, max D)` over the candidate set, both including 0.
fn extremes(sorted_x: &[f64], emp: EmpiricalCumulative<'_>, target: &PiecewiseMeasure) -> (f64, f64) {
    let n = sorted_x.len();
    let nf = n as f64;
    let knots = target.knots();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let (mut j, mut k) = (0usize, 0usize);
    loop {
        let c = match (sorted_x.get(j), knots.get(k)) {
            (Some(&x), Some(&q)) => x.min(q),
            (Some(&x), None) => x,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        // All samples before index j are strictly below c.
        let below = j;
        while j < n && sorted_x[j] <= c {
            j += 1;
        }
        if k < knots.len() && knots[k] == c {
            k += 1;
        }
        let left = emp.at(below, nf) - target.cumulative_left(c);
        let right = emp.at(j, nf) - target.cumulative(c);
        lo = lo.min(left).min(right);
        hi = hi.max(left).max(right);
    }
    (lo, hi)
}

fn sup_discrepancy_sorted(
    sorted_x: &[f64],
    emp: EmpiricalCumulative<'_>,
    target: &PiecewiseMeasure,
) -> f64 {
    let (lo, hi) = extremes(sorted_x, emp, target);
    hi - lo
}

/// `sup over A of |mu_n(A) - mu(A)|`.
pub fn sup_interval_discrepancy(
    seq: &SampleSequence,
    model: &DistributionModel,
) -> Result<f64, MeasureError> {
    if seq.is_empty() {
        return Err(MeasureError::EmptySequence);
    }
    Ok(sup_discrepancy_sorted(
        seq.sorted_x(),
        EmpiricalCumulative::Frequency,
        model.measure(),
    ))
}

/// `sup over A of |nu_n(A) - nu(A)|`.
pub fn sup_weighted_discrepancy(
    seq: &SampleSequence,
    target: &SignedMeasureModel,
) -> Result<f64, MeasureError> {
    if seq.is_empty() {
        return Err(MeasureError::EmptySequence);
    }
    Ok(sup_discrepancy_sorted(
        seq.sorted_x(),
        EmpiricalCumulative::Weighted(seq.y_prefix()),
        target.measure(),
    ))
}

/// One-sided class only: `sup over t of |F_n(t) - F(t)|`, including left limits.
pub fn kolmogorov_distance(
    seq: &SampleSequence,
    model: &DistributionModel,
) -> Result<f64, MeasureError> {
    if seq.is_empty() {
        return Err(MeasureError::EmptySequence);
    }
    let (lo, hi) = extremes(seq.sorted_x(), EmpiricalCumulative::Frequency, model.measure());
    Ok(hi.max(-lo))
}

/// Lévy distance between the empirical CDF and the model CDF.
///
/// This metrizes convergence of `F_n(t)` to `F(t)` at continuity points of
/// `F` and, unlike the sup distances above, does not require atoms of the
/// model to be hit exactly.
pub fn levy_distance(seq: &SampleSequence, model: &DistributionModel) -> Result<f64, MeasureError> {
    if seq.is_empty() {
        return Err(MeasureError::EmptySequence);
    }
    let xs = seq.sorted_x();
    let n = xs.len() as f64;
    // Distinct sample values with the empirical CDF just after each.
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        if i + 1 == xs.len() || xs[i + 1] != x {
            steps.push((x, (i + 1) as f64 / n));
        }
    }
    // The condition F(t - e) - e <= F_n(t) <= F(t + e) + e for all t reduces to
    // the left end of each constant stretch of F_n (upper bound) and the right
    // end of each stretch (lower bound).
    let violates = |e: f64| -> bool {
        let mut prev = 0.0;
        for &(x, fx) in &steps {
            if fx - model.cdf(x + e) > e {
                return true;
            }
            if model.cdf_left(x - e) - prev > e {
                return true;
            }
            prev = fx;
        }
        false
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    if !violates(0.0) {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if violates(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Interval;
    use crate::regression::RegressionModel;

    fn xs(v: &[f64]) -> SampleSequence {
        SampleSequence::new(v.iter().map(|&x| (x, 0.0)).collect()).unwrap()
    }

    /// Candidate endpoints: -inf, every sample and knot, each nudged by +-`eps`.
    fn grid(seq: &SampleSequence, extra: &[f64], eps: f64) -> Vec<f64> {
        let mut g = vec![f64::NEG_INFINITY];
        for &p in seq.sorted_x().iter().chain(extra) {
            g.extend([p - eps, p, p + eps]);
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    fn brute(seq: &SampleSequence, extra: &[f64], f: impl Fn(Interval) -> f64) -> f64 {
        let g = grid(seq, extra, 1e-12);
        let mut best = 0.0f64;
        for (i, &a) in g.iter().enumerate() {
            for &b in &g[i + 1..] {
                let iv = if a == f64::NEG_INFINITY {
                    Interval::up_to(b)
                } else {
                    Interval::between(a, b).unwrap()
                };
                best = best.max(f(iv).abs());
            }
        }
        best
    }

    #[test]
    fn interval_discrepancy_examples() {
        let u = DistributionModel::lebesgue();
        let s = xs(&[0.1, 0.2, 0.9]);
        let d = sup_interval_discrepancy(&s, &u).unwrap();
        let oracle = brute(&s, &[0.0, 1.0], |a| s.empirical_mass(a).unwrap() - a_len(a));
        assert!((d - 0.7).abs() < 1e-12, "{d}");
        assert!((oracle - 0.7).abs() < 1e-9, "{oracle}");

        let eq: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let s = xs(&eq);
        assert!((sup_interval_discrepancy(&s, &u).unwrap() - 0.2).abs() < 1e-12);

        let s = xs(&[0.5]);
        let pm = DistributionModel::point_mass(0.5).unwrap();
        assert_eq!(sup_interval_discrepancy(&s, &pm).unwrap(), 0.0);
    }

    fn a_len(a: Interval) -> f64 {
        let lo = a.lower().max(0.0);
        let hi = a.upper().min(1.0);
        (hi - lo).max(0.0)
    }

    #[test]
    fn weighted_discrepancy_examples() {
        let lambda = DistributionModel::lebesgue();
        let nu1 = SignedMeasureModel::new(lambda.clone(), RegressionModel::Rademacher { k: 1 });
        let s = SampleSequence::new(vec![(0.1, 1.0), (0.6, 0.0)]).unwrap();
        let d = sup_weighted_discrepancy(&s, &nu1).unwrap();
        let oracle = brute(&s, &[0.0, 0.5, 1.0], |a| {
            s.empirical_weighted_mass(a).unwrap() - nu1.nu(a)
        });
        assert!((oracle - 0.5).abs() < 1e-9, "{oracle}");
        assert!((d - 0.5).abs() < 1e-12, "{d}");

        let zero = SignedMeasureModel::new(lambda.clone(), RegressionModel::Constant { value: 0.0 });
        let s0 = SampleSequence::new(vec![(0.3, 0.0), (0.7, 0.0)]).unwrap();
        assert_eq!(sup_weighted_discrepancy(&s0, &zero).unwrap(), 0.0);

        let nu0 = SignedMeasureModel::new(lambda, RegressionModel::Rademacher { k: 0 });
        let s = SampleSequence::new(vec![(0.5, 1.0)]).unwrap();
        let oracle = brute(&s, &[0.0, 1.0], |a| {
            s.empirical_weighted_mass(a).unwrap() - nu0.nu(a)
        });
        assert!((oracle - 1.0).abs() < 1e-9);
        assert!((sup_weighted_discrepancy(&s, &nu0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_is_dominated() {
        let u = DistributionModel::lebesgue();
        let s = xs(&[0.1, 0.2, 0.9]);
        let k = kolmogorov_distance(&s, &u).unwrap();
        assert!((k - 0.4666666666666667).abs() < 1e-12);
        assert!(k <= sup_interval_discrepancy(&s, &u).unwrap());
    }

    #[test]
    fn levy_distance_of_receding_points() {
        // x_i = -1/(i+1) against the point mass at 0: the Lévy distance at n = 100 is 1/11.
        let s = xs(&(1..=100).map(|i| -1.0 / (i as f64 + 1.0)).collect::<Vec<_>>());
        let pm = DistributionModel::point_mass(0.0).unwrap();
        let l = levy_distance(&s, &pm).unwrap();
        assert!((l - 1.0 / 11.0).abs() < 1e-12, "{l}");
        assert_eq!(sup_interval_discrepancy(&s, &pm).unwrap(), 1.0);
        assert_eq!(levy_distance(&xs(&[0.0]), &pm).unwrap(), 0.0);
    }
}
