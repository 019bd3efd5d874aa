//! Largest index where a prefix discrepancy exceeds a threshold, without
//! evaluating every prefix.
//!
//! Let `e(m)` be `sup over A of |mu_m(A) - mu(A)|` for the first `m` points,
//! where each point moves `m * (mu_m(A) - mu(A))` by at most 1 in absolute
//! value (points have weights in `[0, 1]` and `mu(A)` lies in `[0, 1]`). Then
//! for `m < m'` both `m' e(m') <= m e(m) + (m' - m)` and
//! `m e(m) <= m' e(m') + (m' - m)` hold. Given exact values at both ends of
//! `[lo, hi]`, every `e(m)` inside is bounded by the smaller of the two
//! resulting bounds; intervals whose bound stays below the threshold are
//! certified, the rest are bisected with their midpoints evaluated exactly.

use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest `m` in the range with `e(m) > threshold`, if any.
    pub last_violation: Option<usize>,
    /// Largest exactly evaluated value.
    pub max_evaluated: f64,
    /// Number of exact evaluations spent.
    pub evaluations: usize,
}

/// Upper bound on `e` over the open range `(lo, hi)` from the end values.
fn interior_bound(lo: usize, e_lo: f64, hi: usize, e_hi: f64) -> f64 {
    let (l, h) = (lo as f64, hi as f64);
    // forward(m) = (l e_lo + m - l) / m increases with m,
    // backward(m) = (h e_hi + h - m) / m decreases with m.
    let cross = 0.5 * (h * e_hi + h - l * e_lo + l);
    let m = cross.clamp(l, h);
    let forward = (l * e_lo + m - l) / m;
    let backward = (h * e_hi + h - m) / m;
    forward.min(backward)
}

/// Finds the largest `m` in `[lo, hi]` with `eval(m) > threshold`.
///
/// `eval` must be exact (up to rounding) and satisfy the unit-step bounds
/// above. Evaluations at each bisection level run across threads when
/// `exec` allows.
pub fn last_exceedance<F>(lo: usize, hi: usize, threshold: f64, exec: Execution, eval: F) -> Certificate
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    assert!(1 <= lo && lo <= hi, "range must be 1 <= lo <= hi");
    let e_hi = eval(hi);
    let mut evaluations = 1;
    let mut max_evaluated = e_hi;
    if e_hi > threshold {
        return Certificate {
            last_violation: Some(hi),
            max_evaluated,
            evaluations,
        };
    }
    let e_lo = if lo == hi {
        e_hi
    } else {
        evaluations += 1;
        eval(lo)
    };
    max_evaluated = max_evaluated.max(e_lo);
    let mut found = (e_lo > threshold).then_some(lo);
    // Open ranges still to be certified, each with exact values at its ends.
    let mut open = vec![(lo, e_lo, hi, e_hi)];
    while !open.is_empty() {
        open.retain(|&(l, el, h, eh)| {
            h - l > 1 && found.is_none_or(|f| h > f + 1) && interior_bound(l, el, h, eh) > threshold
        });
        if open.is_empty() {
            break;
        }
        let mids: Vec<usize> = open.iter().map(|&(l, _, h, _)| l + (h - l) / 2).collect();
        let values = par::map_slice(exec, &mids, |&m| eval(m));
        evaluations += mids.len();
        let mut next = Vec::with_capacity(2 * open.len());
        for (&(l, el, h, eh), (&m, &em)) in open.iter().zip(mids.iter().zip(&values)) {
            max_evaluated = max_evaluated.max(em);
            if em > threshold {
                found = Some(found.map_or(m, |f| f.max(m)));
            }
            next.push((l, el, m, em));
            next.push((m, em, h, eh));
        }
        open = next;
    }
    Certificate {
        last_violation: found,
        max_evaluated,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(lo: usize, hi: usize, thr: f64, e: &dyn Fn(usize) -> f64) -> Option<usize> {
        (lo..=hi).rev().find(|&m| e(m) > thr)
    }

    /// Exact star discrepancy of the first m points of a fixed sequence.
    fn star(xs: &[f64], m: usize) -> f64 {
        let mut v = xs[..m].to_vec();
        v.sort_by(f64::total_cmp);
        let n = m as f64;
        let mut hi = 0.0f64;
        let mut lo = 0.0f64;
        for (i, &x) in v.iter().enumerate() {
            hi = hi.max((i + 1) as f64 / n - x);
            lo = lo.min(i as f64 / n - x);
        }
        hi - lo
    }

    #[test]
    fn agrees_with_brute_force() {
        let xs: Vec<f64> = (1..=600u64)
            .map(|i| ((i as f64) * 0.618_033_988_749_895 + (i % 7) as f64 * 0.01).fract())
            .collect();
        for thr in [0.02, 0.05, 0.1, 0.3] {
            let e = |m: usize| star(&xs, m);
            let cert = last_exceedance(1, 600, thr, Execution::Sequential, e);
            assert_eq!(cert.last_violation, brute(1, 600, thr, &e), "thr={thr}");
            assert!(cert.evaluations <= 600);
        }
    }

    #[test]
    fn spike_is_found() {
        // m e(m) is 1-Lipschitz in m, as the bounds require.
        let e = |m: usize| (1.0 + (10.0 - (m as f64 - 37.0).abs()).max(0.0)) / m as f64;
        let cert = last_exceedance(1, 1000, 0.25, Execution::Sequential, e);
        assert_eq!(cert.last_violation, brute(1, 1000, 0.25, &e));
        assert_eq!(cert.last_violation, Some(38));
    }

    #[test]
    fn modes_agree() {
        let xs: Vec<f64> = (1..=2000u64).map(|i| (i as f64 * 0.7548776662466927).fract()).collect();
        let e = |m: usize| star(&xs, m);
        let a = last_exceedance(1, 2000, 0.01, Execution::Sequential, e);
        let b = last_exceedance(1, 2000, 0.01, Execution::Parallel, e);
        assert_eq!(a, b);
    }
}
