//! L2(mu) error functionals and consistency curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{Estimator, EstimatorConfig, EstimatorError, EstimatorStatus};
use crate::generators::{GeneratorError, GeneratorSpec};
use crate::measures::DistributionModel;
use crate::par::{self, Execution};
use crate::partitions::PiecewiseDyadicFn;
use crate::regression::{Piecewise, RegressionModel};

/// Relative agreement required between a quadrature and its refinement.
pub const QUADRATURE_TOLERANCE: f64 = 1e-3;
const QUADRATURE_CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("quadrature cell count {0} must be a power of two >= 1024")]
    BadCells(usize),
    #[error("checkpoints must be increasing, positive and at most {len}")]
    BadCheckpoints { len: usize },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// `integral (f - g)^2 d(mu)` for two piecewise functions, exact up to rounding.
///
/// Between consecutive breakpoints of `f`, `g` and the density of `mu` the
/// integrand is a polynomial of degree at most 2, which two-point
/// Gauss-Legendre integrates exactly using interior nodes only.
pub fn l2_distance_exact<F, G>(f: &F, g: &G, mu: &DistributionModel) -> f64
where
    F: Piecewise + ?Sized,
    G: Piecewise + ?Sized,
{
    let diff2 = |x: f64| {
        let d = f.eval(x) - g.eval(x);
        d * d
    };
    let node = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for a in mu.atoms() {
        total += a.mass * diff2(a.location);
    }
    for s in mu.segments() {
        let mut cuts = vec![s.a, s.b];
        cuts.extend(f.breakpoints_in(s.a, s.b));
        cuts.extend(g.breakpoints_in(s.a, s.b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mid, len) = (0.5 * (lo + hi), hi - lo);
            total += s.density * 0.5 * len * (diff2(mid - node * len) + diff2(mid + node * len));
        }
    }
    total
}

/// `integral (est - m)^2 d(mu)`, exact.
pub fn l2_error_exact(est: &PiecewiseDyadicFn, m: &RegressionModel, mu: &DistributionModel) -> f64 {
    l2_distance_exact(est, m, mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    /// Midpoint rule with the requested number of cells per segment.
    pub coarse: f64,
    /// Same with twice as many cells.
    pub fine: f64,
    pub converged: bool,
}

impl Quadrature {
    pub fn value(&self) -> f64 {
        self.fine
    }
}

fn midpoint(
    diff2: &(dyn Fn(f64) -> f64 + Sync),
    mu: &DistributionModel,
    cells: usize,
    exec: Execution,
) -> f64 {
    let mut total: f64 = mu.atoms().iter().map(|a| a.mass * diff2(a.location)).sum();
    for s in mu.segments() {
        let h = (s.b - s.a) / cells as f64;
        let sum = par::sum_chunked(exec, cells, QUADRATURE_CHUNK, |j| {
            diff2(s.a + (j as f64 + 0.5) * h)
        });
        total += s.density * h * sum;
    }
    total
}

/// `integral (est - m)^2 d(mu)` for black-box functions: composite midpoint
/// rule on `cells` uniform cells per density segment, exact on atoms, checked
/// against the rule with `2 * cells`.
pub fn l2_error_quadrature(
    est: &(dyn Fn(f64) -> f64 + Sync),
    m: &(dyn Fn(f64) -> f64 + Sync),
    mu: &DistributionModel,
    cells: usize,
    exec: Execution,
) -> Result<Quadrature, EvaluationError> {
    if cells < 1024 || !cells.is_power_of_two() {
        return Err(EvaluationError::BadCells(cells));
    }
    let diff2 = |x: f64| {
        let d = est(x) - m(x);
        d * d
    };
    let coarse = midpoint(&diff2, mu, cells, exec);
    let fine = midpoint(&diff2, mu, 2 * cells, exec);
    let converged = (coarse - fine).abs() <= QUADRATURE_TOLERANCE * fine.abs().max(1e-12);
    Ok(Quadrature {
        coarse,
        fine,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub kappa: u32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub generator: GeneratorSpec,
    pub estimator: EstimatorConfig,
    pub seed: u64,
    /// Set when the estimator stalled; the curve stops at the first checkpoint
    /// reached while stalled.
    pub stalled_at: Option<usize>,
    /// Stopping times reached over the whole run.
    pub tau: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub rows: Vec<CurveRow>,
    pub meta: CurveMeta,
}

/// Powers of two from 1 up to `n`.
pub fn power_of_two_checkpoints(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |&c| c.checked_mul(2))
        .take_while(|&c| c <= n)
        .collect()
}

/// Generates `spec` once, streams it through the estimator and records the
/// exact error of the fixed-sample estimate at each checkpoint.
pub fn consistency_curve(
    spec: &GeneratorSpec,
    config: &EstimatorConfig,
    checkpoints: &[usize],
) -> Result<ErrorCurve, EvaluationError> {
    let generated = spec.generate()?;
    let pairs = generated.sequence.pairs();
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.first().is_some_and(|&c| c == 0)
        || checkpoints.last().is_some_and(|&c| c > pairs.len())
    {
        return Err(EvaluationError::BadCheckpoints { len: pairs.len() });
    }
    let mut est = Estimator::new(config.clone());
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut stalled_at = None;
    let mut fed = 0;
    for &c in checkpoints {
        est.ingest_all(&pairs[fed..c])?;
        fed = c;
        let f = est.fixed_sample_estimate(c)?;
        rows.push(CurveRow {
            n: c,
            kappa: est.kappa(c)?,
            error: l2_error_exact(f, &generated.regression, &generated.distribution),
        });
        if let EstimatorStatus::Stalled { .. } = est.status() {
            stalled_at = Some(c);
            break;
        }
    }
    Ok(ErrorCurve {
        rows,
        meta: CurveMeta {
            generator: spec.clone(),
            estimator: config.clone(),
            seed: spec.seed,
            stalled_at,
            tau: est.tau().to_vec(),
        },
    })
}

/// Consistency curves for each seed, run across threads when `exec` allows.
pub fn sweep(
    spec: &GeneratorSpec,
    config: &EstimatorConfig,
    checkpoints: &[usize],
    seeds: &[u64],
    exec: Execution,
) -> Vec<Result<ErrorCurve, EvaluationError>> {
    par::map_slice(exec, seeds, |&seed| {
        let mut s = spec.clone();
        s.seed = seed;
        consistency_curve(&s, config, checkpoints)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;
    use crate::partitions::VariationBudget;

    fn h(k: u32) -> RegressionModel {
        RegressionModel::Rademacher { k }
    }

    #[test]
    fn exact_examples() {
        let lambda = DistributionModel::lebesgue();
        let half = PiecewiseDyadicFn::constant(0.5);
        assert!((l2_error_exact(&half, &h(1), &lambda) - 0.25).abs() < 1e-15);
        let h1 = PiecewiseDyadicFn::from_cells(1, 0.0, [(1, 1.0), (2, 0.0)]);
        // h_1 as a dyadic function differs from the Rademacher function only at cell boundaries.
        assert!(l2_error_exact(&h1, &h(1), &lambda).abs() < 1e-15);
        assert!((l2_error_exact(&h1, &h(2), &lambda) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_handles_linear_and_atoms() {
        let id = RegressionModel::Linear {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
        };
        let zero = PiecewiseDyadicFn::new(0, 0.0);
        assert!((l2_error_exact(&zero, &id, &DistributionModel::lebesgue()) - 1.0 / 3.0).abs() < 1e-15);
        let pm = DistributionModel::point_mass(0.5).unwrap();
        assert_eq!(l2_error_exact(&zero, &id, &pm), 0.25);
    }

    #[test]
    fn quadrature_examples() {
        let lambda = DistributionModel::lebesgue();
        let q = l2_error_quadrature(
            &|x| crate::adversary::rademacher_eval(1, x),
            &|x| crate::adversary::rademacher_eval(3, x),
            &lambda,
            1 << 16,
            Execution::default(),
        )
        .unwrap();
        assert!((q.value() - 0.5).abs() < 1e-6 && q.converged);
        let q = l2_error_quadrature(&|x| x, &|_| 0.0, &lambda, 1 << 16, Execution::Sequential).unwrap();
        assert!((q.value() - 1.0 / 3.0).abs() < 1e-6);
        let q = l2_error_quadrature(&|_| 0.3, &|_| 0.3, &lambda, 1024, Execution::Sequential).unwrap();
        assert_eq!(q.value(), 0.0);
        assert!(q.converged);
        assert!(l2_error_quadrature(&|_| 0.0, &|_| 0.0, &lambda, 1000, Execution::Sequential).is_err());
    }

    #[test]
    fn constant_target_errs_only_on_empty_cells() {
        let m = RegressionModel::Constant { value: 0.3 };
        let seq = crate::generators::gen_deterministic(&m, 256).unwrap();
        let mut est = Estimator::new(EstimatorConfig::new(VariationBudget::Constant(1.0)));
        est.ingest_all(seq.pairs()).unwrap();
        let lambda = DistributionModel::lebesgue();
        for n in power_of_two_checkpoints(256) {
            let f = est.fixed_sample_estimate(n).unwrap();
            let k = f.resolution();
            let empty = if k == 0 {
                0
            } else {
                (1..=1i64 << k).filter(|&j| f.value_at_cell(j) == 0.0).count()
            };
            let expected = 0.09 * empty as f64 / 2f64.powi(k as i32);
            let err = l2_error_exact(f, &m, &lambda);
            assert!((err - expected).abs() < 1e-15, "n={n} k={k} {err} vs {expected}");
        }
        let spec = GeneratorSpec {
            kind: GeneratorKind::Deterministic { regression: m },
            n: 256,
            seed: 0,
        };
        let curve = consistency_curve(&spec, est.config(), &power_of_two_checkpoints(256)).unwrap();
        assert_eq!(curve.meta.tau, est.tau());
        assert_eq!(curve.rows.len(), 9);
    }
}
