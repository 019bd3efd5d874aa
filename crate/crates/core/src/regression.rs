//! Regression functions with finitely many pieces, exact total variation,
//! and the bookkeeping needed to declare membership in a variation class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::rademacher_eval;
use crate::partitions::{cell_of, PiecewiseDyadicFn, VariationBudget};

/// Functions that are constant or affine between finitely many breakpoints.
pub trait Piecewise {
    fn eval(&self, x: f64) -> f64;
    /// Sorted points in the open interval `(lo, hi)` where the function may
    /// jump or change slope.
    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("invalid regression model: {0}")]
    Invalid(String),
    #[error("variation {variation} on (-{i}, {i}] is not below the budget {alpha}")]
    OutsideClass { i: u32, variation: f64, alpha: f64 },
}

/// A limiting regression `m`.
///
/// `Steps` is constant on `(-inf, b_0], (b_0, b_1], ..., (b_last, inf)`;
/// `Linear` interpolates its knots and is flat outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegressionModel {
    Constant { value: f64 },
    Rademacher { k: u32 },
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    Linear { knots: Vec<(f64, f64)> },
    Dyadic(PiecewiseDyadicFn),
}

/// Largest Rademacher index accepted; `h_k` has `2^k` pieces.
pub const MAX_RADEMACHER_INDEX: u32 = 30;

impl RegressionModel {
    pub fn validate(&self) -> Result<(), RegressionError> {
        let bad = |m: &str| Err(RegressionError::Invalid(m.to_string()));
        match self {
            RegressionModel::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant must be finite");
                }
            }
            RegressionModel::Rademacher { k } => {
                if *k > MAX_RADEMACHER_INDEX {
                    return bad("rademacher index too large");
                }
            }
            RegressionModel::Steps { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return bad("steps need exactly one more value than breaks");
                }
                if breaks.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("steps must be finite");
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("step breaks must be strictly increasing");
                }
            }
            RegressionModel::Linear { knots } => {
                if knots.is_empty() {
                    return bad("linear model needs at least one knot");
                }
                if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return bad("knots must be finite");
                }
                if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return bad("knot locations must be strictly increasing");
                }
            }
            RegressionModel::Dyadic(f) => {
                if f.cells().any(|(_, v)| !v.is_finite()) || !f.default_value().is_finite() {
                    return bad("dyadic values must be finite");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RegressionModel::Constant { value } => *value,
            RegressionModel::Rademacher { k } => rademacher_eval(*k, x),
            RegressionModel::Steps { breaks, values } => values[breaks.partition_point(|&b| b < x)],
            RegressionModel::Linear { knots } => {
                let i = knots.partition_point(|p| p.0 < x);
                if i == 0 {
                    return knots[0].1;
                }
                if i == knots.len() {
                    return knots[i - 1].1;
                }
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
            }
            RegressionModel::Dyadic(f) => f.eval(x),
        }
    }

    /// `lim m(s)` as `s` increases to `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self {
            RegressionModel::Rademacher { k: 0 } => {
                if t > 0.0 && t <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            RegressionModel::Rademacher { k } => {
                let s = t * 2f64.powi(*k as i32);
                if s.fract() == 0.0 && s >= 1.0 && s <= 2f64.powi(*k as i32) {
                    // The piece ending at t is [ (s-1) 2^-k, s 2^-k ).
                    if (s as u64 - 1).is_multiple_of(2) {
                        1.0
                    } else {
                        0.0
                    }
                } else if s.fract() == 0.0 {
                    0.0
                } else {
                    self.eval(t)
                }
            }
            // Right-closed pieces: the piece containing t also holds t's left neighbours.
            RegressionModel::Steps { .. } | RegressionModel::Dyadic(_) => self.eval(t),
            RegressionModel::Constant { .. } | RegressionModel::Linear { .. } => self.eval(t),
        }
    }

    /// `lim m(s)` as `s` decreases to `t`.
    pub fn right_limit(&self, t: f64) -> f64 {
        match self {
            RegressionModel::Rademacher { k: 0 } => {
                if (0.0..1.0).contains(&t) {
                    0.5
                } else {
                    0.0
                }
            }
            RegressionModel::Rademacher { .. } => self.eval(t),
            RegressionModel::Steps { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
            RegressionModel::Dyadic(f) => match cell_of(t, f.resolution()) {
                Ok(c) if f.resolution() > 0 && c.bounds().1 == t => f.value_at_cell(c.j + 1),
                _ => f.eval(t),
            },
            RegressionModel::Constant { .. } | RegressionModel::Linear { .. } => self.eval(t),
        }
    }

    /// `sup |m|`.
    pub fn bound(&self) -> f64 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }

    /// `(inf m, sup m)`.
    pub fn range(&self) -> (f64, f64) {
        let fold = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        match self {
            RegressionModel::Constant { value } => (*value, *value),
            RegressionModel::Rademacher { k: 0 } => (0.0, 0.5),
            RegressionModel::Rademacher { .. } => (0.0, 1.0),
            RegressionModel::Steps { values, .. } => fold(&mut values.iter().copied()),
            RegressionModel::Linear { knots } => fold(&mut knots.iter().map(|p| p.1)),
            RegressionModel::Dyadic(f) => {
                fold(&mut f.cells().map(|c| c.1).chain(std::iter::once(f.default_value())))
            }
        }
    }

    /// Total variation on `(a, b]`: the supremum over grids `a < t_0 < ... < t_n = b`.
    pub fn variation(&self, a: f64, b: f64) -> f64 {
        if !(a < b) {
            return 0.0;
        }
        if let RegressionModel::Linear { .. } = self {
            let mut pts = vec![a];
            pts.extend(self.breakpoints_in(a, b));
            pts.push(b);
            return pts.windows(2).map(|w| (self.eval(w[1]) - self.eval(w[0])).abs()).sum();
        }
        // Piecewise constant: jumps strictly inside plus the left jump at b.
        let inner: f64 = self
            .breakpoints_in(a, b)
            .into_iter()
            .map(|t| {
                let v = self.eval(t);
                (v - self.left_limit(t)).abs() + (self.right_limit(t) - v).abs()
            })
            .sum();
        inner + (self.eval(b) - self.left_limit(b)).abs()
    }

    /// `V(m: -i, i)` for `i = 1..=imax`.
    pub fn variation_table(&self, imax: u32) -> Vec<f64> {
        (1..=imax).map(|i| self.variation(-(i as f64), i as f64)).collect()
    }

    /// Checks `V(m: -i, i) < alpha(i)` for every `i <= imax`.
    pub fn check_membership(&self, budget: &VariationBudget, imax: u32) -> Result<(), RegressionError> {
        for (idx, variation) in self.variation_table(imax).into_iter().enumerate() {
            let i = idx as u32 + 1;
            let alpha = budget.alpha(i);
            if !(variation < alpha) {
                return Err(RegressionError::OutsideClass { i, variation, alpha });
            }
        }
        Ok(())
    }

    pub fn is_monotone(&self) -> bool {
        fn nondecreasing(v: impl Iterator<Item = f64>) -> bool {
            let v: Vec<f64> = v.collect();
            v.windows(2).all(|w| w[0] <= w[1])
        }
        match self {
            RegressionModel::Constant { .. } => true,
            RegressionModel::Rademacher { .. } => false,
            RegressionModel::Steps { values, .. } => nondecreasing(values.iter().copied()),
            RegressionModel::Linear { knots } => nondecreasing(knots.iter().map(|p| p.1)),
            RegressionModel::Dyadic(f) => {
                let d = f.default_value();
                let mut seq = vec![d];
                let mut last: Option<i64> = None;
                for (j, v) in f.cells() {
                    if last.is_some_and(|l| j > l + 1) {
                        seq.push(d);
                    }
                    seq.push(v);
                    last = Some(j);
                }
                seq.push(d);
                f.resolution() == 0 || nondecreasing(seq.into_iter())
            }
        }
    }

    /// Smallest Lipschitz constant, or `None` for discontinuous models.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            RegressionModel::Constant { .. } => Some(0.0),
            RegressionModel::Linear { knots } => Some(
                knots
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max),
            ),
            _ => None,
        }
    }

    /// The model scaled by `c`.
    pub fn scaled(&self, c: f64) -> Option<RegressionModel> {
        Some(match self {
            RegressionModel::Constant { value } => RegressionModel::Constant { value: value * c },
            RegressionModel::Steps { breaks, values } => RegressionModel::Steps {
                breaks: breaks.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
            RegressionModel::Linear { knots } => RegressionModel::Linear {
                knots: knots.iter().map(|&(x, y)| (x, y * c)).collect(),
            },
            RegressionModel::Dyadic(f) => RegressionModel::Dyadic(f.scaled(c)),
            RegressionModel::Rademacher { .. } => return None,
        })
    }
}

impl Piecewise for RegressionModel {
    fn eval(&self, x: f64) -> f64 {
        RegressionModel::eval(self, x)
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if !(lo < hi) {
            return Vec::new();
        }
        let inside = |t: &f64| *t > lo && *t < hi;
        match self {
            RegressionModel::Constant { .. } => Vec::new(),
            RegressionModel::Rademacher { k: 0 } => [0.0, 1.0].into_iter().filter(inside).collect(),
            RegressionModel::Rademacher { k } => {
                let n = 1u64 << k;
                let w = 2f64.powi(-(*k as i32));
                let first = (lo.max(0.0) * n as f64).floor() as u64;
                let last = ((hi.min(1.0) * n as f64).ceil() as u64).min(n);
                (first..=last).map(|j| j as f64 * w).filter(inside).collect()
            }
            RegressionModel::Steps { breaks, .. } => breaks.iter().copied().filter(inside).collect(),
            RegressionModel::Linear { knots } => knots.iter().map(|p| p.0).filter(inside).collect(),
            RegressionModel::Dyadic(f) => f.breakpoints_in(lo, hi),
        }
    }
}
