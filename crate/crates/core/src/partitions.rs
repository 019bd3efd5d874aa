//! Dyadic partitions of the line, functions constant on their cells, and
//! variation budgets.
//!
//! At resolution `k >= 1` the cell with index `j` is `((j-1)/2^k, j/2^k]`;
//! resolution 0 is the single cell covering the whole line.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{interval_prob, DistributionModel, Interval, SignedMeasureModel};
use crate::regression::{Piecewise, RegressionModel};

/// Largest `|x| * 2^k` for which cell indices and cell bounds stay exact in `f64`.
const INDEX_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("cell index of {x} at resolution {k} is not representable")]
    Overflow { x: f64, k: u32 },
    #[error("invalid variation budget: {0}")]
    BadBudget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCell {
    pub k: u32,
    pub j: i64,
}

impl DyadicCell {
    /// `(lower, upper)` endpoints; infinite for resolution 0.
    pub fn bounds(&self) -> (f64, f64) {
        if self.k == 0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let w = scale(self.k).recip();
        ((self.j - 1) as f64 * w, self.j as f64 * w)
    }

    pub fn interval(&self) -> Interval {
        let (a, b) = self.bounds();
        if self.k == 0 {
            Interval::up_to(b)
        } else {
            Interval::Between { a, b }
        }
    }

    /// The two cells of resolution `k + 1` whose union is this cell.
    pub fn children(&self) -> [DyadicCell; 2] {
        if self.k == 0 {
            // The whole line has no dyadic halves; report the cells around 0.
            return [DyadicCell { k: 1, j: 0 }, DyadicCell { k: 1, j: 1 }];
        }
        [
            DyadicCell { k: self.k + 1, j: 2 * self.j - 1 },
            DyadicCell { k: self.k + 1, j: 2 * self.j },
        ]
    }
}

fn scale(k: u32) -> f64 {
    // Exact for every k that passes the overflow checks below.
    2f64.powi(k as i32)
}

/// The cell of resolution `k` containing `x`.
pub fn cell_of(x: f64, k: u32) -> Result<DyadicCell, PartitionError> {
    if k == 0 {
        return Ok(DyadicCell { k, j: 0 });
    }
    if k > 1000 || !x.is_finite() {
        return Err(PartitionError::Overflow { x, k });
    }
    // Multiplying by a power of two is exact, so `ceil` sees the true value of x * 2^k.
    let s = x * scale(k);
    if s.abs() > INDEX_LIMIT - 1.0 {
        return Err(PartitionError::Overflow { x, k });
    }
    Ok(DyadicCell { k, j: s.ceil() as i64 })
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    k: u32,
    #[serde(default)]
    default: f64,
    cells: Vec<(i64, f64)>,
}

/// A function constant on the cells of one dyadic partition.
///
/// Serialized as `{"k": k, "default": d, "cells": [[j, value], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DyadicRepr", into = "DyadicRepr")]
pub struct PiecewiseDyadicFn {
    k: u32,
    default: f64,
    values: BTreeMap<i64, f64>,
}

impl From<DyadicRepr> for PiecewiseDyadicFn {
    fn from(r: DyadicRepr) -> Self {
        PiecewiseDyadicFn {
            k: r.k,
            default: r.default,
            values: r.cells.into_iter().collect(),
        }
    }
}

impl From<PiecewiseDyadicFn> for DyadicRepr {
    fn from(f: PiecewiseDyadicFn) -> Self {
        DyadicRepr {
            k: f.k,
            default: f.default,
            cells: f.values.into_iter().collect(),
        }
    }
}

impl PiecewiseDyadicFn {
    pub fn new(k: u32, default: f64) -> Self {
        PiecewiseDyadicFn {
            k,
            default,
            values: BTreeMap::new(),
        }
    }

    pub fn from_cells(k: u32, default: f64, cells: impl IntoIterator<Item = (i64, f64)>) -> Self {
        let mut f = Self::new(k, default);
        for (j, v) in cells {
            f.set(j, v);
        }
        f
    }

    /// Constant function at resolution 0.
    pub fn constant(value: f64) -> Self {
        Self::from_cells(0, 0.0, [(0, value)])
    }

    pub fn resolution(&self) -> u32 {
        self.k
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn set(&mut self, j: i64, value: f64) {
        let j = if self.k == 0 { 0 } else { j };
        self.values.insert(j, value);
    }

    pub fn cells(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().map(|(&j, &v)| (j, v))
    }

    pub fn value_at_cell(&self, j: i64) -> f64 {
        let j = if self.k == 0 { 0 } else { j };
        self.values.get(&j).copied().unwrap_or(self.default)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match cell_of(x, self.k) {
            Ok(c) => self.value_at_cell(c.j),
            Err(_) => self.default,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .values()
            .fold(self.default.abs(), |m, v| m.max(v.abs()))
    }

    /// Returns the same function with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        PiecewiseDyadicFn {
            k: self.k,
            default: self.default * c,
            values: self.values.iter().map(|(&j, &v)| (j, v * c)).collect(),
        }
    }

    /// Sum over adjacent cell pairs inside `(-i, i]` of the absolute value
    /// difference. For a function constant on the cells this equals its total
    /// variation on the window: jumps at `-i` and at `i` are outside it.
    pub fn total_variation_window(&self, i: u32) -> f64 {
        window_variation(&self.values, self.k, i, self.default, |v| *v)
    }

    /// Total variation on a general window `(a, b]`.
    pub fn variation_between(&self, a: f64, b: f64) -> f64 {
        if self.k == 0 || a >= b {
            return 0.0;
        }
        // Jumps sit at cell boundaries; the function is left-continuous there,
        // so a jump at t counts iff a < t < b.
        self.breakpoints_in(a, b)
            .into_iter()
            .map(|t| {
                let j = (t * scale(self.k)) as i64;
                (self.value_at_cell(j) - self.value_at_cell(j + 1)).abs()
            })
            .sum()
    }
}

/// Window variation of the cell function stored in `cells` (absent cells take
/// `default`), summed over adjacent pairs in ascending order. Pairs of two
/// absent cells contribute 0 and are skipped.
pub(crate) fn window_variation<V>(
    cells: &BTreeMap<i64, V>,
    k: u32,
    i: u32,
    default: f64,
    value: impl Fn(&V) -> f64,
) -> f64 {
    if k == 0 || i == 0 {
        return 0.0;
    }
    let at = |j: i64| cells.get(&j).map_or(default, &value);
    let half = (i as i128) << k;
    let lo = (-half + 1).max(i64::MIN as i128 + 1) as i64;
    let hi = half.min(i64::MAX as i128 - 1) as i64;
    let mut total = 0.0;
    let mut last_pair: Option<i64> = None;
    for (&c, _) in cells.range(lo.saturating_sub(1)..=hi.saturating_add(1)) {
        for p in [c - 1, c] {
            if p < lo || p > hi - 1 || last_pair.is_some_and(|q| q >= p) {
                continue;
            }
            total += (at(p) - at(p + 1)).abs();
            last_pair = Some(p);
        }
    }
    total
}

impl Piecewise for PiecewiseDyadicFn {
    fn eval(&self, x: f64) -> f64 {
        PiecewiseDyadicFn::eval(self, x)
    }

    fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.k == 0 || lo >= hi {
            return Vec::new();
        }
        let w = scale(self.k).recip();
        let range_lo = cell_of(lo, self.k).map_or(i64::MIN, |c| c.j);
        let range_hi = cell_of(hi, self.k).map_or(i64::MAX, |c| c.j.saturating_add(1));
        let mut out = BTreeSet::new();
        for (&j, _) in self.values.range(range_lo.saturating_sub(1)..=range_hi) {
            for b in [j - 1, j] {
                let t = b as f64 * w;
                if t > lo && t < hi {
                    out.insert(b);
                }
            }
        }
        out.into_iter().map(|b| b as f64 * w).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum BudgetRepr {
    Constant { value: f64 },
    Affine { slope: f64, intercept: f64 },
    Table { values: Vec<f64> },
}

/// A known non-decreasing bound `alpha(i)` on the variation of the target on `(-i, i]`.
///
/// `Affine` covers the Lipschitz budget `2 C i + eps`; tables extend with their
/// last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr", into = "BudgetRepr")]
pub enum VariationBudget {
    Constant(f64),
    Affine { slope: f64, intercept: f64 },
    Table(Vec<f64>),
}

impl TryFrom<BudgetRepr> for VariationBudget {
    type Error = PartitionError;

    fn try_from(r: BudgetRepr) -> Result<Self, Self::Error> {
        let b = match r {
            BudgetRepr::Constant { value } => VariationBudget::Constant(value),
            BudgetRepr::Affine { slope, intercept } => VariationBudget::Affine { slope, intercept },
            BudgetRepr::Table { values } => VariationBudget::Table(values),
        };
        b.validate()?;
        Ok(b)
    }
}

impl From<VariationBudget> for BudgetRepr {
    fn from(b: VariationBudget) -> Self {
        match b {
            VariationBudget::Constant(value) => BudgetRepr::Constant { value },
            VariationBudget::Affine { slope, intercept } => BudgetRepr::Affine { slope, intercept },
            VariationBudget::Table(values) => BudgetRepr::Table { values },
        }
    }
}

impl VariationBudget {
    pub fn constant(value: f64) -> Result<Self, PartitionError> {
        let b = VariationBudget::Constant(value);
        b.validate()?;
        Ok(b)
    }

    /// `alpha(i) = 2 C i + eps`, the budget for Lipschitz targets with constant `C`.
    pub fn lipschitz(c: f64, eps: f64) -> Result<Self, PartitionError> {
        let b = VariationBudget::Affine {
            slope: 2.0 * c,
            intercept: eps,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        let bad = |m: &str| Err(PartitionError::BadBudget(m.to_string()));
        match self {
            VariationBudget::Constant(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    return bad("constant budget must be positive and finite");
                }
            }
            VariationBudget::Affine { slope, intercept } => {
                if !(slope.is_finite() && intercept.is_finite() && *slope >= 0.0) {
                    return bad("affine budget needs a finite non-negative slope");
                }
                if slope + intercept <= 0.0 {
                    return bad("affine budget must be positive at i = 1");
                }
            }
            VariationBudget::Table(v) => {
                if v.is_empty() {
                    return bad("empty budget table");
                }
                if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad("budget table entries must be positive and finite");
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return bad("budget table must be non-decreasing");
                }
            }
        }
        Ok(())
    }

    /// `alpha(i)` for `i >= 1`.
    pub fn alpha(&self, i: u32) -> f64 {
        let i = i.max(1);
        match self {
            VariationBudget::Constant(v) => *v,
            VariationBudget::Affine { slope, intercept } => slope * i as f64 + intercept,
            VariationBudget::Table(v) => v[(i as usize).min(v.len()) - 1],
        }
    }
}

/// The mu-conditional average of `m` on each cell of resolution `k`.
///
/// Cells of zero mass are left at the default value 0.
pub fn average_over_partition(
    m: &RegressionModel,
    mu: &DistributionModel,
    k: u32,
) -> Result<PiecewiseDyadicFn, PartitionError> {
    let nu = SignedMeasureModel::new(mu.clone(), m.clone());
    if k == 0 {
        return Ok(PiecewiseDyadicFn::constant(nu.nu(Interval::up_to(f64::INFINITY))));
    }
    let mut cells = BTreeSet::new();
    for a in mu.atoms() {
        cells.insert(cell_of(a.location, k)?.j);
    }
    for s in mu.segments() {
        if s.density <= 0.0 {
            continue;
        }
        // Points just above s.a lie in cell floor(s.a * 2^k) + 1.
        let first = cell_of(s.a, k)?;
        let first = if first.bounds().1 == s.a { first.j + 1 } else { first.j };
        let last = cell_of(s.b, k)?.j;
        cells.extend(first..=last);
    }
    let mut out = PiecewiseDyadicFn::new(k, 0.0);
    for j in cells {
        let cell = DyadicCell { k, j }.interval();
        let mass = interval_prob(mu, cell);
        if mass > 0.0 {
            out.set(j, nu.nu(cell) / mass);
        }
    }
    Ok(out)
}
