//! Exact interval arithmetic for limiting distributions, signed measures and
//! empirical measures, plus the sup-over-intervals discrepancies built on them.
//!
//! Intervals are half-open `(a, b]` or left-unbounded `(-inf, b]`: an atom at
//! the right endpoint is included, an atom at the left endpoint is not.

mod diagnostic;
mod discrepancy;
mod piecewise;
mod sample;

pub use diagnostic::{stability_diagnostic, AtomDeviation, DiagnosticRow, StabilityReport};
pub use discrepancy::{
    kolmogorov_distance, levy_distance, sup_interval_discrepancy, sup_weighted_discrepancy,
};
pub(crate) use piecewise::PiecewiseMeasure;
pub use sample::SampleSequence;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regression::{Piecewise, RegressionModel};

/// Tolerance on the total mass of a distribution model.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("interval ({a}, {b}] is empty or not finite on the left")]
    InvalidInterval { a: f64, b: f64 },
    #[error("total mass is {0}, expected 1")]
    MassNotOne(f64),
    #[error("negative or non-finite mass {0}")]
    BadMass(f64),
    #[error("segment ({a}, {b}] is malformed")]
    BadSegment { a: f64, b: f64 },
    #[error("segments overlap near {0}")]
    OverlappingSegments(f64),
    #[error("duplicate atom at {0}")]
    DuplicateAtom(f64),
    #[error("sample pair {index} has a non-finite coordinate")]
    NonFiniteSample { index: usize },
    #[error("sample sequence is empty")]
    EmptySequence,
    #[error("checkpoint {checkpoint} is not increasing or exceeds sequence length {len}")]
    BadCheckpoint { checkpoint: usize, len: usize },
}

/// A member of the interval class: `(-inf, b]` or `(a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interval {
    UpTo { b: f64 },
    Between { a: f64, b: f64 },
}

impl Interval {
    pub fn up_to(b: f64) -> Self {
        Interval::UpTo { b }
    }

    pub fn between(a: f64, b: f64) -> Result<Self, MeasureError> {
        if a.is_nan() || b.is_nan() || a == f64::NEG_INFINITY || a >= b {
            return Err(MeasureError::InvalidInterval { a, b });
        }
        Ok(Interval::Between { a, b })
    }

    pub fn lower(&self) -> f64 {
        match *self {
            Interval::UpTo { .. } => f64::NEG_INFINITY,
            Interval::Between { a, .. } => a,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Interval::UpTo { b } | Interval::Between { b, .. } => b,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower() && x <= self.upper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A half-open segment `(a, b]` carrying a constant density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub density: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    segments: Vec<[f64; 3]>,
}

/// A probability distribution made of atoms plus a piecewise-constant density.
///
/// Serialized as `{"atoms": [[loc, mass], ...], "segments": [[a, b, density], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct DistributionModel {
    atoms: Vec<Atom>,
    segments: Vec<Segment>,
    measure: PiecewiseMeasure,
}

impl PartialEq for DistributionModel {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.segments == other.segments
    }
}

impl TryFrom<DistributionRepr> for DistributionModel {
    type Error = MeasureError;

    fn try_from(r: DistributionRepr) -> Result<Self, Self::Error> {
        DistributionModel::new(
            r.atoms
                .into_iter()
                .map(|[location, mass]| Atom { location, mass })
                .collect(),
            r.segments
                .into_iter()
                .map(|[a, b, density]| Segment { a, b, density })
                .collect(),
        )
    }
}

impl From<DistributionModel> for DistributionRepr {
    fn from(m: DistributionModel) -> Self {
        DistributionRepr {
            atoms: m.atoms.iter().map(|a| [a.location, a.mass]).collect(),
            segments: m.segments.iter().map(|s| [s.a, s.b, s.density]).collect(),
        }
    }
}

impl DistributionModel {
    /// Validates and normalizes ordering; atoms and segments may be given in any order.
    pub fn new(mut atoms: Vec<Atom>, mut segments: Vec<Segment>) -> Result<Self, MeasureError> {
        for a in &atoms {
            if !a.location.is_finite() {
                return Err(MeasureError::BadMass(a.location));
            }
            if !(a.mass.is_finite() && a.mass > 0.0 && a.mass <= 1.0) {
                return Err(MeasureError::BadMass(a.mass));
            }
        }
        atoms.sort_by(|p, q| p.location.total_cmp(&q.location));
        if let Some(w) = atoms.windows(2).find(|w| w[0].location == w[1].location) {
            return Err(MeasureError::DuplicateAtom(w[0].location));
        }
        for s in &segments {
            if !(s.a.is_finite() && s.b.is_finite() && s.a < s.b) {
                return Err(MeasureError::BadSegment { a: s.a, b: s.b });
            }
            if !(s.density.is_finite() && s.density >= 0.0) {
                return Err(MeasureError::BadMass(s.density));
            }
        }
        segments.sort_by(|p, q| p.a.total_cmp(&q.a));
        if let Some(w) = segments.windows(2).find(|w| w[0].b > w[1].a) {
            return Err(MeasureError::OverlappingSegments(w[1].a));
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum::<f64>()
            + segments.iter().map(|s| s.density * (s.b - s.a)).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MeasureError::MassNotOne(total));
        }
        let measure = PiecewiseMeasure::new(
            atoms.iter().map(|a| (a.location, a.mass)).collect(),
            segments
                .iter()
                .map(|s| (s.a, s.b, s.density, s.density))
                .collect(),
        );
        Ok(DistributionModel {
            atoms,
            segments,
            measure,
        })
    }

    /// Uniform distribution on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self, MeasureError> {
        if !(a < b) {
            return Err(MeasureError::BadSegment { a, b });
        }
        Self::new(
            vec![],
            vec![Segment {
                a,
                b,
                density: 1.0 / (b - a),
            }],
        )
    }

    /// Lebesgue measure on `[0, 1]`.
    pub fn lebesgue() -> Self {
        Self::uniform(0.0, 1.0).expect("unit interval is valid")
    }

    pub fn point_mass(location: f64) -> Result<Self, MeasureError> {
        Self::new(
            vec![Atom {
                location,
                mass: 1.0,
            }],
            vec![],
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `mu((-inf, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.measure.cumulative(t)
    }

    /// `mu((-inf, t))`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        self.measure.cumulative_left(t)
    }

    /// Mass of a singleton.
    pub fn atom_mass(&self, u: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a.location.total_cmp(&u))
            .map(|i| self.atoms[i].mass)
            .unwrap_or(0.0)
    }

    /// Smallest `t` with `F(t) >= u`, for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut knots: Vec<f64> = self.atoms.iter().map(|a| a.location).collect();
        for s in &self.segments {
            knots.push(s.a);
            knots.push(s.b);
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut acc = 0.0;
        for (idx, &p) in knots.iter().enumerate() {
            let w = self.atom_mass(p);
            if u < acc + w {
                return p;
            }
            acc += w;
            let Some(&q) = knots.get(idx + 1) else { break };
            let d = self.density_at((p + q) / 2.0);
            let piece = d * (q - p);
            if piece > 0.0 && u < acc + piece {
                return (p + (u - acc) / d).min(q);
            }
            acc += piece;
        }
        // Rounding left u above the total mass: return the top of the support.
        knots.last().copied().unwrap_or(0.0)
    }

    fn density_at(&self, x: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| x > s.a && x <= s.b)
            .map_or(0.0, |s| s.density)
    }

    pub(crate) fn measure(&self) -> &PiecewiseMeasure {
        &self.measure
    }
}

/// `mu(A)` for a distribution model.
pub fn interval_prob(model: &DistributionModel, interval: Interval) -> f64 {
    model.measure.mass(interval)
}

/// The signed measure `nu(A) = integral over A of m d(mu)`.
#[derive(Debug, Clone)]
pub struct SignedMeasureModel {
    base: DistributionModel,
    regression: RegressionModel,
    measure: PiecewiseMeasure,
}

impl SignedMeasureModel {
    pub fn new(base: DistributionModel, regression: RegressionModel) -> Self {
        let points = base
            .atoms
            .iter()
            .map(|a| (a.location, a.mass * regression.eval(a.location)))
            .collect();
        let mut pieces = Vec::new();
        for s in &base.segments {
            let mut cuts = vec![s.a];
            cuts.extend(regression.breakpoints_in(s.a, s.b));
            cuts.push(s.b);
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if lo >= hi {
                    continue;
                }
                // Affine on the open piece: recover endpoint limits from interior samples.
                let len = hi - lo;
                let g1 = regression.eval(lo + len / 3.0) * s.density;
                let g2 = regression.eval(lo + 2.0 * len / 3.0) * s.density;
                let (g_lo, g_hi) = (2.0 * g1 - g2, 2.0 * g2 - g1);
                if g_lo * g_hi < 0.0 {
                    let root = lo + len * g_lo / (g_lo - g_hi);
                    if root > lo && root < hi {
                        pieces.push((lo, root, g_lo, 0.0));
                        pieces.push((root, hi, 0.0, g_hi));
                        continue;
                    }
                }
                pieces.push((lo, hi, g_lo, g_hi));
            }
        }
        SignedMeasureModel {
            base,
            regression,
            measure: PiecewiseMeasure::new(points, pieces),
        }
    }

    pub fn base(&self) -> &DistributionModel {
        &self.base
    }

    pub fn regression(&self) -> &RegressionModel {
        &self.regression
    }

    pub fn nu(&self, interval: Interval) -> f64 {
        self.measure.mass(interval)
    }

    /// `nu({u})`.
    pub fn atom_value(&self, u: f64) -> f64 {
        self.base.atom_mass(u) * self.regression.eval(u)
    }

    pub(crate) fn measure(&self) -> &PiecewiseMeasure {
        &self.measure
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture() -> DistributionModel {
        DistributionModel::new(
            vec![Atom {
                location: 0.5,
                mass: 0.5,
            }],
            vec![Segment {
                a: 0.0,
                b: 1.0,
                density: 0.5,
            }],
        )
        .unwrap()
    }

    #[test]
    fn interval_prob_examples() {
        let u = DistributionModel::lebesgue();
        assert_eq!(interval_prob(&u, Interval::between(0.25, 0.5).unwrap()), 0.25);
        let pm = DistributionModel::point_mass(0.0).unwrap();
        assert_eq!(interval_prob(&pm, Interval::between(-1.0, 0.0).unwrap()), 1.0);
        assert_eq!(interval_prob(&pm, Interval::between(0.0, 1.0).unwrap()), 0.0);
        let mix = mixture();
        assert!((interval_prob(&mix, Interval::between(0.0, 0.5).unwrap()) - 0.75).abs() < 1e-15);
        assert_eq!(interval_prob(&mix, Interval::up_to(-3.0)), 0.0);
        assert_eq!(interval_prob(&mix, Interval::up_to(f64::INFINITY)), 1.0);
    }

    #[test]
    fn model_validation() {
        assert!(matches!(
            DistributionModel::new(vec![], vec![Segment { a: 0.0, b: 1.0, density: 0.9 }]),
            Err(MeasureError::MassNotOne(_))
        ));
        assert!(matches!(
            DistributionModel::new(
                vec![],
                vec![
                    Segment { a: 0.0, b: 0.6, density: 1.0 },
                    Segment { a: 0.5, b: 0.9, density: 1.0 }
                ]
            ),
            Err(MeasureError::OverlappingSegments(_))
        ));
        assert!(matches!(
            DistributionModel::new(
                vec![Atom { location: 0.2, mass: 0.5 }, Atom { location: 0.2, mass: 0.5 }],
                vec![]
            ),
            Err(MeasureError::DuplicateAtom(_))
        ));
        assert!(Interval::between(1.0, 1.0).is_err());
    }

    #[test]
    fn json_format() {
        let m: DistributionModel =
            serde_json::from_str(r#"{"atoms": [[0.5, 0.5]], "segments": [[0, 1, 0.5]]}"#).unwrap();
        assert_eq!(m, mixture());
        let back: DistributionModel =
            serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DistributionModel>(r#"{"atoms": [[0.5, 0.4]]}"#).is_err());
    }

    #[test]
    fn quantile_inverts_mixture() {
        let mix = mixture();
        assert_eq!(mix.quantile(0.0), 0.0);
        assert!((mix.quantile(0.2) - 0.4).abs() < 1e-15);
        assert_eq!(mix.quantile(0.3), 0.5);
        assert_eq!(mix.quantile(0.74), 0.5);
        assert!((mix.quantile(0.875) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn signed_measure_integrates_linear_regression() {
        let m = RegressionModel::Linear {
            knots: vec![(0.0, -1.0), (1.0, 1.0)],
        };
        let nu = SignedMeasureModel::new(DistributionModel::lebesgue(), m);
        assert!((nu.nu(Interval::up_to(0.5)) + 0.25).abs() < 1e-15);
        assert!(nu.nu(Interval::up_to(1.0)).abs() < 1e-15);
        assert!((nu.nu(Interval::between(0.5, 1.0).unwrap()) - 0.25).abs() < 1e-15);
    }
}
