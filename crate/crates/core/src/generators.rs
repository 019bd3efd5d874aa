//! Finite prefixes of stable sequences.
//!
//! Every generator is a pure function of its specification and seed.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{Atom, DistributionModel, MeasureError, SampleSequence};
use crate::regression::{RegressionError, RegressionModel};

/// Tolerance on row sums of a transition matrix and on mixture weights.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("binary noise needs 0 <= m <= 1, but m ranges over [{lo}, {hi}]")]
    BinaryOutOfRange { lo: f64, hi: f64 },
    #[error("noise half-width {0} must be finite and non-negative")]
    BadNoise(f64),
    #[error("transition matrix: {0}")]
    BadTransition(String),
    #[error("mixture weights: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

/// Seeded ChaCha20 stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }
}

/// How `y` is produced from `m(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Noise {
    /// `y = m(x)`.
    #[default]
    None,
    /// `y` in `{0, 1}` with `P(y = 1 | x) = m(x)`.
    Binary,
    /// `y = m(x) + U` with `U` uniform on `[-delta, delta]`.
    BoundedUniform { delta: f64 },
}

impl Noise {
    fn check(&self, m: &RegressionModel) -> Result<(), GeneratorError> {
        match *self {
            Noise::None => Ok(()),
            Noise::Binary => {
                let (lo, hi) = m.range();
                if lo < 0.0 || hi > 1.0 {
                    Err(GeneratorError::BinaryOutOfRange { lo, hi })
                } else {
                    Ok(())
                }
            }
            Noise::BoundedUniform { delta } => {
                if delta.is_finite() && delta >= 0.0 {
                    Ok(())
                } else {
                    Err(GeneratorError::BadNoise(delta))
                }
            }
        }
    }

    fn draw(&self, mean: f64, src: &mut RandomSource) -> f64 {
        match *self {
            Noise::None => mean,
            Noise::Binary => {
                if src.uniform() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            Noise::BoundedUniform { delta } => mean + delta * (2.0 * src.uniform() - 1.0),
        }
    }
}

/// I.i.d. pairs: `x` from `mu` by inverse CDF, `y` from `m(x)` through `noise`.
pub fn gen_iid(
    mu: &DistributionModel,
    m: &RegressionModel,
    noise: Noise,
    n: usize,
    src: &mut RandomSource,
) -> Result<SampleSequence, GeneratorError> {
    m.validate()?;
    noise.check(m)?;
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let x = mu.quantile(src.uniform());
        let y = noise.draw(m.eval(x), src);
        pairs.push((x, y));
    }
    Ok(SampleSequence::new(pairs)?)
}

/// A finite-state chain whose states are points of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub states: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::BadTransition(m));
        let s = self.states.len();
        if s == 0 {
            return bad("no states".into());
        }
        if self.transition.len() != s || self.transition.iter().any(|r| r.len() != s) {
            return bad(format!("matrix must be {s} x {s}"));
        }
        let mut sorted = self.states.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.iter().any(|x| !x.is_finite()) || sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("states must be finite and distinct".into());
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("row {i} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return bad(format!("row {i} sums to {sum}"));
            }
        }
        let period = self.period().ok_or(GeneratorError::BadTransition("reducible".into()))?;
        if period != 1 {
            return bad(format!("periodic with period {period}"));
        }
        Ok(())
    }

    /// The period of an irreducible chain, `None` when it is reducible.
    fn period(&self) -> Option<usize> {
        let s = self.states.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; s];
            let mut level = vec![usize::MAX; s];
            let mut queue = std::collections::VecDeque::from([0usize]);
            seen[0] = true;
            level[0] = 0;
            while let Some(u) = queue.pop_front() {
                for v in 0..s {
                    let p = if forward { self.transition[u][v] } else { self.transition[v][u] };
                    if p > 0.0 && !seen[v] {
                        seen[v] = true;
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            (seen.iter().all(|&b| b), level)
        };
        let (fwd, level) = reach(true);
        let (bwd, _) = reach(false);
        if !(fwd && bwd) {
            return None;
        }
        let mut g = 0usize;
        for u in 0..s {
            for v in 0..s {
                if self.transition[u][v] > 0.0 {
                    let d = (level[u] + 1).abs_diff(level[v]);
                    g = gcd(g, d);
                }
            }
        }
        Some(g)
    }

    /// Stationary law, solving `pi P = pi` with `sum pi = 1`.
    pub fn stationary(&self) -> Result<Vec<f64>, GeneratorError> {
        self.validate()?;
        let s = self.states.len();
        let mut a = DMatrix::<f64>::zeros(s, s);
        for i in 0..s {
            for j in 0..s {
                a[(j, i)] = self.transition[i][j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..s {
            a[(s - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(s);
        b[s - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or(GeneratorError::BadTransition("singular stationary system".into()))?;
        let pi: Vec<f64> = pi.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        Ok(pi.into_iter().map(|p| p / total).collect())
    }

    /// The stationary law as an atomic distribution.
    pub fn limit(&self) -> Result<DistributionModel, GeneratorError> {
        let pi = self.stationary()?;
        let atoms = self
            .states
            .iter()
            .zip(&pi)
            .map(|(&location, &mass)| Atom { location, mass })
            .collect();
        Ok(DistributionModel::new(atoms, vec![])?)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u fell into the rounding gap above the last partial sum.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// A stationary chain started from its stationary law, `y` from `m(x)` through `noise`.
pub fn gen_markov(
    chain: &MarkovChain,
    m: &RegressionModel,
    noise: Noise,
    n: usize,
    src: &mut RandomSource,
) -> Result<SampleSequence, GeneratorError> {
    m.validate()?;
    noise.check(m)?;
    let pi = chain.stationary()?;
    let mut pairs = Vec::with_capacity(n);
    let mut state = pick(&pi, src.uniform());
    for i in 0..n {
        if i > 0 {
            state = pick(&chain.transition[state], src.uniform());
        }
        let x = chain.states[state];
        pairs.push((x, noise.draw(m.eval(x), src)));
    }
    Ok(SampleSequence::new(pairs)?)
}

/// Base-2 radical inverse of `i`: 0.5, 0.25, 0.75, 0.125, ... for `i = 1, 2, ...`.
pub fn van_der_corput(i: u64) -> f64 {
    // Exact: the reversed integer has at most 53 significant bits for i < 2^53.
    i.reverse_bits() as f64 * 2f64.powi(-64)
}

/// `x_i` the van der Corput sequence, `y_i = m(x_i)`.
pub fn gen_deterministic(m: &RegressionModel, n: usize) -> Result<SampleSequence, GeneratorError> {
    m.validate()?;
    let pairs = (1..=n as u64)
        .map(|i| {
            let x = van_der_corput(i);
            (x, m.eval(x))
        })
        .collect();
    Ok(SampleSequence::new(pairs)?)
}

/// `x_i = -1/(i+1)`, `y_i = 0`.
pub fn gen_remark1(n: usize) -> SampleSequence {
    SampleSequence::new((1..=n).map(|i| (-1.0 / (i as f64 + 1.0), 0.0)).collect())
        .expect("finite pairs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: DistributionModel,
    pub regression: RegressionModel,
    #[serde(default)]
    pub noise: Noise,
}

/// Picks one component by weight, then draws i.i.d. pairs from it.
pub fn gen_nonergodic_mixture(
    components: &[MixtureComponent],
    n: usize,
    src: &mut RandomSource,
) -> Result<(SampleSequence, usize), GeneratorError> {
    if components.is_empty() {
        return Err(GeneratorError::BadWeights("no components".into()));
    }
    if components.iter().any(|c| !(c.weight.is_finite() && c.weight >= 0.0)) {
        return Err(GeneratorError::BadWeights("weights must be non-negative".into()));
    }
    let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(GeneratorError::BadWeights(format!("sum to {total}")));
    }
    let id = pick(&weights, src.uniform());
    let c = &components[id];
    let seq = gen_iid(&c.distribution, &c.regression, c.noise, n, src)?;
    Ok((seq, id))
}

/// What to generate; serialized with a `kind` tag next to `n` and `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Iid {
        distribution: DistributionModel,
        regression: RegressionModel,
        #[serde(default)]
        noise: Noise,
    },
    Markov {
        chain: MarkovChain,
        regression: RegressionModel,
        #[serde(default)]
        noise: Noise,
    },
    Deterministic {
        regression: RegressionModel,
    },
    Remark1,
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A generated prefix with the limiting distribution and regression it is stable for.
#[derive(Debug, Clone)]
pub struct Generated {
    pub sequence: SampleSequence,
    pub distribution: DistributionModel,
    pub regression: RegressionModel,
    /// Index of the mixture component drawn, for mixtures.
    pub component: Option<usize>,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Generated, GeneratorError> {
        let mut src = RandomSource::new(self.seed);
        let n = self.n;
        Ok(match &self.kind {
            GeneratorKind::Iid {
                distribution,
                regression,
                noise,
            } => Generated {
                sequence: gen_iid(distribution, regression, *noise, n, &mut src)?,
                distribution: distribution.clone(),
                regression: regression.clone(),
                component: None,
            },
            GeneratorKind::Markov {
                chain,
                regression,
                noise,
            } => Generated {
                sequence: gen_markov(chain, regression, *noise, n, &mut src)?,
                distribution: chain.limit()?,
                regression: regression.clone(),
                component: None,
            },
            GeneratorKind::Deterministic { regression } => Generated {
                sequence: gen_deterministic(regression, n)?,
                distribution: DistributionModel::lebesgue(),
                regression: regression.clone(),
                component: None,
            },
            GeneratorKind::Remark1 => Generated {
                sequence: gen_remark1(n),
                distribution: DistributionModel::point_mass(0.0)?,
                regression: RegressionModel::Constant { value: 0.0 },
                component: None,
            },
            GeneratorKind::Mixture { components } => {
                let (sequence, id) = gen_nonergodic_mixture(components, n, &mut src)?;
                Generated {
                    sequence,
                    distribution: components[id].distribution.clone(),
                    regression: components[id].regression.clone(),
                    component: Some(id),
                }
            }
        })
    }
}
