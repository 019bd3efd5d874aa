//! Block-by-block construction of a sequence on which a given procedure
//! keeps moving between Rademacher targets.
//!
//! Block `k` carries labels `y = h_k(x)` at distinct points of `(0, 1)`. It is
//! appended to the running prefix until the procedure's estimate is within
//! `1/40` of `h_k`, the prefix is within `1/(k+1)` of both `lambda` and
//! `nu_k` over the interval class, and the prefix is long enough relative to
//! the next block's own convergence thresholds. Every supremum "over all
//! `m >= L`" is truncated at the configured horizon, so the output witnesses
//! the behaviour on a finite prefix only.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::evaluation::{l2_distance_exact, l2_error_quadrature};
use crate::generators::{van_der_corput, RandomSource};
use crate::measures::{sup_interval_discrepancy, sup_weighted_discrepancy, DistributionModel, SampleSequence};
use crate::par::Execution;
use crate::regression::RegressionModel;

use super::certify::{last_exceedance, Certificate};
use super::procedures::{EstimatorProcedure, Fitted};
use super::{rademacher_eval, rademacher_measure, AdversaryError};

/// Required closeness of the estimate to the current target.
pub const CLOSENESS: f64 = 1.0 / 40.0;
/// Required separation of estimates at different block ends.
pub const SEPARATION: f64 = 1.0 / 20.0;
pub const DEFAULT_HORIZON: usize = 1 << 20;
pub const DEFAULT_QUADRATURE_CELLS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSource {
    /// `frac(v_i + k sqrt 2)` with `v_i` the van der Corput sequence.
    ShiftedVanDerCorput,
    /// Uniform draws, redrawn on collision.
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceConfig {
    /// Number of blocks `K`; at least 2.
    pub blocks: u32,
    /// Largest prefix length examined per block, both for thresholds and for
    /// the block itself.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Seed of the fallback block source.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cells")]
    pub quadrature_cells: usize,
    #[serde(default)]
    pub execution: Execution,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_cells() -> usize {
    DEFAULT_QUADRATURE_CELLS
}

impl SpliceConfig {
    pub fn new(blocks: u32) -> Self {
        SpliceConfig {
            blocks,
            horizon: DEFAULT_HORIZON,
            seed: 0,
            quadrature_cells: DEFAULT_QUADRATURE_CELLS,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        let bad = |m: &str| Err(AdversaryError::BadConfig(m.into()));
        if self.blocks < 2 {
            return bad("at least two blocks are needed for an oscillation");
        }
        if self.blocks > 24 {
            return bad("at most 24 blocks are supported");
        }
        if !(2..=1 << 26).contains(&self.horizon) {
            return bad("horizon must lie in [2, 2^26]");
        }
        if self.quadrature_cells < 1024 || !self.quadrature_cells.is_power_of_two() {
            return bad("quadrature_cells must be a power of two >= 1024");
        }
        Ok(())
    }
}

/// The first `horizon` pairs of block `k`, before splicing.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub k: u32,
    pub source: BlockSource,
    pub pairs: Vec<(f64, f64)>,
}

fn block_seed(seed: u64, k: u32) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Points of block `k`: the shifted van der Corput sequence when it avoids
/// `used` and 0 and has no repeats, otherwise uniform draws with rejection.
pub fn materialize_block(k: u32, len: usize, seed: u64, used: &HashSet<u64>) -> Block {
    let shift = (k as f64 * std::f64::consts::SQRT_2).fract();
    let mut seen = HashSet::with_capacity(len);
    let mut xs = Vec::with_capacity(len);
    for i in 1..=len as u64 {
        let mut x = van_der_corput(i) + shift;
        if x >= 1.0 {
            x -= 1.0;
        }
        if x <= 0.0 || used.contains(&x.to_bits()) || !seen.insert(x.to_bits()) {
            break;
        }
        xs.push(x);
    }
    let source = if xs.len() == len {
        BlockSource::ShiftedVanDerCorput
    } else {
        seen.clear();
        xs.clear();
        let mut src = RandomSource::new(block_seed(seed, k));
        while xs.len() < len {
            let x = src.uniform();
            if x > 0.0 && !used.contains(&x.to_bits()) && seen.insert(x.to_bits()) {
                xs.push(x);
            }
        }
        BlockSource::Iid
    };
    Block {
        k,
        source,
        pairs: xs.into_iter().map(|x| (x, rademacher_eval(k, x))).collect(),
    }
}

/// `l_k` and `l~_k` of one block, truncated at the block length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockThresholds {
    pub k: u32,
    /// Least `L` with `sup over A of |mu_m(A) - lambda(A)| <= 1/(k+1)` for
    /// all `L <= m <= horizon`.
    pub interval: usize,
    /// Same for `nu_m` against `nu_k`.
    pub weighted: usize,
    pub horizon: usize,
    pub interval_certificate: Certificate,
    pub weighted_certificate: Certificate,
}

fn prefix_seq(pairs: &[(f64, f64)], m: usize) -> SampleSequence {
    SampleSequence::new(pairs[..m].to_vec()).expect("block pairs are finite")
}

fn interval_discrepancy(pairs: &[(f64, f64)]) -> f64 {
    let seq = SampleSequence::new(pairs.to_vec()).expect("finite pairs");
    sup_interval_discrepancy(&seq, &DistributionModel::lebesgue()).expect("non-empty prefix")
}

fn weighted_discrepancy(pairs: &[(f64, f64)], k: u32) -> f64 {
    let seq = SampleSequence::new(pairs.to_vec()).expect("finite pairs");
    sup_weighted_discrepancy(&seq, &rademacher_measure(k)).expect("non-empty prefix")
}

pub fn compute_block_thresholds(block: &Block, exec: Execution) -> Result<BlockThresholds, AdversaryError> {
    let k = block.k;
    let h = block.pairs.len();
    let thr = 1.0 / (k as f64 + 1.0);
    let lambda = DistributionModel::lebesgue();
    let nu = rademacher_measure(k);
    let ic = last_exceedance(1, h, thr, exec, |m| {
        sup_interval_discrepancy(&prefix_seq(&block.pairs, m), &lambda).expect("m >= 1")
    });
    let wc = last_exceedance(1, h, thr, exec, |m| {
        sup_weighted_discrepancy(&prefix_seq(&block.pairs, m), &nu).expect("m >= 1")
    });
    for (c, what) in [(&ic, "interval"), (&wc, "weighted")] {
        if c.last_violation == Some(h) {
            return Err(AdversaryError::HorizonExhausted {
                k,
                reason: format!("{what} discrepancy of block {k} still above 1/{} at horizon {h}", k + 1),
            });
        }
    }
    Ok(BlockThresholds {
        k,
        interval: ic.last_violation.map_or(1, |v| v + 1),
        weighted: wc.last_violation.map_or(1, |v| v + 1),
        horizon: h,
        interval_certificate: ic,
        weighted_certificate: wc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Closeness {
    /// `integral (phi - h_k)^2 d(lambda)`.
    pub value: f64,
    /// Computed from the pieces rather than by quadrature.
    pub exact: bool,
    pub converged: bool,
}

impl Closeness {
    pub fn holds(&self) -> bool {
        self.converged && self.value <= CLOSENESS
    }
}

/// `integral (f - g)^2 d(lambda)`, exact when both are piecewise.
pub fn fitted_distance(f: &Fitted, g: &Fitted, cells: usize, exec: Execution) -> Result<Closeness, AdversaryError> {
    let lambda = DistributionModel::lebesgue();
    if let (Some(a), Some(b)) = (f.as_exact(), g.as_exact()) {
        return Ok(Closeness {
            value: l2_distance_exact(a, b, &lambda),
            exact: true,
            converged: true,
        });
    }
    let q = l2_error_quadrature(&|x| f.eval(x), &|x| g.eval(x), &lambda, cells, exec)
        .map_err(|e| AdversaryError::BadConfig(e.to_string()))?;
    Ok(Closeness {
        value: q.value(),
        exact: false,
        converged: q.converged,
    })
}

fn target(k: u32) -> Fitted {
    Fitted::Exact(RegressionModel::Rademacher { k })
}

/// One evaluation of the procedure during a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub n: usize,
    pub closeness: Closeness,
    /// Filled in only once the closeness condition holds.
    pub interval_discrepancy: Option<f64>,
    pub weighted_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub k: u32,
    pub source: BlockSource,
    /// Prefix length before the block.
    pub start: usize,
    /// `n_k`, the prefix length after the block.
    pub end: usize,
    pub thresholds: BlockThresholds,
    pub next_thresholds: BlockThresholds,
    /// `k * max(l_{k+1}, l~_{k+1})`, a lower bound for `n_k`.
    pub length_bound: usize,
    pub closeness: Closeness,
    /// `sup over A of |mu_n(A) - lambda(A)|` at `n = n_k`.
    pub interval_discrepancy: f64,
    /// `sup over A of |nu_n(A) - nu_k(A)|` at `n = n_k`.
    pub weighted_discrepancy: f64,
    pub checks: Vec<CheckRow>,
}

/// A partially built adversarial sequence.
pub struct SpliceState {
    config: SpliceConfig,
    pairs: Vec<(f64, f64)>,
    records: Vec<BlockRecord>,
    fitted: Vec<Fitted>,
    blocks: Vec<Block>,
    thresholds: Vec<BlockThresholds>,
    used: HashSet<u64>,
    /// Checks of the block that failed, if any.
    failed_checks: Vec<CheckRow>,
}

impl SpliceState {
    pub fn new(config: SpliceConfig) -> Result<Self, AdversaryError> {
        config.validate()?;
        Ok(SpliceState {
            config,
            pairs: Vec::new(),
            records: Vec::new(),
            fitted: Vec::new(),
            blocks: Vec::new(),
            thresholds: Vec::new(),
            used: HashSet::new(),
            failed_checks: Vec::new(),
        })
    }

    pub fn config(&self) -> &SpliceConfig {
        &self.config
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }

    pub fn fitted(&self) -> &[Fitted] {
        &self.fitted
    }

    pub fn failed_checks(&self) -> &[CheckRow] {
        &self.failed_checks
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == self.config.blocks as usize
    }

    /// Materializes blocks and thresholds up to `k`.
    fn ensure_block(&mut self, k: u32) -> Result<(), AdversaryError> {
        while self.blocks.len() < k as usize {
            let j = self.blocks.len() as u32 + 1;
            let block = materialize_block(j, self.config.horizon, self.config.seed, &self.used);
            self.used.extend(block.pairs.iter().map(|p| p.0.to_bits()));
            self.blocks.push(block);
        }
        while self.thresholds.len() < k as usize {
            let block = &self.blocks[self.thresholds.len()];
            let t = compute_block_thresholds(block, self.config.execution)?;
            self.thresholds.push(t);
        }
        Ok(())
    }

    /// Appends the next block, checking at block lengths `r, 2r, 4r, ...`
    /// (and finally the horizon) with `r` the smallest length allowed by the
    /// next block's thresholds.
    pub fn splice_next_block(&mut self, procedure: &dyn EstimatorProcedure) -> Result<&BlockRecord, AdversaryError> {
        if self.is_complete() {
            return Err(AdversaryError::BadConfig("all blocks are already spliced".into()));
        }
        self.failed_checks.clear();
        let k = self.records.len() as u32 + 1;
        self.ensure_block(k + 1)?;
        let (this, next) = (self.thresholds[k as usize - 1], self.thresholds[k as usize]);
        let start = self.pairs.len();
        let length_bound = k as usize * next.interval.max(next.weighted);
        let budget = self.config.horizon;
        let first = length_bound.saturating_sub(start).max(1);
        if first > budget {
            return Err(AdversaryError::HorizonExhausted {
                k,
                reason: format!("n_{k} must be at least {length_bound}, beyond {start} + horizon {budget}"),
            });
        }
        let mut lengths: Vec<usize> = std::iter::successors(Some(first), |&r| r.checked_mul(2))
            .take_while(|&r| r <= budget)
            .collect();
        if lengths.last() != Some(&budget) {
            lengths.push(budget);
        }
        let bound = 1.0 / (k as f64 + 1.0);
        let h_k = target(k);
        let mut checks = Vec::new();
        for r in lengths {
            let block = &self.blocks[k as usize - 1];
            let have = self.pairs.len() - start;
            self.pairs.extend_from_slice(&block.pairs[have..r]);
            let n = self.pairs.len();
            let phi = procedure.fit(&self.pairs)?;
            let closeness = fitted_distance(&phi, &h_k, self.config.quadrature_cells, self.config.execution)?;
            let mut row = CheckRow {
                n,
                closeness,
                interval_discrepancy: None,
                weighted_discrepancy: None,
            };
            if closeness.holds() {
                let d = interval_discrepancy(&self.pairs);
                let dk = weighted_discrepancy(&self.pairs, k);
                row.interval_discrepancy = Some(d);
                row.weighted_discrepancy = Some(dk);
                checks.push(row);
                if d <= bound && dk <= bound {
                    self.fitted.push(phi);
                    self.records.push(BlockRecord {
                        k,
                        source: block.source,
                        start,
                        end: n,
                        thresholds: this,
                        next_thresholds: next,
                        length_bound,
                        closeness,
                        interval_discrepancy: d,
                        weighted_discrepancy: dk,
                        checks,
                    });
                    return Ok(self.records.last().expect("just pushed"));
                }
            } else {
                checks.push(row);
            }
        }
        let best = checks
            .iter()
            .map(|c| c.closeness.value)
            .fold(f64::INFINITY, f64::min);
        let ever_close = checks.iter().any(|c| c.closeness.holds());
        let n = self.pairs.len();
        self.failed_checks = checks;
        if ever_close {
            Err(AdversaryError::HorizonExhausted {
                k,
                reason: format!("block {k} reached horizon {budget} without the prefix discrepancies falling below 1/{}", k + 1),
            })
        } else {
            Err(AdversaryError::ConsistencyViolationWitness {
                k,
                n,
                best_closeness: best,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub j: u32,
    pub k: u32,
    pub distance: Closeness,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCheck {
    pub k: u32,
    /// The span is `(from, to]`.
    pub from: usize,
    pub to: usize,
    pub bound: f64,
    pub certificate: Certificate,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub n: usize,
    /// `sup over A of |mu_n(A) - lambda(A)|`.
    pub interval_discrepancy: f64,
    /// `sup over A of |nu_n(A) - nu_0(A)|`.
    pub weighted_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    ConsistencyViolationWitness { k: u32, n: usize, best_closeness: f64 },
    HorizonExhausted { k: u32, reason: String },
    Failed { message: String },
}

impl From<&AdversaryError> for Outcome {
    fn from(e: &AdversaryError) -> Self {
        match e {
            AdversaryError::ConsistencyViolationWitness { k, n, best_closeness } => {
                Outcome::ConsistencyViolationWitness {
                    k: *k,
                    n: *n,
                    best_closeness: *best_closeness,
                }
            }
            AdversaryError::HorizonExhausted { k, reason } => Outcome::HorizonExhausted {
                k: *k,
                reason: reason.clone(),
            },
            other => Outcome::Failed {
                message: other.to_string(),
            },
        }
    }
}

/// Oscillation report over the completed blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub procedure: String,
    pub config: SpliceConfig,
    pub note: String,
    pub outcome: Outcome,
    /// `n_0 = 0, n_1, ..., n_j` for the completed blocks.
    pub boundaries: Vec<usize>,
    pub blocks: Vec<BlockRecord>,
    /// Checks of the block that did not complete.
    pub failed_checks: Vec<CheckRow>,
    pub distances: Vec<PairDistance>,
    /// Every pair of block-end estimates at least `1/20` apart.
    pub oscillates: bool,
    pub spans: Vec<SpanCheck>,
    /// Discrepancy against `nu_0` at most `6/k` on every span `(n_k, n_{k+1}]`.
    pub spans_hold: bool,
    pub trajectory: Vec<TrajectoryPoint>,
}

pub const FINITE_PREFIX_NOTE: &str = "finite-prefix witness: every supremum over m >= L is truncated at the horizon";

/// Pairwise distances between block-end estimates.
pub fn pairwise_distances(
    fitted: &[Fitted],
    cells: usize,
    exec: Execution,
) -> Result<Vec<PairDistance>, AdversaryError> {
    let mut out = Vec::new();
    for j in 0..fitted.len() {
        for k in j + 1..fitted.len() {
            let distance = fitted_distance(&fitted[j], &fitted[k], cells, exec)?;
            // Quadrature values carry a relative tolerance.
            let slack = if distance.exact { 1.0 } else { 1.0 - crate::evaluation::QUADRATURE_TOLERANCE };
            out.push(PairDistance {
                j: j as u32 + 1,
                k: k as u32 + 1,
                distance,
                separated: distance.converged && distance.value >= SEPARATION * slack,
            });
        }
    }
    Ok(out)
}

/// Certifies `sup over A of |nu_n(A) - nu_0(A)| <= 6/k` for every `n` in each
/// span `(n_k, n_{k+1}]`.
pub fn span_checks(pairs: &[(f64, f64)], boundaries: &[usize], exec: Execution) -> Vec<SpanCheck> {
    let nu0 = rademacher_measure(0);
    let mut out = Vec::new();
    for k in 1..boundaries.len().saturating_sub(1) {
        let (from, to) = (boundaries[k], boundaries[k + 1]);
        let bound = 6.0 / k as f64;
        let certificate = last_exceedance(from + 1, to, bound, exec, |m| {
            sup_weighted_discrepancy(&prefix_seq(pairs, m), &nu0).expect("m >= 1")
        });
        out.push(SpanCheck {
            k: k as u32,
            from,
            to,
            bound,
            certificate,
            holds: certificate.last_violation.is_none(),
        });
    }
    out
}

fn trajectory(pairs: &[(f64, f64)], boundaries: &[usize]) -> Vec<TrajectoryPoint> {
    boundaries
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| TrajectoryPoint {
            n,
            interval_discrepancy: interval_discrepancy(&pairs[..n]),
            weighted_discrepancy: weighted_discrepancy(&pairs[..n], 0),
        })
        .collect()
}

pub struct AdversaryRun {
    pub state: SpliceState,
    pub report: AdversaryReport,
    pub error: Option<AdversaryError>,
}

impl AdversaryRun {
    /// The spliced pairs; on failure this includes the partial last block.
    pub fn pairs(&self) -> &[(f64, f64)] {
        self.state.pairs()
    }
}

pub fn build_report(state: &SpliceState, procedure: &str, outcome: Outcome) -> Result<AdversaryReport, AdversaryError> {
    let cfg = &state.config;
    let mut boundaries = vec![0];
    boundaries.extend(state.records.iter().map(|r| r.end));
    let distances = pairwise_distances(&state.fitted, cfg.quadrature_cells, cfg.execution)?;
    let spans = span_checks(&state.pairs, &boundaries, cfg.execution);
    Ok(AdversaryReport {
        procedure: procedure.to_string(),
        config: cfg.clone(),
        note: FINITE_PREFIX_NOTE.into(),
        outcome,
        oscillates: state.fitted.len() >= 2 && distances.iter().all(|d| d.separated),
        spans_hold: spans.iter().all(|s| s.holds),
        trajectory: trajectory(&state.pairs, &boundaries),
        boundaries,
        blocks: state.records.clone(),
        failed_checks: state.failed_checks.clone(),
        distances,
        spans,
    })
}

/// Splices all configured blocks, stopping at the first block that cannot
/// be completed.
pub fn build_adversarial_sequence(
    config: SpliceConfig,
    procedure: &dyn EstimatorProcedure,
) -> Result<AdversaryRun, AdversaryError> {
    let mut state = SpliceState::new(config)?;
    let mut error = None;
    while !state.is_complete() {
        if let Err(e) = state.splice_next_block(procedure) {
            error = Some(e);
            break;
        }
    }
    let outcome = error.as_ref().map_or(Outcome::Completed, Outcome::from);
    let report = build_report(&state, &procedure.name(), outcome)?;
    Ok(AdversaryRun { state, report, error })
}

/// One replayed claim of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub claim: String,
    pub ok: bool,
    pub detail: String,
}

/// Replays a report against a spliced sequence: block contents, thresholds,
/// the four block-end conditions, distances and span bounds are recomputed
/// from scratch and compared with what the report records.
pub fn verify_report(
    report: &AdversaryReport,
    pairs: &[(f64, f64)],
    procedure: &dyn EstimatorProcedure,
) -> Result<Vec<Finding>, AdversaryError> {
    let cfg = &report.config;
    cfg.validate()?;
    let mut out = Vec::new();
    let mut push = |claim: String, ok: bool, detail: String| out.push(Finding { claim, ok, detail });

    let mut expected = vec![0];
    expected.extend(report.blocks.iter().map(|b| b.end));
    push(
        "boundaries match block ends".into(),
        expected == report.boundaries && report.blocks.iter().zip(&expected).all(|(b, &s)| b.start == s),
        format!("{:?}", report.boundaries),
    );
    let last = *report.boundaries.last().unwrap_or(&0);
    push(
        "sequence covers the completed blocks".into(),
        pairs.len() >= last,
        format!("{} pairs, last boundary {last}", pairs.len()),
    );
    if pairs.len() < last {
        return Ok(out);
    }
    let mut seen = HashSet::with_capacity(pairs.len());
    let distinct = pairs.iter().all(|p| seen.insert(p.0.to_bits()));
    let inside = pairs.iter().all(|p| p.0 > 0.0 && p.0 < 1.0);
    push("points are distinct".into(), distinct, format!("{} points", pairs.len()));
    push("points lie in (0, 1)".into(), inside, format!("{} points", pairs.len()));

    let mut used = HashSet::new();
    let mut blocks = Vec::new();
    for k in 1..=(report.blocks.len() as u32 + 1).min(cfg.blocks + 1) {
        let b = materialize_block(k, cfg.horizon, cfg.seed, &used);
        used.extend(b.pairs.iter().map(|p| p.0.to_bits()));
        blocks.push(b);
    }
    let mut fitted = Vec::new();
    for rec in &report.blocks {
        let k = rec.k;
        let b = &blocks[k as usize - 1];
        let len = rec.end - rec.start;
        push(
            format!("block {k} replays from its source"),
            b.source == rec.source && b.pairs[..len] == pairs[rec.start..rec.end],
            format!("{:?}, {len} pairs", b.source),
        );
        let t = compute_block_thresholds(b, cfg.execution)?;
        let tn = compute_block_thresholds(&blocks[k as usize], cfg.execution)?;
        push(
            format!("thresholds l_{k}, l~_{k}, l_{}, l~_{}", k + 1, k + 1),
            t == rec.thresholds && tn == rec.next_thresholds,
            format!("({}, {}), ({}, {})", t.interval, t.weighted, tn.interval, tn.weighted),
        );
        let bound = k as usize * tn.interval.max(tn.weighted);
        push(
            format!("n_{k} >= {k} max(l_{}, l~_{})", k + 1, k + 1),
            rec.end >= bound && rec.length_bound == bound,
            format!("{} >= {bound}", rec.end),
        );
        let prefix = &pairs[..rec.end];
        let phi = procedure.fit(prefix)?;
        let c = fitted_distance(&phi, &target(k), cfg.quadrature_cells, cfg.execution)?;
        push(
            format!("estimate at n_{k} within 1/40 of h_{k}"),
            c == rec.closeness && c.holds(),
            format!("{}", c.value),
        );
        let thr = 1.0 / (k as f64 + 1.0);
        let d = interval_discrepancy(prefix);
        let dk = weighted_discrepancy(prefix, k);
        push(
            format!("prefix n_{k} within 1/{} of lambda", k + 1),
            d == rec.interval_discrepancy && d <= thr,
            format!("{d}"),
        );
        push(
            format!("prefix n_{k} within 1/{} of nu_{k}", k + 1),
            dk == rec.weighted_discrepancy && dk <= thr,
            format!("{dk}"),
        );
        fitted.push(phi);
    }
    if let Some(row) = report.failed_checks.last() {
        let k = report.blocks.len() as u32 + 1;
        let b = &blocks[k as usize - 1];
        let len = pairs.len() - last;
        push(
            format!("partial block {k} replays from its source"),
            pairs.len() == row.n && b.pairs[..len] == pairs[last..],
            format!("{:?}, {len} pairs", b.source),
        );
        if pairs.len() == row.n {
            let mut replayed = Vec::with_capacity(report.failed_checks.len());
            for r in &report.failed_checks {
                let prefix = &pairs[..r.n];
                let c = fitted_distance(&procedure.fit(prefix)?, &target(k), cfg.quadrature_cells, cfg.execution)?;
                let (d, dk) = match c.holds() {
                    true => (Some(interval_discrepancy(prefix)), Some(weighted_discrepancy(prefix, k))),
                    false => (None, None),
                };
                replayed.push(CheckRow {
                    n: r.n,
                    closeness: c,
                    interval_discrepancy: d,
                    weighted_discrepancy: dk,
                });
            }
            push(
                format!("checks of block {k} replay"),
                replayed == report.failed_checks,
                format!("{} checks", replayed.len()),
            );
            if let Outcome::ConsistencyViolationWitness { n, best_closeness, .. } = &report.outcome {
                let best = replayed.iter().map(|r| r.closeness.value).fold(f64::INFINITY, f64::min);
                push(
                    format!("estimate never within 1/40 of h_{k} up to n = {n}"),
                    replayed.iter().all(|r| !r.closeness.holds()) && *n == row.n && best == *best_closeness,
                    format!("closest {best}"),
                );
            }
        }
    }
    let distances = pairwise_distances(&fitted, cfg.quadrature_cells, cfg.execution)?;
    push(
        "pairwise distances".into(),
        distances == report.distances && report.oscillates == (fitted.len() >= 2 && distances.iter().all(|d| d.separated)),
        format!("{} pairs", distances.len()),
    );
    let spans = span_checks(pairs, &report.boundaries, cfg.execution);
    push(
        "span bounds against nu_0".into(),
        spans == report.spans && report.spans_hold == spans.iter().all(|s| s.holds),
        format!("{} spans", spans.len()),
    );
    Ok(out)
}
