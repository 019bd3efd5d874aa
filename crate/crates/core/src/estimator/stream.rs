use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::measures::SampleSequence;
use crate::partitions::{cell_of, window_variation, PiecewiseDyadicFn, VariationBudget};

use super::{
    accumulate, histogram_estimate, to_function, variation_check, CellStat,
    EstimatorError,
};

/// Window sums are recomputed from scratch after this many incremental updates.
const RESYNC_EVERY: usize = 4096;
/// Relative band around a threshold inside which the incremental sums are not trusted.
const DECISION_BAND: f64 = 1e-9;

fn default_max_resolution() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub budget: VariationBudget,
    /// Deepest resolution searched.
    #[serde(default = "default_max_resolution")]
    pub max_resolution: u32,
    /// Number of pairs a single resolution may consume after the previous
    /// stopping time before the search is reported as stalled.
    #[serde(default)]
    pub stall_horizon: Option<usize>,
}

impl EstimatorConfig {
    pub fn new(budget: VariationBudget) -> Self {
        EstimatorConfig {
            budget,
            max_resolution: default_max_resolution(),
            stall_horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum EstimatorStatus {
    Empty,
    /// Looking for `tau_k`; `since` pairs consumed after `tau_{k-1}`.
    Searching { k: u32, since: usize },
    /// Like `Searching`, but past the configured stall horizon.
    Stalled { k: u32, since: usize },
    /// No deeper resolution will be searched; `k` is the deepest frozen one.
    Saturated { k: u32 },
}

/// Statistics of the resolution currently being searched, with the window
/// variations `V(m_{k,n}: -i, i)` maintained incrementally.
#[derive(Debug, Clone)]
struct Search {
    k: u32,
    cells: BTreeMap<i64, CellStat>,
    sums: Vec<f64>,
    since_resync: usize,
}

impl Search {
    fn start(pairs: &[(f64, f64)], k: u32) -> Option<Self> {
        let cells = accumulate(pairs, k).ok()?;
        let mut s = Search {
            k,
            cells,
            sums: vec![0.0; k as usize],
            since_resync: 0,
        };
        s.resync();
        Some(s)
    }

    fn value(&self, j: i64) -> f64 {
        self.cells.get(&j).map_or(0.0, CellStat::value)
    }

    fn exact(&self, i: u32) -> f64 {
        window_variation(&self.cells, self.k, i, 0.0, CellStat::value)
    }

    fn resync(&mut self) {
        for i in 1..=self.k {
            self.sums[i as usize - 1] = self.exact(i);
        }
        self.since_resync = 0;
    }

    /// Smallest window `i >= 1` containing the adjacent pair `(p, p + 1)`.
    fn first_window(&self, p: i64) -> i128 {
        let w = 1i128 << self.k;
        let need = |num: i128| if num <= 0 { 0 } else { (num + w - 1) / w };
        need(1 - p as i128).max(need(p as i128 + 1)).max(1)
    }

    fn add(&mut self, j: i64, y: f64) {
        let before = [self.value(j - 1), self.value(j), self.value(j + 1)];
        self.cells.entry(j).or_default().add(y);
        let now = self.value(j);
        let changes = [
            (j - 1, (before[0] - now).abs() - (before[0] - before[1]).abs()),
            (j, (now - before[2]).abs() - (before[1] - before[2]).abs()),
        ];
        for (p, delta) in changes {
            if delta == 0.0 {
                continue;
            }
            let first = self.first_window(p);
            if first > self.k as i128 {
                continue;
            }
            for s in &mut self.sums[first as usize - 1..] {
                *s += delta;
            }
        }
        self.since_resync += 1;
        if self.since_resync >= RESYNC_EVERY {
            self.resync();
        }
    }

    /// The variation check on the current histogram. Incremental sums decide
    /// unless they fall within the rounding band of a threshold, in which case
    /// the window is recomputed exactly.
    fn passes(&mut self, budget: &VariationBudget, scale: f64) -> bool {
        for i in 1..=self.k {
            let thr = 4.0 * budget.alpha(i);
            let v = self.sums[i as usize - 1];
            let band = DECISION_BAND * (thr + v.abs() + scale);
            if v < thr - band {
                continue;
            }
            if v > thr + band {
                return false;
            }
            let exact = self.exact(i);
            self.sums[i as usize - 1] = exact;
            if !(exact < thr) {
                return false;
            }
        }
        true
    }
}

/// Streaming state of the stopping-time search.
///
/// The full prefix is retained: when `tau_k` is recorded the statistics for
/// resolution `k + 1` are rebuilt from every pair seen so far.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    pairs: Vec<(f64, f64)>,
    tau: Vec<usize>,
    frozen: Vec<PiecewiseDyadicFn>,
    search: Option<Search>,
    y_scale: f64,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Self {
        Estimator {
            config,
            pairs: Vec::new(),
            tau: Vec::new(),
            frozen: Vec::new(),
            search: None,
            y_scale: 0.0,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Number of pairs ingested.
    pub fn consumed(&self) -> usize {
        self.pairs.len()
    }

    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    pub fn frozen(&self) -> &[PiecewiseDyadicFn] {
        &self.frozen
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Consumes one pair. Returns the resolution frozen by this pair, if any.
    ///
    /// A pair whose cell index at the current search resolution is not
    /// representable is rejected and leaves the state unchanged.
    pub fn ingest(&mut self, x: f64, y: f64) -> Result<Option<u32>, EstimatorError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(EstimatorError::NonFinite { x, y });
        }
        let cell = match &self.search {
            Some(s) => Some(cell_of(x, s.k)?.j),
            None => None,
        };
        self.pairs.push((x, y));
        self.y_scale = self.y_scale.max(y.abs());
        let n = self.pairs.len();
        if n == 1 {
            self.tau.push(1);
            self.frozen.push(PiecewiseDyadicFn::constant(y));
            self.begin(1);
            return Ok(Some(0));
        }
        let (Some(search), Some(j)) = (self.search.as_mut(), cell) else {
            return Ok(None);
        };
        search.add(j, y);
        if !search.passes(&self.config.budget, self.y_scale) {
            return Ok(None);
        }
        let k = search.k;
        self.frozen.push(to_function(k, &search.cells));
        self.tau.push(n);
        self.begin(k + 1);
        Ok(Some(k))
    }

    pub fn ingest_all(&mut self, pairs: &[(f64, f64)]) -> Result<(), EstimatorError> {
        for &(x, y) in pairs {
            self.ingest(x, y)?;
        }
        Ok(())
    }

    fn begin(&mut self, k: u32) {
        self.search = if k <= self.config.max_resolution {
            Search::start(&self.pairs, k)
        } else {
            None
        };
    }

    pub fn status(&self) -> EstimatorStatus {
        let Some(&last) = self.tau.last() else {
            return EstimatorStatus::Empty;
        };
        match &self.search {
            None => EstimatorStatus::Saturated {
                k: self.tau.len() as u32 - 1,
            },
            Some(s) => {
                let since = self.pairs.len() - last;
                if self.config.stall_horizon.is_some_and(|h| since >= h) {
                    EstimatorStatus::Stalled { k: s.k, since }
                } else {
                    EstimatorStatus::Searching { k: s.k, since }
                }
            }
        }
    }

    /// `kappa_n = max { k : tau_k <= n }`.
    pub fn kappa(&self, n: usize) -> Result<u32, EstimatorError> {
        if n == 0 || n > self.pairs.len() {
            return Err(EstimatorError::BadSampleCount {
                n,
                len: self.pairs.len(),
            });
        }
        Ok(self.tau.partition_point(|&t| t <= n) as u32 - 1)
    }

    /// `m~_n`, the histogram frozen at `tau_{kappa_n}`.
    pub fn fixed_sample_estimate(&self, n: usize) -> Result<&PiecewiseDyadicFn, EstimatorError> {
        let k = self.kappa(n)?;
        Ok(&self.frozen[k as usize])
    }

    pub fn checkpoint(&self) -> EstimatorCheckpoint {
        EstimatorCheckpoint {
            budget: self.config.budget.clone(),
            max_resolution: self.config.max_resolution,
            consumed: self.pairs.len(),
            tau: self.tau.clone(),
            frozen: self.frozen.clone(),
        }
    }
}

/// Serializable summary of an estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCheckpoint {
    pub budget: VariationBudget,
    pub max_resolution: u32,
    pub consumed: usize,
    pub tau: Vec<usize>,
    pub frozen: Vec<PiecewiseDyadicFn>,
}

impl EstimatorCheckpoint {
    /// Replays the run against `seq`: every frozen histogram is rebuilt from
    /// its prefix and re-checked, and the stopping times are recomputed by a
    /// fresh streaming pass.
    pub fn verify(&self, seq: &SampleSequence) -> Result<(), EstimatorError> {
        let mismatch = |m: String| Err(EstimatorError::CheckpointMismatch(m));
        if self.consumed > seq.len() {
            return mismatch(format!(
                "checkpoint consumed {} pairs but the sequence has {}",
                self.consumed,
                seq.len()
            ));
        }
        if self.tau.len() != self.frozen.len() {
            return mismatch("tau and frozen lengths differ".into());
        }
        for (k, (&t, f)) in self.tau.iter().zip(&self.frozen).enumerate() {
            let h = histogram_estimate(seq, k as u32, t)?;
            if &h.function != f {
                return mismatch(format!("frozen estimate {k} differs from its histogram"));
            }
            if k > 0 && !variation_check(f, &self.budget) {
                return mismatch(format!("frozen estimate {k} fails the variation check"));
            }
        }
        let mut replay = Estimator::new(EstimatorConfig {
            budget: self.budget.clone(),
            max_resolution: self.max_resolution,
            stall_horizon: None,
        });
        replay.ingest_all(&seq.pairs()[..self.consumed])?;
        let replay = replay.tau;
        if replay != self.tau {
            return mismatch(format!("stopping times {:?} recompute as {:?}", self.tau, replay));
        }
        Ok(())
    }
}
