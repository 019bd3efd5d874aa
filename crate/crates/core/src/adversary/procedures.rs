use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;

use crate::estimator::{accumulate, to_function};
use crate::io::write_sequence;
use crate::partitions::PiecewiseDyadicFn;
use crate::regression::RegressionModel;

use super::{rademacher_eval, AdversaryError};

/// The output of an estimation procedure on one prefix.
#[derive(Clone)]
pub enum Fitted {
    /// A function with finitely many pieces; integrals against it are exact.
    Exact(RegressionModel),
    /// Pointwise evaluation only.
    BlackBox(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Fitted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fitted::Exact(m) => f.debug_tuple("Exact").field(m).finish(),
            Fitted::BlackBox(_) => f.write_str("BlackBox"),
        }
    }
}

impl Fitted {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Fitted::Exact(m) => m.eval(x),
            Fitted::BlackBox(f) => f(x),
        }
    }

    pub fn as_exact(&self) -> Option<&RegressionModel> {
        match self {
            Fitted::Exact(m) => Some(m),
            Fitted::BlackBox(_) => None,
        }
    }
}

/// A deterministic map from finite prefixes to regression estimates.
pub trait EstimatorProcedure: Send + Sync {
    fn name(&self) -> String;
    fn fit(&self, prefix: &[(f64, f64)]) -> Result<Fitted, AdversaryError>;
}

/// Histogram of the whole prefix at depth `max(1, floor(log2(n) / 2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlugInHistogram;

impl PlugInHistogram {
    pub fn depth(n: usize) -> u32 {
        if n == 0 {
            return 1;
        }
        (n.ilog2() / 2).max(1)
    }
}

impl EstimatorProcedure for PlugInHistogram {
    fn name(&self) -> String {
        "plug_in_histogram".into()
    }

    fn fit(&self, prefix: &[(f64, f64)]) -> Result<Fitted, AdversaryError> {
        let k = Self::depth(prefix.len());
        let cells = accumulate(prefix, k).map_err(|e| AdversaryError::Procedure(e.to_string()))?;
        Ok(Fitted::Exact(RegressionModel::Dyadic(to_function(k, &cells))))
    }
}

/// Ignores the data.
#[derive(Debug, Clone, Copy)]
pub struct ConstantProcedure(pub f64);

impl EstimatorProcedure for ConstantProcedure {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn fit(&self, _prefix: &[(f64, f64)]) -> Result<Fitted, AdversaryError> {
        Ok(Fitted::Exact(RegressionModel::Constant { value: self.0 }))
    }
}

/// Returns `h_k` for the `k` whose labels agree with the longest suffix of
/// the prefix, smallest `k` on ties. On spliced sequences this is the label
/// of the block currently being appended.
#[derive(Debug, Clone, Copy)]
pub struct OracleProcedure {
    pub max_k: u32,
}

impl Default for OracleProcedure {
    fn default() -> Self {
        OracleProcedure { max_k: 24 }
    }
}

impl OracleProcedure {
    pub fn infer(&self, prefix: &[(f64, f64)]) -> u32 {
        let mut best = (0usize, 1u32);
        for k in 1..=self.max_k {
            let run = prefix
                .iter()
                .rev()
                .take_while(|&&(x, y)| rademacher_eval(k, x) == y)
                .count();
            if run > best.0 {
                best = (run, k);
            }
        }
        best.1
    }
}

impl EstimatorProcedure for OracleProcedure {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn fit(&self, prefix: &[(f64, f64)]) -> Result<Fitted, AdversaryError> {
        Ok(Fitted::Exact(RegressionModel::Rademacher {
            k: self.infer(prefix),
        }))
    }
}

/// An estimator run as a subprocess.
///
/// For each prefix the command is started afresh; it receives the prefix as
/// `i,x,y` CSV on standard input, then a line `queries`, then one query point
/// per line, and must answer one `x value` line per query. Queries are the
/// midpoints of the `2^resolution` dyadic cells of `(0, 1]`, so the answer is
/// read back as a function constant on those cells.
#[derive(Debug, Clone)]
pub struct ExternalProcedure {
    pub command: Vec<String>,
    pub resolution: u32,
}

impl ExternalProcedure {
    fn queries(&self) -> Vec<f64> {
        let cells = 1u64 << self.resolution;
        let w = 2f64.powi(-(self.resolution as i32));
        (0..cells).map(|j| (j as f64 + 0.5) * w).collect()
    }
}

impl EstimatorProcedure for ExternalProcedure {
    fn name(&self) -> String {
        format!("external({})", self.command.join(" "))
    }

    fn fit(&self, prefix: &[(f64, f64)]) -> Result<Fitted, AdversaryError> {
        let fail = |m: String| AdversaryError::Procedure(format!("{}: {m}", self.name()));
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| fail("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let queries = self.queries();
        let mut input = Vec::new();
        write_sequence(&mut input, prefix).map_err(|e| fail(e.to_string()))?;
        input.extend_from_slice(b"queries\n");
        for q in &queries {
            input.extend_from_slice(format!("{q}\n").as_bytes());
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Feed input on a separate thread so a child that answers while still
        // reading cannot deadlock against a full pipe.
        let writer = std::thread::spawn(move || stdin.write_all(&input));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut values = Vec::with_capacity(queries.len());
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(x), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(fail(format!("malformed answer line {line:?}")));
            };
            let x: f64 = x.parse().map_err(|_| fail(format!("bad x in {line:?}")))?;
            let v: f64 = v.parse().map_err(|_| fail(format!("bad value in {line:?}")))?;
            let expected = queries.get(values.len()).copied();
            if expected.is_none_or(|q| (q - x).abs() > 1e-12) {
                return Err(fail(format!("answer {line:?} does not match query {}", values.len() + 1)));
            }
            if !v.is_finite() {
                return Err(fail(format!("non-finite value in {line:?}")));
            }
            values.push(v);
        }
        let status = child.wait().map_err(|e| fail(e.to_string()))?;
        writer
            .join()
            .map_err(|_| fail("writer thread panicked".into()))?
            .map_err(|e| fail(e.to_string()))?;
        if !status.success() {
            return Err(fail(format!("exited with {status}")));
        }
        if values.len() != queries.len() {
            return Err(fail(format!("answered {} of {} queries", values.len(), queries.len())));
        }
        let f = PiecewiseDyadicFn::from_cells(
            self.resolution,
            0.0,
            values.into_iter().enumerate().map(|(j, v)| (j as i64 + 1, v)),
        );
        Ok(Fitted::Exact(RegressionModel::Dyadic(f)))
    }
}
