use serde::{Deserialize, Serialize};

use super::{
    levy_distance, sup_interval_discrepancy, sup_weighted_discrepancy, DistributionModel,
    MeasureError, SampleSequence, SignedMeasureModel,
};

/// Deviations below this are treated as zero when deciding whether an atom
/// condition is stuck.
const ATOM_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDeviation {
    pub location: f64,
    /// `|mu_m({u}) - mu({u})|`
    pub mass: f64,
    /// `|nu_m({u}) - nu({u})|`
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: usize,
    pub interval_discrepancy: f64,
    pub weighted_discrepancy: f64,
    /// Lévy distance between the empirical and model CDFs.
    pub cdf_discrepancy: f64,
    pub atoms: Vec<AtomDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<DiagnosticRow>,
    /// Set when the CDF discrepancy shrinks across the checkpoints while some
    /// atom deviation does not: half-line convergence without atom convergence.
    pub non_stable_evidence: bool,
}

/// Evaluates the stability conditions on prefixes of `seq` at each checkpoint.
pub fn stability_diagnostic(
    seq: &SampleSequence,
    model: &DistributionModel,
    target: &SignedMeasureModel,
    checkpoints: &[usize],
) -> Result<StabilityReport, MeasureError> {
    let mut last = 0;
    for &c in checkpoints {
        if c <= last || c > seq.len() {
            return Err(MeasureError::BadCheckpoint {
                checkpoint: c,
                len: seq.len(),
            });
        }
        last = c;
    }
    let mut rows = Vec::with_capacity(checkpoints.len());
    for &m in checkpoints {
        let prefix = seq.prefix(m);
        let atoms = model
            .atoms()
            .iter()
            .map(|a| AtomDeviation {
                location: a.location,
                mass: (prefix.atom_frequency(a.location) - a.mass).abs(),
                weighted: (prefix.atom_weighted_frequency(a.location)
                    - target.atom_value(a.location))
                .abs(),
            })
            .collect();
        rows.push(DiagnosticRow {
            n: m,
            interval_discrepancy: sup_interval_discrepancy(&prefix, model)?,
            weighted_discrepancy: sup_weighted_discrepancy(&prefix, target)?,
            cdf_discrepancy: levy_distance(&prefix, model)?,
            atoms,
        });
    }
    let non_stable_evidence = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) if rows.len() >= 2 => {
            let cdf_shrinks = last.cdf_discrepancy < first.cdf_discrepancy;
            let stuck = |f: &AtomDeviation, l: &AtomDeviation| {
                (l.mass > ATOM_ZERO && l.mass >= f.mass)
                    || (l.weighted > ATOM_ZERO && l.weighted >= f.weighted)
            };
            cdf_shrinks && first.atoms.iter().zip(&last.atoms).any(|(f, l)| stuck(f, l))
        }
        _ => false,
    };
    Ok(StabilityReport {
        rows,
        non_stable_evidence,
    })
}
