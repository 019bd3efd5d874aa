//! JSON experiment configs, one shape per subcommand.
//!
//! Relative paths inside a config are resolved against the directory that
//! holds the config file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use histreg::adversary::{
    ConstantProcedure, EstimatorProcedure, ExternalProcedure, OracleProcedure, PlugInHistogram, SpliceConfig,
};
use histreg::estimator::EstimatorConfig;
use histreg::generators::GeneratorSpec;
use histreg::measures::DistributionModel;
use histreg::regression::RegressionModel;

use crate::Failure;

/// Deepest query resolution accepted for an external procedure.
const MAX_EXTERNAL_RESOLUTION: u32 = 20;

/// Reads a JSON input file. Unreadable or malformed inputs are config errors.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

pub fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config.parent().map_or_else(|| p.to_path_buf(), |d| d.join(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub generator: GeneratorSpec,
    /// Diagnostic checkpoints; powers of two up to `n` when absent.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
}

/// The limiting distribution and regression function a sequence is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub distribution: DistributionModel,
    pub regression: RegressionModel,
}

/// A truth given inline or as a path to a `truth.json` written by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthRef {
    Path(PathBuf),
    Inline(Truth),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    /// Sequence CSV to read. Exactly one of `sequence` and `generator` is set.
    #[serde(default)]
    pub sequence: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
    /// Defaults to the generator's own limit when `generator` is set.
    #[serde(default)]
    pub truth: Option<TruthRef>,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcedureSpec {
    PlugInHistogram,
    Constant {
        value: f64,
    },
    Oracle {
        #[serde(default = "default_max_k")]
        max_k: u32,
    },
    /// A subprocess speaking the line protocol of [`ExternalProcedure`].
    External {
        command: Vec<String>,
        #[serde(default = "default_resolution")]
        resolution: u32,
    },
}

fn default_max_k() -> u32 {
    OracleProcedure::default().max_k
}

fn default_resolution() -> u32 {
    10
}

impl ProcedureSpec {
    pub fn build(&self) -> Result<Box<dyn EstimatorProcedure>, Failure> {
        Ok(match self {
            ProcedureSpec::PlugInHistogram => Box::new(PlugInHistogram),
            ProcedureSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Failure::config("constant procedure value must be finite"));
                }
                Box::new(ConstantProcedure(*value))
            }
            ProcedureSpec::Oracle { max_k } => Box::new(OracleProcedure { max_k: *max_k }),
            ProcedureSpec::External { command, resolution } => {
                if command.is_empty() {
                    return Err(Failure::config("external procedure needs a command"));
                }
                if *resolution > MAX_EXTERNAL_RESOLUTION {
                    return Err(Failure::config(format!(
                        "external procedure resolution must be at most {MAX_EXTERNAL_RESOLUTION}"
                    )));
                }
                Box::new(ExternalProcedure {
                    command: command.clone(),
                    resolution: *resolution,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub procedure: ProcedureSpec,
    #[serde(flatten)]
    pub splice: SpliceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub sequence: PathBuf,
    /// Estimator checkpoint to replay. Exactly one of `checkpoint` and `report` is set.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Procedure the report was built against; read from `procedure.json`
    /// next to the report when absent.
    #[serde(default)]
    pub procedure: Option<ProcedureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub generator: GeneratorSpec,
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
    /// Explicit seeds, or `runs` consecutive seeds starting at the generator's seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub runs: Option<usize>,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_round_trip() {
        let text = r#"{
            "procedure": {"kind": "external", "command": ["python3", "phi.py"]},
            "blocks": 3,
            "horizon": 65536
        }"#;
        let c: AdversaryConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.splice.blocks, 3);
        let again: AdversaryConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);

        let text = r#"{"sequence": "seq.csv", "budget": {"type": "constant", "value": 2.0}, "truth": "truth.json"}"#;
        let e: EstimateConfig = serde_json::from_str(text).unwrap();
        assert_eq!(e.truth, Some(TruthRef::Path("truth.json".into())));
        let again: EstimateConfig = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(again, e);
    }

    #[test]
    fn missing_n_is_named() {
        let err = serde_json::from_str::<GenerateConfig>(r#"{"generator": {"kind": "remark1"}}"#).unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
    }
}
