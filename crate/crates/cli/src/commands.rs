use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use histreg::adversary::{build_adversarial_sequence, verify_report, AdversaryError, AdversaryReport, Finding};
use histreg::estimator::{Estimator, EstimatorCheckpoint, EstimatorConfig, EstimatorStatus};
use histreg::evaluation::{self, l2_error_exact, power_of_two_checkpoints, CurveRow, EvaluationError};
use histreg::generators::GeneratorSpec;
use histreg::io::{read_sequence_file, write_curve, write_sequence_file};
use histreg::measures::{stability_diagnostic, SampleSequence, SignedMeasureModel, StabilityReport};
use histreg::par::Execution;

use crate::config::{
    load, resolve, AdversaryConfig, EstimateConfig, GenerateConfig, ProcedureSpec, SweepConfig, Truth, TruthRef,
    VerifyConfig,
};
use crate::{Common, Failure, EXIT_GENERATOR, EXIT_HORIZON, EXIT_STALL, EXIT_WITNESS};

fn out_dir(c: &Common) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&c.out)
        .map_err(|e| Failure::failed(format!("cannot create {}: {e}", c.out.display())))?;
    Ok(&c.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::failed(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display())))
}

fn write_pairs(path: &Path, pairs: &[(f64, f64)]) -> Result<(), Failure> {
    write_sequence_file(path, pairs).map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display())))
}

fn read_pairs(path: &Path) -> Result<SampleSequence, Failure> {
    read_sequence_file(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Powers of two up to `n`, then `n` itself.
fn default_checkpoints(n: usize) -> Vec<usize> {
    let mut c = power_of_two_checkpoints(n);
    if c.last() != Some(&n) {
        c.push(n);
    }
    c
}

fn checkpoints(given: Option<Vec<usize>>, n: usize) -> Result<Vec<usize>, Failure> {
    let c = given.unwrap_or_else(|| default_checkpoints(n));
    if c.is_empty() || c[0] == 0 || c.windows(2).any(|w| w[0] >= w[1]) || c[c.len() - 1] > n {
        return Err(Failure::config(format!(
            "checkpoints must be non-empty, strictly increasing and within 1..={n}"
        )));
    }
    Ok(c)
}

fn generator_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_GENERATOR, format!("generator precondition failed: {e}"))
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    generator: &'a GeneratorSpec,
    /// Mixture component drawn, for mixtures.
    component: Option<usize>,
    report: &'a StabilityReport,
}

pub fn generate(c: &Common) -> Result<(), Failure> {
    let mut cfg: GenerateConfig = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.generator.seed = s;
    }
    if let Some(h) = c.horizon {
        cfg.generator.n = h;
    }
    let n = cfg.generator.n;
    if n == 0 {
        return Err(Failure::config("`n` must be positive"));
    }
    let cps = checkpoints(cfg.checkpoints.take(), n)?;
    let g = cfg.generator.generate().map_err(generator_failure)?;
    let target = SignedMeasureModel::new(g.distribution.clone(), g.regression.clone());
    let report = stability_diagnostic(&g.sequence, &g.distribution, &target, &cps)
        .map_err(|e| Failure::config(format!("diagnostic: {e}")))?;

    let out = out_dir(c)?;
    write_pairs(&out.join("sequence.csv"), g.sequence.pairs())?;
    write_json(
        &out.join("truth.json"),
        &Truth {
            distribution: g.distribution.clone(),
            regression: g.regression.clone(),
        },
    )?;
    write_json(
        &out.join("diagnostic.json"),
        &Diagnostic {
            generator: &cfg.generator,
            component: g.component,
            report: &report,
        },
    )?;
    for r in &report.rows {
        println!(
            "n={:<8} interval {:.3e}  weighted {:.3e}  cdf {:.3e}",
            r.n, r.interval_discrepancy, r.weighted_discrepancy, r.cdf_discrepancy
        );
    }
    if report.non_stable_evidence {
        println!("non-stable evidence: half-line discrepancy shrinks while an atom condition does not");
    }
    println!("wrote {n} pairs to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct CurveSidecar<'a> {
    sequence: Option<&'a PathBuf>,
    generator: Option<&'a GeneratorSpec>,
    estimator: &'a EstimatorConfig,
    truth: &'a Truth,
    stalled_at: Option<usize>,
    tau: &'a [usize],
}

pub fn estimate(c: &Common) -> Result<(), Failure> {
    let mut cfg: EstimateConfig = load(&c.config)?;
    if let Some(h) = c.horizon {
        cfg.estimator.stall_horizon = Some(h);
    }
    if let (Some(s), Some(g)) = (c.seed, cfg.generator.as_mut()) {
        g.seed = s;
    }
    let (seq, generated_truth) = match (&cfg.sequence, &cfg.generator) {
        (Some(p), None) => (read_pairs(&resolve(&c.config, p))?, None),
        (None, Some(spec)) => {
            let g = spec.generate().map_err(generator_failure)?;
            let truth = Truth {
                distribution: g.distribution,
                regression: g.regression,
            };
            (g.sequence, Some(truth))
        }
        _ => return Err(Failure::config("exactly one of `sequence` and `generator` must be given")),
    };
    let truth = match &cfg.truth {
        Some(TruthRef::Path(p)) => Some(load::<Truth>(&resolve(&c.config, p))?),
        Some(TruthRef::Inline(t)) => Some(t.clone()),
        None => generated_truth,
    };
    if seq.is_empty() {
        return Err(Failure::config("the sequence is empty"));
    }
    let cps = checkpoints(cfg.checkpoints.take(), seq.len())?;

    let pairs = seq.pairs();
    let mut est = Estimator::new(cfg.estimator.clone());
    let mut rows = Vec::new();
    let mut stall = None;
    let mut fed = 0;
    for &n in &cps {
        est.ingest_all(&pairs[fed..n]).map_err(|e| Failure::failed(e.to_string()))?;
        fed = n;
        if let Some(t) = &truth {
            let f = est.fixed_sample_estimate(n).map_err(|e| Failure::failed(e.to_string()))?;
            rows.push(CurveRow {
                n,
                kappa: est.kappa(n).map_err(|e| Failure::failed(e.to_string()))?,
                error: l2_error_exact(f, &t.regression, &t.distribution),
            });
        }
        if let EstimatorStatus::Stalled { k, since } = est.status() {
            stall = Some((n, k, since));
            break;
        }
    }

    let out = out_dir(c)?;
    write_json(&out.join("checkpoint.json"), &est.checkpoint())?;
    if let Some(t) = &truth {
        let path = out.join("curve.csv");
        let file = File::create(&path).map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display())))?;
        write_curve(BufWriter::new(file), &rows).map_err(|e| Failure::failed(e.to_string()))?;
        write_json(
            &out.join("curve.meta.json"),
            &CurveSidecar {
                sequence: cfg.sequence.as_ref(),
                generator: cfg.generator.as_ref(),
                estimator: &cfg.estimator,
                truth: t,
                stalled_at: stall.map(|s| s.0),
                tau: est.tau(),
            },
        )?;
        if let Some(r) = rows.last() {
            println!("n={} kappa={} error={:.6e}", r.n, r.kappa, r.error);
        }
    }
    println!("tau = {:?}", est.tau());
    match stall {
        Some((n, k, since)) => Err(Failure::new(
            EXIT_STALL,
            format!("estimator stalled at n = {n}: tau_{k} not reached after {since} further pairs; partial outputs written"),
        )),
        None => Ok(()),
    }
}

fn adversary_failure(e: &AdversaryError) -> Failure {
    let code = match e {
        AdversaryError::BadConfig(_) => crate::EXIT_CONFIG,
        AdversaryError::Procedure(_) => crate::EXIT_FAILED,
        AdversaryError::ConsistencyViolationWitness { .. } => EXIT_WITNESS,
        AdversaryError::HorizonExhausted { .. } => EXIT_HORIZON,
    };
    Failure::new(code, e.to_string())
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn adversary(c: &Common) -> Result<(), Failure> {
    let mut cfg: AdversaryConfig = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.splice.seed = s;
    }
    if let Some(h) = c.horizon {
        cfg.splice.horizon = h;
    }
    let procedure = cfg.procedure.build()?;
    cfg.splice.validate().map_err(|e| adversary_failure(&e))?;
    let run = build_adversarial_sequence(cfg.splice.clone(), procedure.as_ref()).map_err(|e| adversary_failure(&e))?;

    let out = out_dir(c)?;
    write_json(&out.join("report.json"), &run.report)?;
    write_pairs(&out.join("sequence.csv"), run.pairs())?;
    write_json(&out.join("procedure.json"), &cfg.procedure)?;

    let report = &run.report;
    println!("procedure {}: block ends {:?}", report.procedure, report.boundaries);
    for d in &report.distances {
        println!(
            "{} separation blocks {} and {}: distance {:.4} (>= 1/20)",
            status(d.separated),
            d.j,
            d.k,
            d.distance.value
        );
    }
    for s in &report.spans {
        println!(
            "{} span ({}, {}] for h_{}: discrepancy bound {:.4}",
            status(s.holds),
            s.from,
            s.to,
            s.k,
            s.bound
        );
    }
    if let Some(e) = &run.error {
        let mut f = adversary_failure(e);
        f.message.push_str("; report and sequence written");
        return Err(f);
    }
    if !report.oscillates || !report.spans_hold {
        return Err(Failure::failed("separation or span checks failed; see report.json"));
    }
    Ok(())
}

#[derive(Serialize)]
struct Verification<'a> {
    ok: bool,
    findings: &'a [Finding],
}

pub fn verify(c: &Common) -> Result<(), Failure> {
    let cfg: VerifyConfig = load(&c.config)?;
    let seq = read_pairs(&resolve(&c.config, &cfg.sequence))?;
    let findings = match (&cfg.checkpoint, &cfg.report) {
        (Some(p), None) => {
            let ckpt: EstimatorCheckpoint = load(&resolve(&c.config, p))?;
            let (ok, detail) = match ckpt.verify(&seq) {
                Ok(()) => (true, format!("tau = {:?} over {} pairs", ckpt.tau, ckpt.consumed)),
                Err(e) => (false, e.to_string()),
            };
            vec![Finding {
                claim: "stopping times and frozen estimates replay".into(),
                ok,
                detail,
            }]
        }
        (None, Some(p)) => {
            let path = resolve(&c.config, p);
            let report: AdversaryReport = load(&path)?;
            let spec: ProcedureSpec = match &cfg.procedure {
                Some(s) => s.clone(),
                None => load(&path.with_file_name("procedure.json"))?,
            };
            let procedure = spec.build()?;
            verify_report(&report, seq.pairs(), procedure.as_ref()).map_err(|e| adversary_failure(&e))?
        }
        _ => return Err(Failure::config("exactly one of `checkpoint` and `report` must be given")),
    };
    let ok = findings.iter().all(|f| f.ok);
    let out = out_dir(c)?;
    write_json(&out.join("verify.json"), &Verification { ok, findings: &findings })?;
    for f in &findings {
        println!("{} {}: {}", status(f.ok), f.claim, f.detail);
    }
    if ok {
        Ok(())
    } else {
        let failed = findings.iter().filter(|f| !f.ok).count();
        Err(Failure::failed(format!("{failed} of {} claims failed", findings.len())))
    }
}

pub fn sweep(c: &Common) -> Result<(), Failure> {
    let mut cfg: SweepConfig = load(&c.config)?;
    if let Some(h) = c.horizon {
        cfg.generator.n = h;
    }
    let seeds = match (cfg.seeds.take(), cfg.runs) {
        (Some(s), None) => s,
        (None, Some(r)) => {
            let base = c.seed.unwrap_or(cfg.generator.seed);
            let end = base
                .checked_add(r as u64)
                .ok_or_else(|| Failure::config("seed range overflows u64"))?;
            (base..end).collect()
        }
        _ => return Err(Failure::config("exactly one of `seeds` and `runs` must be given")),
    };
    if seeds.is_empty() {
        return Err(Failure::config("no seeds to run"));
    }
    let mut seen = HashSet::new();
    if let Some(s) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Failure::config(format!("seed {s} listed twice")));
    }
    let n = cfg.generator.n;
    if n == 0 {
        return Err(Failure::config("`n` must be positive"));
    }
    let cps = checkpoints(cfg.checkpoints.take(), n)?;
    let results = evaluation::sweep(&cfg.generator, &cfg.estimator, &cps, &seeds, Execution::default());

    let out = out_dir(c)?;
    let curves = out.join("curves");
    std::fs::create_dir_all(&curves).map_err(|e| Failure::failed(format!("cannot create {}: {e}", curves.display())))?;
    let mut summary = String::from("seed,n,kappa,error,stalled\n");
    let mut first_error = None;
    let mut stalled = 0;
    for (&seed, r) in seeds.iter().zip(&results) {
        let curve = match r {
            Ok(curve) => curve,
            Err(e) => {
                let code = match e {
                    EvaluationError::Generator(_) => EXIT_GENERATOR,
                    EvaluationError::BadCheckpoints { .. } | EvaluationError::BadCells(_) => crate::EXIT_CONFIG,
                    EvaluationError::Estimator(_) => crate::EXIT_FAILED,
                };
                first_error.get_or_insert(Failure::new(code, format!("seed {seed}: {e}")));
                continue;
            }
        };
        let path = curves.join(format!("seed-{seed}.csv"));
        let file = File::create(&path).map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display())))?;
        write_curve(BufWriter::new(file), &curve.rows).map_err(|e| Failure::failed(e.to_string()))?;
        write_json(&curves.join(format!("seed-{seed}.meta.json")), &curve.meta)?;
        if let Some(last) = curve.rows.last() {
            summary.push_str(&format!(
                "{seed},{},{},{},{}\n",
                last.n,
                last.kappa,
                last.error,
                curve.meta.stalled_at.is_some()
            ));
        }
        if curve.meta.stalled_at.is_some() {
            stalled += 1;
        }
    }
    let path = out.join("summary.csv");
    File::create(&path)
        .and_then(|mut f| f.write_all(summary.as_bytes()))
        .map_err(|e| Failure::failed(format!("cannot write {}: {e}", path.display())))?;
    print!("{summary}");
    if let Some(f) = first_error {
        return Err(f);
    }
    if stalled > 0 {
        return Err(Failure::new(
            EXIT_STALL,
            format!("{stalled} of {} runs stalled; partial curves written", seeds.len()),
        ));
    }
    Ok(())
}
