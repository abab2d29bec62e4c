use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use alphalaw::dynamics::{
    classify_regime, contraction_certificate, simulate_trajectory, AlphaSchedule,
};
use alphalaw::estimation::{
    fit_alpha_per_problem, fit_alpha_pooled_with, fit_alpha_pooled_with_ci, fit_two_param,
    FitResult, InterceptMode, TwoParamFit,
};
use alphalaw::evidence::{encode_evidence, DEFAULT_STRENGTH_GRID};
use alphalaw::experiments::{
    calibration_compare, run_evidence_sensitivity, run_identifiability, run_k_ablation,
    run_multistep_analysis, run_noise_ablation, summarize_by_group, IdentifiabilityConfig,
    KAblationConfig, MultiStepConfig, NoiseConfig, SensitivityConfig, DEFAULT_FLIP_GRID,
};
use alphalaw::records::{
    dataset_summary, quality_filter, read_records, synthesize_multistep, synthesize_records,
    write_records_file, Exponents, FilterPolicy, RevisionRecord, SourceMethod, SynthConfig,
};
use alphalaw::report::{emit_report, fmt_float, fmt_opt, Report, Table};
use alphalaw::seeding::stream_rng;
use alphalaw::simplex::BeliefDist;
use alphalaw_collector::{
    collect_into, read_problems, synthetic_problems, HttpProvider, MockBehavior, MockConfig,
    MockProvider, PromptSet, ProtocolConfig, Provider,
};

use crate::args::*;
use crate::error::{CliError, Result};

/// Settings shared by every subcommand.
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
}

fn load(path: &Path) -> Result<Vec<RevisionRecord>> {
    let (records, errors) = read_records(path)?;
    for e in errors.iter().take(10) {
        log::warn!("{}: {e}", path.display());
    }
    if errors.len() > 10 {
        log::warn!(
            "{}: {} more invalid lines",
            path.display(),
            errors.len() - 10
        );
    }
    if records.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no valid records",
            path.display()
        )));
    }
    log::info!(
        "{}: {} records, {} rejected",
        path.display(),
        records.len(),
        errors.len()
    );
    Ok(records)
}

fn emit<A: Serialize>(g: &Globals, args: &A, tables: Vec<Table>) -> Result<()> {
    let report = Report {
        seed: g.seed,
        config: serde_json::to_value(args).map_err(alphalaw::Error::from)?,
        tables,
    };
    let manifest = emit_report(&report, &g.out)?;
    for f in &manifest.files {
        log::info!("wrote {} ({} rows)", g.out.join(&f.name).display(), f.rows);
    }
    Ok(())
}

fn print(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON values serialize")
    );
}

fn fit_table(name: &str, fit: &FitResult) -> Table {
    let mut t = Table::new(name, &FitResult::CSV_HEADER);
    t.push(fit.csv_row());
    t
}

fn two_param_table(name: &str, fit: &TwoParamFit) -> Table {
    let mut t = Table::new(name, &TwoParamFit::CSV_HEADER);
    t.push(fit.csv_row());
    t
}

fn default_path(g: &Globals, given: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match given {
        Some(p) => Ok(p.clone()),
        None => {
            std::fs::create_dir_all(&g.out).map_err(|e| CliError::io(&g.out, e))?;
            Ok(g.out.join(name))
        }
    }
}

pub fn simulate(g: &Globals, a: &SimulateArgs) -> Result<()> {
    if a.correct_index >= a.k {
        return Err(CliError::Usage(format!(
            "--correct-index {} out of range for --k {}",
            a.correct_index, a.k
        )));
    }
    let (schedule, steps) = match (&a.schedule, a.alpha) {
        (Some(s), _) => (AlphaSchedule::per_step(s.clone())?, s.len()),
        (None, Some(alpha)) => (AlphaSchedule::constant(alpha)?, a.steps),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --alpha or --schedule is required".into(),
            ))
        }
    };
    let b = encode_evidence(a.k, a.correct_index, a.evidence_s)?;
    let q0 = BeliefDist::from_weights(&a.prior.sample(a.k, &mut stream_rng(g.seed, 0))?)?;
    let traj = simulate_trajectory(&q0, &b, &schedule, steps)?;

    let mut tables = vec![traj.to_table("trajectory")];
    let mut summary = json!({
        "steps": steps,
        "geometric_mean_alpha": schedule.geometric_mean(),
        "regime": classify_regime(schedule.geometric_mean()),
        "final_max_prob": traj.states[steps].max_prob(),
    });
    match contraction_certificate(&traj) {
        Ok(cert) => {
            let mut t = Table::new(
                "certificate",
                &[
                    "step",
                    "alpha_t",
                    "hilbert_ratio",
                    "kl_ratio",
                    "cumulative_product_sq",
                    "kl_bound_ok",
                ],
            );
            for s in 0..steps {
                t.push(vec![
                    (s + 1).to_string(),
                    fmt_float(schedule.alpha_at(s)),
                    fmt_opt(cert.hilbert_ratios[s]),
                    fmt_opt(cert.kl_step_ratios[s]),
                    fmt_float(cert.cumulative_product_sq[s + 1]),
                    (!cert.kl_bound_violations.contains(&(s + 1))).to_string(),
                ]);
            }
            tables.push(t);
            summary["reference"] = json!(cert.reference);
            summary["hilbert_exact"] = json!(cert.hilbert_exact);
            summary["max_ratio_error"] = json!(cert.max_ratio_error);
            summary["kl_bounded"] = json!(cert.kl_bounded);
            summary["kl_bound_violations"] = json!(cert.kl_bound_violations.len());
        }
        Err(e) => log::warn!("no certificate: {e}"),
    }
    emit(g, a, tables)?;
    print(&summary);
    Ok(())
}

pub fn estimate(g: &Globals, a: &EstimateArgs) -> Result<()> {
    let records = load(&a.input)?;
    let mut tables = Vec::new();
    let summary = match a.model {
        EstimateModel::TwoParam => {
            let fit = fit_two_param(&records)?;
            if !fit.reliable {
                log::warn!(
                    "design is ill-conditioned (condition number {}); the two exponents are not identified",
                    fit.condition_number
                );
            }
            tables.push(two_param_table("estimate", &fit));
            serde_json::to_value(&fit).map_err(alphalaw::Error::from)?
        }
        m => {
            let mode = if m == EstimateModel::Pooled {
                InterceptMode::PerRecord
            } else {
                InterceptMode::Common
            };
            let fit = if a.bootstrap > 0 {
                fit_alpha_pooled_with_ci(&records, mode, a.bootstrap, g.seed)?
            } else {
                fit_alpha_pooled_with(&records, mode)?
            };
            tables.push(fit_table("estimate", &fit));
            serde_json::to_value(&fit).map_err(alphalaw::Error::from)?
        }
    };
    if a.by_group {
        tables.push(summarize_by_group(&records, a.bootstrap, g.seed)?.to_table("groups"));
    }
    emit(g, a, tables)?;
    print(&summary);
    Ok(())
}

pub fn per_problem(g: &Globals, a: &PerProblemArgs) -> Result<()> {
    let records = load(&a.input)?;
    let mut t = Table::new(
        "per_problem",
        &[
            "problem_id",
            "model",
            "dataset",
            "step",
            "k",
            "correct",
            "alpha",
            "intercept",
            "r_squared",
        ],
    );
    let (mut failed, mut below) = (0, 0);
    for r in &records {
        let Ok(fit) = fit_alpha_per_problem(r) else {
            failed += 1;
            continue;
        };
        if a.r2_threshold.is_some_and(|th| fit.r_squared <= th) {
            below += 1;
            continue;
        }
        t.push(vec![
            r.problem_id.clone(),
            r.model.clone(),
            r.dataset.clone(),
            r.step.to_string(),
            r.k().to_string(),
            r.is_correct().map(|c| c.to_string()).unwrap_or_default(),
            fmt_float(fit.alpha),
            fmt_float(fit.intercept),
            fmt_float(fit.r_squared),
        ]);
    }
    if failed > 0 {
        log::warn!("{failed} records have no per-problem fit");
    }
    let kept = t.rows.len();
    emit(g, a, vec![t])?;
    print(
        &json!({"records": records.len(), "fitted": kept, "no_fit": failed, "below_threshold": below}),
    );
    Ok(())
}

pub fn sweep_evidence(g: &Globals, a: &SweepEvidenceArgs) -> Result<()> {
    let records = load(&a.input)?;
    let res = run_evidence_sensitivity(
        &records,
        &SensitivityConfig {
            s_grid: a
                .s_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_STRENGTH_GRID.to_vec()),
            resamples: a.bootstrap,
            permutations: a.permutations,
            seed: g.seed,
        },
    )?;
    emit(g, a, vec![res.to_table("evidence_sensitivity")])?;
    print(
        &json!({"levels": res.levels.iter().map(|l| l.level).collect::<Vec<_>>(), "alpha": res.alphas(), "p_value": res.p_value}),
    );
    Ok(())
}

pub fn ablate_noise(g: &Globals, a: &AblateNoiseArgs) -> Result<()> {
    let records = load(&a.input)?;
    let res = run_noise_ablation(
        &records,
        &NoiseConfig {
            flip_grid: a
                .flip_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_FLIP_GRID.to_vec()),
            permutations: a.permutations,
            seed: g.seed,
        },
    )?;
    emit(g, a, vec![res.to_table("noise_ablation")])?;
    print(
        &json!({"levels": res.levels.iter().map(|l| l.level).collect::<Vec<_>>(), "alpha": res.alphas(), "r_squared": res.r_squared(), "p_value": res.p_value}),
    );
    Ok(())
}

pub fn ablate_k(g: &Globals, a: &AblateKArgs) -> Result<()> {
    let records = load(&a.input)?;
    let res = run_k_ablation(
        &records,
        &KAblationConfig {
            r2_threshold: a.r2_threshold,
            permutations: a.permutations,
            seed: g.seed,
        },
    )?;
    emit(g, a, vec![res.to_table("k_ablation")])?;
    print(
        &json!({"levels": res.levels.iter().map(|l| l.level).collect::<Vec<_>>(), "alpha": res.alphas(), "f": res.test_statistic, "p_value": res.p_value, "dropped": res.dropped_levels}),
    );
    Ok(())
}

pub fn multistep(g: &Globals, a: &MultistepArgs) -> Result<()> {
    let records = load(&a.input)?;
    let res = run_multistep_analysis(
        &records,
        &MultiStepConfig {
            resamples: a.bootstrap,
            permutations: a.permutations,
            seed: g.seed,
        },
    )?;
    emit(g, a, vec![res.to_table("multistep")])?;
    print(
        &json!({"step_means": res.step_means(), "slope": res.slope, "slope_p": res.slope_p, "r_squared": res.trend_r_squared, "geo_mean": res.geo_mean}),
    );
    Ok(())
}

pub fn identifiability(g: &Globals, a: &IdentifiabilityArgs) -> Result<()> {
    let rep = run_identifiability(&IdentifiabilityConfig {
        n_trials: a.trials,
        records_per_trial: a.records,
        k: a.k,
        alpha_true: a.alpha,
        sigma: a.sigma,
        seed: g.seed,
        ..Default::default()
    })?;
    emit(g, a, vec![rep.to_table("identifiability")])?;
    print(&serde_json::to_value(&rep.arms).map_err(alphalaw::Error::from)?);
    Ok(())
}

pub fn calibrate(g: &Globals, a: &CalibrateArgs) -> Result<()> {
    let records = load(&a.input)?;
    let table = calibration_compare(&records, a.bins)?;
    emit(g, a, vec![table.to_table("calibration")])?;
    print(&serde_json::to_value(&table).map_err(alphalaw::Error::from)?);
    Ok(())
}

pub fn filter(g: &Globals, a: &FilterArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(CliError::Usage(format!(
            "--threshold must be in [0, 1], got {}",
            a.threshold
        )));
    }
    let (records, errors) = read_records(&a.input)?;
    let (kept, mut report) = quality_filter(
        &records,
        &FilterPolicy {
            fallback_rate_threshold: a.threshold,
        },
    );
    report.count_invalid(errors.len());
    let output = default_path(g, &a.output, "filtered.jsonl")?;
    write_records_file(&output, &kept)?;

    let mut t = Table::new(
        "quality",
        &["model", "records", "fallback", "fallback_rate", "excluded"],
    );
    let mut counts: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for r in &records {
        let c = counts.entry(r.model.as_str()).or_default();
        c.0 += 1;
        c.1 += usize::from(r.source_method == SourceMethod::Fallback);
    }
    for (model, (n, f)) in counts {
        t.push(vec![
            model.to_string(),
            n.to_string(),
            f.to_string(),
            fmt_float(report.per_model_contamination[model]),
            report
                .excluded_models
                .iter()
                .any(|m| m == model)
                .to_string(),
        ]);
    }
    emit(g, a, vec![t])?;
    print(&serde_json::to_value(&report).map_err(alphalaw::Error::from)?);
    Ok(())
}

pub fn synth(g: &Globals, a: &SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::new(a.n, a.k, a.alpha)
        .with_prior(a.prior)
        .with_sigma(a.sigma)
        .with_seed(g.seed)
        .with_strength(a.evidence_s)
        .with_labels(&a.model_label, &a.dataset_label);
    if let (Some(alpha_q0), Some(alpha_b)) = (a.alpha_q0, a.alpha_b) {
        cfg = cfg.with_exponents(Exponents::Pair { alpha_q0, alpha_b });
    }
    let records = match &a.schedule {
        Some(s) => synthesize_multistep(&cfg, &AlphaSchedule::per_step(s.clone())?, s.len())?,
        None => synthesize_records(&cfg)?,
    };
    let output = default_path(g, &a.output, "records.jsonl")?;
    write_records_file(&output, &records)?;
    log::info!("wrote {} records to {}", records.len(), output.display());
    print(&json!({"records": records.len(), "output": output}));
    Ok(())
}

pub fn collect(g: &Globals, a: &CollectArgs) -> Result<()> {
    let problems = match (&a.problems, a.mock_problems) {
        (Some(p), _) => read_problems(p)?,
        (None, Some(n)) => synthetic_problems(n, a.m_candidates, g.seed),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --problems or --mock-problems is required".into(),
            ))
        }
    };
    let config = ProtocolConfig {
        m_candidates: a.m_candidates,
        temperature: a.temperature,
        evidence_strength: a.evidence_s,
        max_tokens: a.max_tokens,
        max_retries: a.max_retries,
        request_timeout_secs: a.timeout_secs,
        retry_backoff_ms: a.backoff_ms,
        concurrency: a.concurrency,
        endpoint: a.endpoint.clone(),
        model_name: a.model_name.clone(),
        auth_token_env_var: a.token_env.clone(),
    };
    config.validate()?;
    let prompts = match &a.prompts {
        Some(dir) => PromptSet::from_dir(dir)?,
        None => PromptSet::v1(),
    };
    let provider: Box<dyn Provider> = match a.provider {
        ProviderKind::Mock => Box::new(MockProvider::new(MockConfig {
            behavior: if a.mock_malformed {
                MockBehavior::Malformed
            } else {
                MockBehavior::AlphaFollower
            },
            alpha: a.mock_alpha,
            prior: a.mock_prior,
            fail_rate: a.mock_fail_rate,
            seed: g.seed,
        })?),
        ProviderKind::Http => {
            let endpoint = a.endpoint.as_deref().ok_or_else(|| {
                CliError::Usage("--endpoint is required with --provider http".into())
            })?;
            Box::new(HttpProvider::new(
                endpoint,
                &a.model_name,
                a.token_env.as_deref(),
                config.request_timeout(),
            )?)
        }
    };

    let output = default_path(g, &a.output, "collected.jsonl")?;
    let file = File::create(&output).map_err(|e| CliError::io(&output, e))?;
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io("<runtime>", e))?;
    let summary = runtime.block_on(collect_into(
        &problems,
        &config,
        &prompts,
        provider.as_ref(),
        BufWriter::new(file),
    ))?;
    log::info!(
        "{} records written to {} ({} fallback)",
        summary.written,
        output.display(),
        summary.fallback
    );
    print(&json!({
        "problems": problems.len(),
        "written": summary.written,
        "fallback": summary.fallback,
        "failed": summary.failures.iter().map(|(id, e)| json!({"id": id, "error": e.to_string()})).collect::<Vec<_>>(),
        "output": output,
    }));
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Incomplete {
            failed: summary.failures.len(),
            total: problems.len(),
        })
    }
}

pub fn report(g: &Globals, a: &ReportArgs) -> Result<()> {
    let records = load(&a.input)?;
    let summary = dataset_summary(&records);
    let mut counts = Table::new(
        "dataset_summary",
        &["model", "dataset", "n", "n_llm", "clean_fraction"],
    );
    for grp in &summary.groups {
        counts.push(vec![
            grp.model.clone(),
            grp.dataset.clone(),
            grp.n.to_string(),
            grp.n_llm.to_string(),
            fmt_float(grp.n_llm as f64 / grp.n as f64),
        ]);
    }
    let mut k_hist = Table::new("k_histogram", &["k", "n"]);
    for (k, n) in &summary.k_histogram {
        k_hist.push(vec![k.to_string(), n.to_string()]);
    }
    let groups = summarize_by_group(&records, a.bootstrap, g.seed)?;
    emit(g, a, vec![counts, k_hist, groups.to_table("group_fits")])?;
    print(&json!({
        "records": summary.n,
        "clean_fraction": summary.clean_fraction,
        "pooled_alpha": groups.pooled.alpha,
        "pooled_interval": [groups.pooled.ci_low, groups.pooled.ci_high],
        "mean_of_groups": groups.mean_of_groups,
        "std_of_groups": groups.std_of_groups,
    }));
    Ok(())
}
