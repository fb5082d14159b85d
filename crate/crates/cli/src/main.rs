//! `toruscover`: runs the experiment pipelines and writes a run directory.

mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use toruscover::analytic::AnalyticConstants;
use toruscover::coverage::{certify_coverage, certify_coverage_adaptive, covering_density, AdaptiveLimits};
use toruscover::experiments::{
    pilot_grid, run_coverage_scan, run_e123_diagnostics, run_lemma_suite, run_multiplicity_profile,
    run_second_moment, Certifier,
};
use toruscover::sampling::sample_ppp;
use toruscover::torus::build_probe_net;

use config::{Layers, Resolved};
use error::CliError;
use output::{num, opt, read_manifest, unix_now, without, RunDir, RunManifest};

#[derive(Parser)]
#[command(name = "toruscover", version, about = "Random coverings of flat tori by convex bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for xi, xi_0 and beta(delta).
    Constants(RunArgs),
    /// Draw one Poisson process sample.
    Sample(RunArgs),
    /// Certify coverage of one sample.
    Cover(RunArgs),
    /// Coverage fraction across an intensity grid.
    Scan(RunArgs),
    /// Multiplicity profile at a fixed point.
    Multiplicity(RunArgs),
    /// E1/E2/E3 event frequencies (ball bodies).
    E123(RunArgs),
    /// Second-moment analysis of uncovered targets.
    SecondMoment(RunArgs),
    /// Check the non-asymptotic inequality ledger.
    VerifyLemmas(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run from a manifest written by an earlier run.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Run directory (default `runs/<subcommand>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, env = "TORUSCOVER_THREADS")]
    threads: Option<usize>,
    /// Configuration overrides as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Constants(a) => ("constants", a),
            Command::Sample(a) => ("sample", a),
            Command::Cover(a) => ("cover", a),
            Command::Scan(a) => ("scan", a),
            Command::Multiplicity(a) => ("multiplicity", a),
            Command::E123(a) => ("e123", a),
            Command::SecondMoment(a) => ("second-moment", a),
            Command::VerifyLemmas(a) => ("verify-lemmas", a),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

/// Splits `--key value` / `--key=value` pairs, lifting the run flags that
/// landed among the overrides.
fn split_overrides(args: &RunArgs) -> Result<(RunArgs, Vec<(String, String)>), CliError> {
    let mut run = args.clone();
    let mut pairs = Vec::new();
    let mut it = args.overrides.iter();
    while let Some(token) = it.next() {
        let key = token
            .strip_prefix("--")
            .ok_or_else(|| CliError::Config(format!("expected `--key value`, got `{token}`")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config(format!("key `{key}` is missing a value")))?;
                (key.to_string(), v.clone())
            }
        };
        match key.as_str() {
            "config" => run.config = Some(value.into()),
            "manifest" => run.manifest = Some(value.into()),
            "out" => run.out = Some(value.into()),
            "threads" => {
                run.threads = Some(
                    value
                        .parse()
                        .map_err(|_| CliError::Config(format!("key `threads`: expected a positive integer, got `{value}`")))?,
                )
            }
            _ => pairs.push((key, value)),
        }
    }
    if run.config.is_some() && run.manifest.is_some() {
        return Err(CliError::Config("`--config` and `--manifest` are mutually exclusive".into()));
    }
    Ok((run, pairs))
}

fn run(command: &Command) -> Result<(), CliError> {
    let started = unix_now();
    let (name, args) = command.parts();
    let (args, pairs) = split_overrides(args)?;
    let mut layers = Layers::default();
    if let Some(path) = &args.config {
        layers.file(path)?;
    }
    if let Some(path) = &args.manifest {
        let manifest = read_manifest(path)?;
        if manifest.subcommand != name {
            return Err(CliError::Config(format!(
                "manifest records subcommand `{}`, not `{name}`",
                manifest.subcommand
            )));
        }
        match serde_json::to_value(&manifest.config)? {
            serde_json::Value::Object(map) => layers.object(&map)?,
            _ => return Err(CliError::Config("manifest config is not a table".into())),
        }
    }
    for (key, value) in &pairs {
        layers.override_text(key, value)?;
    }
    let resolved = layers.raw()?.resolve()?;
    if name != "constants" {
        resolved.experiment.validate()?;
    }
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::Config("key `threads`: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("key `threads`: {e}")))?;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    let mut dir = RunDir::create(out.clone())?;
    let outcome = dispatch(name, &resolved, &mut dir);
    let manifest = RunManifest {
        schema: "manifest/1".into(),
        subcommand: name.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: resolved.experiment.master_seed,
        torus_volume_ratio: (name != "constants").then(|| resolved.experiment.torus_volume_ratio()),
        config: resolved.echo.clone(),
        started_unix: started,
        finished_unix: 0.0,
        outputs: Vec::new(),
    };
    match outcome {
        Ok(summary) => {
            dir.finish(manifest)?;
            println!("{name}: {summary} -> {}", out.display());
            Ok(())
        }
        Err(e @ CliError::Lemma(_)) => {
            dir.finish(manifest)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn dispatch(name: &str, r: &Resolved, dir: &mut RunDir) -> Result<String, CliError> {
    let cfg = &r.experiment;
    match name {
        "constants" => {
            let constants = AnalyticConstants::compute(r.tolerance, cfg.delta)?;
            dir.json("report.json", &constants)?;
            Ok(serde_json::to_string(&constants)?)
        }
        "sample" | "cover" => {
            let rho = cfg.intensities[0];
            let x = sample_ppp(&cfg.torus, rho, &cfg.seed(r.trial))?;
            let density = covering_density(&x, &cfg.body)?;
            if name == "sample" {
                let n = cfg.dim();
                let mut header = vec!["index".to_string()];
                header.extend((0..n).map(|i| format!("x{i}")));
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let rows: Vec<Vec<String>> = x
                    .iter()
                    .enumerate()
                    .map(|(i, p)| std::iter::once(i.to_string()).chain(p.iter().map(|v| num(*v))).collect())
                    .collect();
                dir.csv("points.csv", "points/1", &header, &rows)?;
                dir.json(
                    "report.json",
                    &json!({
                        "intensity": rho,
                        "trial": r.trial,
                        "points": x.len(),
                        "expected_points": rho * cfg.torus.volume(),
                        "covering_density": density,
                    }),
                )?;
                return Ok(format!("{} points", x.len()));
            }
            let verdict = match cfg.certifier {
                Certifier::Net => {
                    let net = build_probe_net(&cfg.torus, cfg.net_radius, cfg.body.net_norm())?;
                    certify_coverage(&x, &cfg.body, &net)?
                }
                Certifier::Adaptive => certify_coverage_adaptive(&x, &cfg.body, &AdaptiveLimits::new(cfg.cell_radius))?,
            };
            dir.json(
                "report.json",
                &json!({
                    "intensity": rho,
                    "trial": r.trial,
                    "points": x.len(),
                    "covering_density": density,
                    "certifier": cfg.certifier,
                    "verdict": verdict,
                }),
            )?;
            Ok(format!("{} ({} points)", verdict.status.name(), x.len()))
        }
        "scan" => {
            let mut cfg = cfg.clone();
            if r.pilot_trials > 0 {
                cfg.intensities = pilot_grid(&cfg, r.pilot_trials, r.pilot_points)?;
            }
            let table = run_coverage_scan(&cfg)?;
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|row| {
                    vec![
                        num(row.intensity),
                        row.trials.to_string(),
                        row.covered.to_string(),
                        row.uncovered.to_string(),
                        row.undetermined.to_string(),
                        num(row.covered_fraction),
                        num(row.fraction_ci.0),
                        num(row.fraction_ci.1),
                        num(row.smoothed_fraction),
                        num(row.mean_density),
                        num(row.density_ci.0),
                        num(row.density_ci.1),
                        opt(row.mean_mult_lower),
                        opt(row.mean_mult_upper),
                        row.undetermined_warning.to_string(),
                    ]
                })
                .collect();
            dir.csv(
                "scan.csv",
                "scan/1",
                &[
                    "intensity",
                    "trials",
                    "covered",
                    "uncovered",
                    "undetermined",
                    "covered_fraction",
                    "fraction_ci_low",
                    "fraction_ci_high",
                    "smoothed_fraction",
                    "mean_density",
                    "density_ci_low",
                    "density_ci_high",
                    "mean_mult_lower",
                    "mean_mult_upper",
                    "undetermined_warning",
                ],
                &rows,
            )?;
            let mut trials = Vec::new();
            for rec in &table.trials {
                for (j, &rho) in cfg.intensities.iter().enumerate() {
                    let mult = rec.multiplicity.as_ref().map(|m| m[j]);
                    trials.push(vec![
                        rec.trial_index.to_string(),
                        j.to_string(),
                        num(rho),
                        rec.point_counts[j].to_string(),
                        rec.verdicts[j].name().to_string(),
                        opt(rec.coverage_time.map(|c| c.0)),
                        opt(rec.coverage_time.map(|c| c.1)),
                        rec.cells_evaluated.to_string(),
                        rec.unresolved_cells.to_string(),
                        mult.map(|m| m.0.to_string()).unwrap_or_default(),
                        mult.map(|m| m.1.to_string()).unwrap_or_default(),
                    ]);
                }
            }
            dir.csv(
                "trials.csv",
                "scan-trials/1",
                &[
                    "trial",
                    "intensity_index",
                    "intensity",
                    "points",
                    "verdict",
                    "coverage_time_low",
                    "coverage_time_high",
                    "cells_evaluated",
                    "unresolved_cells",
                    "mult_lower",
                    "mult_upper",
                ],
                &trials,
            )?;
            dir.json("report.json", &without(serde_json::to_value(&table)?, "trials"))?;
            Ok(match (table.threshold, table.threshold_ci) {
                (Some(t), Some((lo, hi))) => format!("threshold {t:.4} [{lo:.4}, {hi:.4}]"),
                (Some(t), None) => format!("threshold {t:.4} (no interval)"),
                _ => "threshold outside the grid".into(),
            })
        }
        "multiplicity" => {
            let report = run_multiplicity_profile(cfg)?;
            let rows: Vec<Vec<String>> = report
                .per_trial
                .iter()
                .map(|(t, points, m)| vec![t.to_string(), points.to_string(), m.to_string()])
                .collect();
            dir.csv("trials.csv", "multiplicity-trials/1", &["trial", "points", "multiplicity"], &rows)?;
            dir.json("report.json", &without(serde_json::to_value(&report)?, "per_trial"))?;
            Ok(format!("total variation {:.4}", report.total_variation))
        }
        "e123" => {
            let report = run_e123_diagnostics(cfg)?;
            let rows: Vec<Vec<String>> = report
                .per_trial
                .iter()
                .map(|(j, t, e1, e2, e3)| {
                    vec![j.to_string(), num(cfg.intensities[*j]), t.to_string(), e1.to_string(), e2.to_string(), e3.to_string()]
                })
                .collect();
            dir.csv("trials.csv", "e123-trials/1", &["intensity_index", "intensity", "trial", "e1", "e2", "e3"], &rows)?;
            dir.json("report.json", &without(serde_json::to_value(&report)?, "per_trial"))?;
            Ok(report.label.to_string())
        }
        "second-moment" => {
            let report = run_second_moment(cfg)?;
            let rows: Vec<Vec<String>> = report
                .per_trial
                .iter()
                .enumerate()
                .map(|(t, b)| vec![t.to_string(), b.to_string()])
                .collect();
            dir.csv("trials.csv", "second-moment-trials/1", &["trial", "uncovered_targets"], &rows)?;
            dir.json("report.json", &without(serde_json::to_value(&report)?, "per_trial"))?;
            Ok(format!("{} targets, P[B=0] bound {:.4}", report.targets, report.analytic_bound))
        }
        "verify-lemmas" => {
            let ledger = run_lemma_suite(cfg)?;
            dir.text("lemmas.txt", &ledger.render())?;
            dir.json("report.json", &ledger)?;
            if ledger.passed() {
                Ok(format!("{} inequalities pass", ledger.rows.len()))
            } else {
                let failed: Vec<&str> = ledger.rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
                Err(CliError::Lemma(failed.join(", ")))
            }
        }
        other => Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    }
}
