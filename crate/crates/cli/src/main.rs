//! `nstab` — batch runner for the random-extremes toolkit.
//!
//! Subcommands wrap the library's checks into reproducible runs with
//! machine-readable JSON/CSV reports plus a manifest. Exit codes: 0 when
//! every checked property passed, 1 when a checked property failed, 2 on
//! usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nstab_core::checks::{
    default_s_grid, inverse_closure_fit, involution_residual, self_inverse_residual,
    semigroup_residual, GeometricFamily, HarrisFamily, PgfFamily, ResidualReport, ShakedFamily,
};
use nstab_core::explore::{explore, ExploreOptions, FamilyHandle};
use nstab_core::extremes::{check_max_stability, check_min_stability, StabilityKind};
use nstab_core::montecarlo::{analytic_transform, ks_distance, simulate_extreme, SimConfig, RNG_ALGORITHM};
use nstab_core::pgf::{Family, PgfSpec};
use nstab_core::{DistSpec, Error as CoreError};

const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
const OUT_ENV: &str = "NSTAB_OUT";

#[derive(Parser)]
#[command(name = "nstab", version, about = "Stability of random extremes: checks, simulations, exploration")]
struct Cli {
    /// Output directory for reports (default: $NSTAB_OUT, else the
    /// current directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check which functional equations a PGF spec satisfies
    CheckPgf {
        /// JSON file holding the PGF spec
        spec: PathBuf,
        /// Number of interior grid points
        #[arg(long, default_value_t = 99)]
        grid_density: usize,
        /// Residual at or below this passes an identity-class check
        #[arg(long, default_value_t = 1e-9)]
        threshold: f64,
        /// Subset of checks to run (default: every applicable check)
        #[arg(long, value_delimiter = ',')]
        checks: Vec<CheckName>,
    },
    /// Fit the affine stability map for a PGF/distribution pair
    CheckStability {
        #[arg(long)]
        pgf: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        /// Which extreme to check
        #[arg(long)]
        kind: KindArg,
        /// Max cdf residual that still passes
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Run the Monte Carlo oracle against the analytic transform
    Simulate {
        /// JSON file holding the simulation config
        #[arg(long)]
        config: PathBuf,
        /// Override the configured trial count
        #[arg(long)]
        trials: Option<usize>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search a parametric family for simultaneous solutions of the
    /// involution and semigroup equations
    Explore {
        /// Family name: harris_continuous, geo_shaked_mixture or
        /// mobius_perturbed
        #[arg(long)]
        family: String,
        /// Optional JSON file overriding the parameter box
        #[arg(long = "box")]
        box_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        starts: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckName {
    Involution,
    SelfInverse,
    InverseClosure,
    Semigroup,
    Validity,
}

impl CheckName {
    fn all() -> Vec<CheckName> {
        vec![
            CheckName::Involution,
            CheckName::SelfInverse,
            CheckName::InverseClosure,
            CheckName::Semigroup,
            CheckName::Validity,
        ]
    }

    fn label(self) -> &'static str {
        match self {
            CheckName::Involution => "involution",
            CheckName::SelfInverse => "self_inverse",
            CheckName::InverseClosure => "inverse_closure",
            CheckName::Semigroup => "semigroup",
            CheckName::Validity => "validity",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Max,
    Min,
}

impl From<KindArg> for StabilityKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Max => StabilityKind::Max,
            KindArg::Min => StabilityKind::Min,
        }
    }
}

/// A command either passes, or fails the property it checked (exit 1).
/// Input problems surface as `Err` (exit 2).
enum Outcome {
    Pass,
    Fail(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(cli.command, &out_dir) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(reason)) => {
            eprintln!("FAIL: {reason}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, out_dir: &Path) -> anyhow::Result<Outcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    match command {
        Command::CheckPgf { spec, grid_density, threshold, checks } => {
            cmd_check_pgf(&spec, grid_density, threshold, checks, out_dir)
        }
        Command::CheckStability { pgf, dist, kind, threshold } => {
            cmd_check_stability(&pgf, &dist, kind.into(), threshold, out_dir)
        }
        Command::Simulate { config, trials, seed } => cmd_simulate(&config, trials, seed, out_dir),
        Command::Explore { family, box_file, seed, starts } => {
            cmd_explore(&family, box_file.as_deref(), seed, starts, out_dir)
        }
    }
}

/// The one-parameter family a spec belongs to, when it has one.
fn family_handle_of(spec: &PgfSpec) -> Option<(Box<dyn PgfFamily>, f64, Vec<f64>)> {
    match spec.family() {
        Family::Geometric { p } => Some((Box::new(GeometricFamily), *p, vec![0.3, 0.5, 0.7, *p])),
        Family::Harris { u, j } => {
            Some((Box::new(HarrisFamily { j: *j }), *u, vec![1.5, 2.0, 3.0, *u]))
        }
        Family::Shaked { m } => Some((Box::new(ShakedFamily), *m, vec![2.0, 3.0, *m])),
        _ => None,
    }
}

fn cmd_check_pgf(
    spec_path: &Path,
    grid_density: usize,
    threshold: f64,
    requested: Vec<CheckName>,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let spec: PgfSpec = read_json(spec_path).context("reading pgf spec")?;
    if grid_density < 1 {
        bail!("grid density must be >= 1");
    }
    let grid: Vec<f64> = if grid_density == 99 {
        default_s_grid()
    } else {
        (1..=grid_density)
            .map(|i| i as f64 / (grid_density + 1) as f64)
            .collect()
    };
    let family = family_handle_of(&spec);
    let explicit = !requested.is_empty();
    let checks = if explicit { requested } else { CheckName::all() };

    let mut entries = Vec::new();
    let mut validity_json = None;
    let mut failures = Vec::new();
    let mut outputs = vec!["checks.json".to_string()];

    let mut record =
        |name: CheckName,
         passed: bool,
         extra: serde_json::Value,
         report: Option<&ResidualReport>,
         entries: &mut Vec<serde_json::Value>,
         failures: &mut Vec<String>,
         outputs: &mut Vec<String>|
         -> anyhow::Result<()> {
            let mut entry = json!({ "check": name.label(), "passed": passed });
            if let (Some(obj), serde_json::Value::Object(extra)) = (entry.as_object_mut(), extra) {
                obj.extend(extra);
            }
            if let Some(report) = report {
                entry["report"] = serde_json::to_value(report)?;
                let csv_name = format!("residuals_{}.csv", name.label());
                write_text(out_dir, &csv_name, &report.to_csv())?;
                outputs.push(csv_name);
            }
            if !passed {
                failures.push(name.label().to_string());
            }
            entries.push(entry);
            Ok(())
        };

    for check in checks {
        match check {
            CheckName::Involution => {
                let report = involution_residual(&spec, &grid, 1e-13)?;
                let passed = report.max_residual <= threshold;
                record(check, passed, json!({}), Some(&report), &mut entries, &mut failures, &mut outputs)?;
            }
            CheckName::SelfInverse => {
                let report = self_inverse_residual(&spec, &grid)?;
                let passed = report.max_residual <= threshold;
                record(check, passed, json!({}), Some(&report), &mut entries, &mut failures, &mut outputs)?;
            }
            CheckName::InverseClosure => {
                let Some((family, u, _)) = family.as_ref().map(|(f, u, g)| (f, *u, g)) else {
                    if explicit {
                        bail!("inverse-closure needs a one-parameter family spec (geometric, harris or shaked)");
                    }
                    continue;
                };
                let fit = inverse_closure_fit(family.as_ref(), u, &grid, (1e-2, 1e2))?;
                let passed = fit.report.max_residual <= threshold;
                record(
                    check,
                    passed,
                    json!({ "lambda": fit.lambda, "converged": fit.converged }),
                    Some(&fit.report),
                    &mut entries,
                    &mut failures,
                    &mut outputs,
                )?;
            }
            CheckName::Semigroup => {
                let Some((family, _, values)) = family.as_ref() else {
                    if explicit {
                        bail!("semigroup needs a one-parameter family spec (geometric, harris or shaked)");
                    }
                    continue;
                };
                let pairs: Vec<(f64, f64)> = values
                    .iter()
                    .flat_map(|&a| values.iter().map(move |&b| (a, b)))
                    .collect();
                let report = semigroup_residual(family.as_ref(), &pairs, &grid)?;
                let passed = report.max_residual <= threshold;
                record(check, passed, json!({}), Some(&report), &mut entries, &mut failures, &mut outputs)?;
            }
            CheckName::Validity => {
                let validity = spec.validate(64, 1e-9)?;
                if !validity.is_valid {
                    failures.push("validity".into());
                }
                entries.push(json!({ "check": "validity", "passed": validity.is_valid }));
                validity_json = Some(serde_json::to_value(&validity)?);
            }
        }
    }

    let passed = failures.is_empty();
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "spec": spec,
        "grid_density": grid_density,
        "threshold": threshold,
        "checks": entries,
        "validity": validity_json,
        "passed": passed,
    });
    write_json(out_dir, "checks.json", &document)?;
    write_manifest(out_dir, "check-pgf", json!({ "spec": spec }), None, &outputs)?;
    if passed {
        println!("all checks passed for {spec}");
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!("{spec}: failed checks: {}", failures.join(", "))))
    }
}

fn cmd_check_stability(
    pgf_path: &Path,
    dist_path: &Path,
    kind: StabilityKind,
    threshold: f64,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let pgf: PgfSpec = read_json(pgf_path).context("reading pgf spec")?;
    let dist = read_dist(dist_path).context("reading distribution spec")?;
    let report = match kind {
        StabilityKind::Max => check_max_stability(&pgf, &dist, threshold),
        StabilityKind::Min => check_min_stability(&pgf, &dist, threshold),
    }?;
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "pgf": pgf,
        "dist": dist,
        "threshold": threshold,
        "report": report,
    });
    write_json(out_dir, "stability.json", &document)?;
    write_manifest(
        out_dir,
        "check-stability",
        json!({ "pgf": pgf, "dist": dist }),
        None,
        &["stability.json".into()],
    )?;
    if report.passed {
        println!(
            "{kind:?}-stable: a = {:.3e}, b = {:.6}, residual = {:.3e}",
            report.map.shift, report.map.scale, report.max_residual
        );
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!(
            "not {kind:?}-stable: best-fit residual {:.3e} above threshold {threshold:.1e}",
            report.max_residual
        )))
    }
}

fn cmd_simulate(
    config_path: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let mut config: SimConfig = read_json(config_path).context("reading simulation config")?;
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

    let empirical = match simulate_extreme(&config) {
        Ok(d) => d,
        // an unusable sampler truncation is a checked failure, not a
        // usage error: the config parsed fine but cannot be honored
        Err(err @ CoreError::Truncation { .. }) => return Ok(Outcome::Fail(err.to_string())),
        Err(err) => return Err(err.into()),
    };
    let theoretical = analytic_transform(&config);
    let distance = ks_distance(&empirical, &theoretical)?;
    let tolerance = config.resolved_ks_tolerance();
    let passed = distance <= tolerance;

    let DistSpec::Empirical { samples } = &empirical else { unreachable!() };
    let mut csv = String::from("value\n");
    for v in samples {
        csv.push_str(&format!("{v}\n"));
    }
    write_text(out_dir, "empirical.csv", &csv)?;
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "rng_algorithm": RNG_ALGORITHM,
        "ks_distance": distance,
        "ks_tolerance": tolerance,
        "passed": passed,
        "empirical_csv": "empirical.csv",
    });
    write_json(out_dir, "simulation.json", &document)?;
    write_manifest(
        out_dir,
        "simulate",
        json!({ "config": config }),
        Some(config.seed),
        &["empirical.csv".into(), "simulation.json".into()],
    )?;
    if passed {
        println!("ks distance {distance:.5} within tolerance {tolerance:.5} ({} trials)", config.trials);
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!("ks distance {distance:.5} exceeds tolerance {tolerance:.5}")))
    }
}

fn cmd_explore(
    family_name: &str,
    box_file: Option<&Path>,
    seed: u64,
    starts: usize,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let family = match box_file {
        Some(path) => {
            let mut value: serde_json::Value = read_json(path).context("reading box file")?;
            // the box file may omit the name; the --family flag wins
            value["name"] = json!(family_name);
            serde_json::from_value::<FamilyHandle>(value).context("parsing box file")?
        }
        None => serde_json::from_value(json!({ "name": family_name }))
            .context("unknown explorer family")?,
    };
    let options = ExploreOptions { n_starts: starts, ..ExploreOptions::default() };
    let result = explore(&family, &options, seed)?;
    write_text(out_dir, "trace.csv", &result.trace_to_csv())?;
    let document = json!({
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "seed": seed,
        "options": options,
        "result": result,
    });
    write_json(out_dir, "explore.json", &document)?;
    write_manifest(
        out_dir,
        "explore",
        json!({ "family": family, "options": options }),
        Some(seed),
        &["explore.json".into(), "trace.csv".into()],
    )?;
    println!("{}", result.interpretation);
    if result.n_converged >= 1 {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail("no explorer start converged".into()))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Distribution specs load like any JSON spec, except that an empirical
/// kind may name a one-column CSV instead of inlining its samples.
fn read_dist(path: &Path) -> anyhow::Result<DistSpec> {
    let mut value: serde_json::Value = read_json(path)?;
    if value["kind"] == "empirical" {
        if let Some(csv_path) = value["csv"].as_str() {
            let resolved = path.parent().unwrap_or(Path::new(".")).join(csv_path);
            let text = fs::read_to_string(&resolved)
                .with_context(|| format!("cannot read samples csv {}", resolved.display()))?;
            let samples = parse_sample_csv(&text)?;
            value = json!({ "kind": "empirical", "samples": samples });
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn parse_sample_csv(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.parse::<f64>().is_err()) {
            continue; // blank line or header
        }
        samples.push(
            line.parse::<f64>()
                .with_context(|| format!("line {}: not a number: {line:?}", i + 1))?,
        );
    }
    Ok(samples)
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(dir, name, &(text + "\n"))
}

fn write_text(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    command: &str,
    inputs: serde_json::Value,
    seed: Option<u64>,
    outputs: &[String],
) -> anyhow::Result<()> {
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "seed": seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "outputs": outputs,
    });
    write_json(dir, "manifest.json", &manifest)
}
