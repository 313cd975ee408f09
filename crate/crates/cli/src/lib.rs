//! Command-line experiments over the roughpath library.
//!
//! Every run writes `<name>.csv` and a `<name>.json` summary holding the
//! resolved parameters, the metrics and the pass flag.

pub mod config;
pub mod error;
pub mod experiments;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

pub use config::{ExperimentConfig, Resolver, OUT_DIR_ENV};
pub use error::CliError;
use experiments::{Report, Resolved};

#[derive(Parser, Debug)]
#[command(
    name = "roughpath",
    version,
    about = "Rough-path integration experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// JSON file with parameters; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base name of the output files (defaults to the subcommand).
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub params: ExperimentConfig,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Young integral convergence order on Weierstrass paths.
    YoungRate(RunArgs),
    /// Compensated Riemann sums of ∫φ(X)dX against an Itô Brownian lift.
    RoughRate(RunArgs),
    /// Sewing remainder against its bound on random germs.
    SewBound(RunArgs),
    /// Step and Picard solutions of an RDE.
    RdeSolve(RunArgs),
    /// Convergence order of the step solver on an exactly solvable RDE.
    RdeOrder(RunArgs),
    /// Lipschitz probe of the Itô map under driver perturbations.
    ItoMap(RunArgs),
    /// Brownian sample with Chen and Itô-Stratonovich checks.
    BmGen(RunArgs),
    /// Itô-Stratonovich correction identity.
    ItoStrat(RunArgs),
    /// Signature extension to higher levels.
    SigExtend(RunArgs),
    /// Garsia-Rodemich-Rumsey ratios across grid refinements.
    GrrDiag(RunArgs),
}

type Runner = fn(Resolver) -> Result<(Resolved, Report), CliError>;

impl Command {
    pub fn parts(&self) -> (&'static str, &RunArgs, Runner) {
        use experiments::*;
        match self {
            Command::YoungRate(a) => ("young-rate", a, young_rate_run),
            Command::RoughRate(a) => ("rough-rate", a, rough_rate_run),
            Command::SewBound(a) => ("sew-bound", a, sew_bound),
            Command::RdeSolve(a) => ("rde-solve", a, rde_solve),
            Command::RdeOrder(a) => ("rde-order", a, rde_order),
            Command::ItoMap(a) => ("ito-map", a, ito_map),
            Command::BmGen(a) => ("bm-gen", a, bm_gen),
            Command::ItoStrat(a) => ("ito-strat", a, ito_strat),
            Command::SigExtend(a) => ("sig-extend", a, sig_extend),
            Command::GrrDiag(a) => ("grr-diag", a, grr_diag),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    command: &'a str,
    params: &'a BTreeMap<String, Value>,
    metrics: &'a BTreeMap<String, Value>,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Outcome of a run: what was written and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub files: Vec<PathBuf>,
    pub error: Option<CliError>,
}

fn write(dir: &Path, file: String, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(file);
    std::fs::write(&path, bytes)?;
    files.push(path);
    Ok(())
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.')
}

/// Runs one subcommand and writes its outputs.
pub fn run(command: &Command) -> Outcome {
    let (sub, args, runner) = command.parts();
    let mut files = Vec::new();
    let fail = |e: CliError, files: Vec<PathBuf>| Outcome {
        code: e.exit_code(),
        files,
        error: Some(e),
    };
    let config = match &args.config {
        Some(path) => match ExperimentConfig::from_file(path) {
            Ok(c) => c.overlay(args.params.clone()),
            Err(e) => return fail(e, files),
        },
        None => args.params.clone(),
    };
    let name = args.name.clone().unwrap_or_else(|| sub.to_string());
    if !valid_name(&name) {
        return fail(
            CliError::Config(format!("invalid output name `{name}`")),
            files,
        );
    }
    let resolver = match Resolver::new(sub, &config) {
        Ok(r) => r,
        Err(e) => return fail(e, files),
    };
    let dir = config.output_dir();
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(e.into(), files);
    }
    match runner(resolver) {
        Ok((params, report)) => {
            let summary = Summary {
                name: &name,
                command: sub,
                params: &params,
                metrics: &report.metrics,
                pass: report.pass,
                error: None,
            };
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
            let written = write(&dir, format!("{name}.csv"), &report.csv, &mut files)
                .and_then(|_| write(&dir, format!("{name}.json"), json.as_bytes(), &mut files))
                .and_then(|_| {
                    report.extra.iter().try_for_each(|(suffix, bytes)| {
                        write(&dir, format!("{name}{suffix}"), bytes, &mut files)
                    })
                });
            match written {
                Ok(()) => Outcome {
                    code: if report.pass { 0 } else { 1 },
                    files,
                    error: None,
                },
                Err(e) => fail(e, files),
            }
        }
        Err(e) => {
            // numerical failures still leave a summary behind
            if e.exit_code() == 3 {
                let given = config.given();
                let summary = Summary {
                    name: &name,
                    command: sub,
                    params: &given,
                    metrics: &BTreeMap::new(),
                    pass: false,
                    error: Some(e.to_string()),
                };
                let json =
                    serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
                let _ = write(&dir, format!("{name}.json"), json.as_bytes(), &mut files);
            }
            fail(e, files)
        }
    }
}
