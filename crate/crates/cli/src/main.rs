use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use compagency::experiment::{self, ExperimentConfig};
use compagency::factorize::{factor_pairwise_distinct, factor_with_fixed};
use compagency::io::{
    parse_factor_request, parse_gap_request, parse_pool_request, to_json, to_json_pretty,
};
use compagency::verify::{self, Options};
use compagency::welfare::gap_terms;
use compagency::{pool, Error};

#[derive(Parser)]
#[command(
    name = "compagency",
    version,
    about = "Opinion pools, welfare gaps and their verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite: pools, welfare, constructions, factorize,
    /// stability, persona or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplier applied to every check tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance: f64,
        /// Instance count for every randomized check.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run a grid experiment; writes results.csv and manifest.json.
    Experiment {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config openness sample count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Pool agents: {"agents": [...], "beta": [...], "kind": "log"|"linear"}.
    Pool { input: Option<PathBuf> },
    /// Welfare gap of an agent at a pool: {"agent": ..., "pool": ...}.
    Gap { input: Option<PathBuf> },
    /// Factor a parent: {"parent": ..., "beta": [...], "fixed"?: [...], "seed"?: n}.
    Factor { input: Option<PathBuf> },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// A check failed or a domain error occurred.
    Check(anyhow::Error),
    /// Bad usage, unreadable input or malformed documents.
    Usage(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::UnknownSuite(_) => Failure::Usage(e.into()),
            _ => Failure::Check(e.into()),
        }
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(usage),
        _ => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .context("reading stdin")
                .map_err(usage)?;
            Ok(s)
        }
    }
}

fn print_line(s: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    writeln!(out, "{s}")
        .context("writing stdout")
        .map_err(usage)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(usage)
}

fn cmd_verify(
    suite: &str,
    seed: u64,
    out: Option<&Path>,
    tolerance: f64,
    samples: Option<usize>,
) -> Result<(), Failure> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(usage(anyhow::anyhow!("--tolerance must be positive")));
    }
    let opts = Options {
        seed,
        samples,
        tolerance_scale: tolerance,
    };
    let start = Instant::now();
    let report = verify::run(suite, &opts)?;
    let json = to_json_pretty(&report);
    match out {
        Some(p) => write_file(p, format!("{json}\n").as_bytes())?,
        None => print_line(&json)?,
    }
    eprintln!(
        "{suite}: {}/{} checks passed in {:.2}s",
        report.total - report.failed,
        report.total,
        start.elapsed().as_secs_f64()
    );
    for c in report.failures() {
        eprintln!(
            "FAILED {}: value {:e}, tolerance {:e}; {}",
            c.name, c.value, c.tolerance, c.detail
        );
    }
    if report.all_passed {
        Ok(())
    } else {
        Err(Failure::Check(anyhow::anyhow!(
            "{} check(s) failed",
            report.failed
        )))
    }
}

fn cmd_experiment(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    samples: Option<usize>,
) -> Result<(), Failure> {
    let raw = fs::read(config)
        .with_context(|| format!("reading {}", config.display()))
        .map_err(usage)?;
    let text = String::from_utf8(raw.clone())
        .context("config is not UTF-8")
        .map_err(usage)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = samples {
        cfg.samples = s;
    }
    let mut outcome = experiment::run(&cfg)?;
    outcome.manifest.config_hash = format!("{:x}", Sha256::digest(&raw));
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(usage)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &outcome.rows {
        w.serialize(row).context("encoding CSV").map_err(usage)?;
    }
    let csv = w.into_inner().context("encoding CSV").map_err(usage)?;
    write_file(&out.join("results.csv"), &csv)?;
    write_file(
        &out.join("manifest.json"),
        format!("{}\n", to_json_pretty(&outcome.manifest)).as_bytes(),
    )?;
    eprintln!("{} rows written to {}", outcome.rows.len(), out.display());
    Ok(())
}

fn cmd_pool(input: Option<&Path>) -> Result<(), Failure> {
    let req = parse_pool_request(&read_input(input)?)?;
    print_line(&to_json(&pool(req.kind, &req.agents, &req.beta)?))
}

fn cmd_gap(input: Option<&Path>) -> Result<(), Failure> {
    let req = parse_gap_request(&read_input(input)?)?;
    print_line(&to_json(&gap_terms(&req.agent, &req.pool)?))
}

fn cmd_factor(input: Option<&Path>) -> Result<(), Failure> {
    let req = parse_factor_request(&read_input(input)?)?;
    let f = if req.fixed.is_empty() {
        factor_pairwise_distinct(&req.parent, &req.beta, req.seed)?
    } else {
        factor_with_fixed(&req.parent, &req.fixed, &req.beta, req.seed)?
    };
    print_line(&to_json(&f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify {
            suite,
            seed,
            out,
            tolerance,
            samples,
        } => cmd_verify(suite, *seed, out.as_deref(), *tolerance, *samples),
        Command::Experiment {
            config,
            out,
            seed,
            samples,
        } => cmd_experiment(config, out, *seed, *samples),
        Command::Pool { input } => cmd_pool(input.as_deref()),
        Command::Gap { input } => cmd_gap(input.as_deref()),
        Command::Factor { input } => cmd_factor(input.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
