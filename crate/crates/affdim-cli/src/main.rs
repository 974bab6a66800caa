//! `affdim`: estimation and verification runs over self-affine systems.
//!
//! Every command reads a system (a built-in fixture or a JSON description),
//! runs seeded estimators from the core crate, prints a short human summary
//! to stdout, and writes machine artifacts (JSON summary plus CSV tables)
//! into the output directory. Identical configuration and seed give
//! byte-identical artifacts regardless of thread count.

mod commands;
mod report;

use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "affdim", version, about = "planar self-affine measure toolkit")]
struct Cli {
    /// Path to a JSON system description {"maps":[{"A":[[..]],"b":[..]}],"p":[..]}.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Name of a built-in fixture (F1..F4).
    #[arg(long, global = true)]
    fixture: Option<String>,
    /// Seed for all stochastic stages (mandatory for stochastic commands).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample budget override.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Maximum cylinder length / level for enumerations.
    #[arg(long, global = true)]
    nmax: Option<u32>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "affdim-out")]
    out_dir: String,
    /// Worker threads (falls back to AFFDIM_THREADS, then the CPU count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tolerance overrides as NAME=VALUE (also accepted as --tolerance.NAME VALUE).
    #[arg(long = "tolerance", global = true)]
    tolerances: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Check the standing assumptions of the system.
    Validate,
    /// Sample the attractor through the coding map.
    Sample,
    /// Estimate the Lyapunov exponents.
    Lyapunov,
    /// Estimate the Furstenberg measures and their stationarity residuals.
    Furstenberg,
    /// Exact minimum distances between cylinder maps per level.
    Separation,
    /// Scale entropies and the entropy-dimension fit.
    Entropy,
    /// Dimension estimates: exponents, entropy dimension, budget split.
    Dimension,
    /// Full hypothesis checklist and dimension-formula verdict.
    Verify,
    /// Entropy-growth experiment for a translation cloud near the identity.
    Convolve,
    /// List the built-in fixtures.
    Fixtures,
}

/// Rewrites `--tolerance.name value` into `--tolerance name=value` so the
/// dotted flag form documented for the tool parses cleanly.
fn preprocess_args() -> Vec<String> {
    let raw: Vec<String> = std::env::args().collect();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let arg = &raw[i];
        if let Some(name) = arg.strip_prefix("--tolerance.") {
            if let Some((name, value)) = name.split_once('=') {
                out.push("--tolerance".into());
                out.push(format!("{name}={value}"));
            } else if i + 1 < raw.len() {
                out.push("--tolerance".into());
                out.push(format!("{name}={}", raw[i + 1]));
                i += 1;
            }
        } else {
            out.push(arg.clone());
        }
        i += 1;
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(preprocess_args());

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("AFFDIM_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("{{\"error\":\"thread pool: {e}\"}}");
            return ExitCode::from(1);
        }
    }

    let mut tolerances = BTreeMap::new();
    for t in &cli.tolerances {
        match t.split_once('=') {
            Some((name, value)) => match value.parse::<f64>() {
                Ok(v) => {
                    tolerances.insert(name.to_string(), v);
                }
                Err(e) => {
                    eprintln!("{{\"error\":\"bad tolerance {t:?}: {e}\"}}");
                    return ExitCode::from(1);
                }
            },
            None => {
                eprintln!("{{\"error\":\"tolerance must be NAME=VALUE, got {t:?}\"}}");
                return ExitCode::from(1);
            }
        }
    }

    let run = commands::Run {
        config_path: cli.config,
        fixture: cli.fixture,
        seed: cli.seed,
        samples: cli.samples,
        nmax: cli.nmax,
        out_dir: cli.out_dir,
        tolerances,
    };
    match commands::dispatch(&cli.command, &run) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let msg = serde_json::json!({
                "error": e.to_string(),
                "kind": format!("{e:?}").split([' ', '{']).next().unwrap_or("Error"),
            });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
