//! `skewlab`: subcommand front end over the skewlab library.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use config::{ConfigError, RunConfig};

/// Exit codes shared with the README.
pub mod exit {
    pub const OK: u8 = 0;
    pub const RUNTIME: u8 = 1;
    pub const FAIL_VERDICT: u8 = 2;
    pub const RESOURCE_CAP: u8 = 3;
    pub const CONFIG: u8 = 4;
}

#[derive(Parser, Debug)]
#[command(name = "skewlab", version, about = "Basins, backward orbits and Kobayashi distance estimates for polynomial skew products")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set experiment.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; shorthand for `--set out_dir=DIR`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Class membership report for the configured map.
    Check {
        /// Reuse a U raster written by `basin` with the same config.
        #[arg(long)]
        u_grid: Option<PathBuf>,
    },
    /// Basin of the base map on a raster, plus a picture.
    Basin,
    /// Basin slice over `slice.z`, with backward-orbit points overlaid.
    Slice,
    /// Backward orbit of the fixed point up to the largest configured depth.
    Preimages,
    /// Stable-manifold series and continued stable graphs.
    Stable,
    /// Distance estimates between `distance.from` and `distance.to`.
    Distance {
        #[arg(long)]
        u_grid: Option<PathBuf>,
    },
    /// Sampled distance bounds by entry-time shell.
    Experiment,
    /// Exact check of the worked example's two inequalities for `verify.l`, `verify.b`.
    VerifyExample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Basin => "basin",
            Command::Slice => "slice",
            Command::Preimages => "preimages",
            Command::Stable => "stable",
            Command::Distance { .. } => "distance",
            Command::Experiment => "experiment",
            Command::VerifyExample => "verify-example",
        }
    }
}

fn main() -> ExitCode {
    let help = format!(
        "Configuration keys and defaults (set in a TOML file or with --set):\n{}\n\n\
         Exit codes: 0 success, 1 runtime error, 2 a check returned FAIL, 3 resource cap, 4 configuration error.",
        config::documented_keys()
    );
    let matches = match Cli::command().after_long_help(help.clone()).after_help(help).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(exit::CONFIG);
        }
    };
    let mut overrides = cli.set.clone();
    if let Some(out) = &cli.out {
        overrides.push(format!("out_dir={:?}", out.display().to_string()));
    }
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return report_error(None, cli.out.as_deref(), cli.command.name(), &e),
    };
    if cfg.threads > 0 {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match commands::run(&cli.command, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => report_error(Some(&cfg), Some(&cfg.out_dir), cli.command.name(), &e),
    }
}

/// Exit code for an error, by its root cause.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return exit::CONFIG;
    }
    match e.downcast_ref::<skewlab::Error>() {
        Some(skewlab::Error::ResourceCap { .. }) => exit::RESOURCE_CAP,
        Some(skewlab::Error::InvalidInput(_)) => exit::CONFIG,
        _ => exit::RUNTIME,
    }
}

/// Prints a one-line JSON error record and, when possible, saves it as
/// `error.json` in the output directory.
fn report_error(cfg: Option<&RunConfig>, out_dir: Option<&Path>, command: &str, e: &anyhow::Error) -> ExitCode {
    let code = exit_code(e);
    let kind = match code {
        exit::CONFIG => "config",
        exit::RESOURCE_CAP => "resource-cap",
        _ => "runtime",
    };
    let record = serde_json::json!({
        "command": command,
        "kind": kind,
        "exit_code": code,
        "message": format!("{e:#}"),
        "config_hash": cfg.map(RunConfig::hash),
    });
    eprintln!("{record}");
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
    ExitCode::from(code)
}
