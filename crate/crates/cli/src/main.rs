use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ground_steer::config::{apply_env, read_map, RunConfig};
use ground_steer::report::{self, CommandOutcome};
use ground_steer::{Error, Result};

/// Steer bilinear parabolic systems to their ground state.
#[derive(Parser)]
#[command(name = "ground-steer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, ground couplings and hypothesis checks.
    Spectrum(Common),
    /// Empirical control cost N(T) over the configured horizons.
    NullControl(Common),
    /// Staged local loop, or a semi-global strategy (`strategy = strip|cone`).
    ControlLoop(Common),
    /// Shortcut for `control-loop` with `strategy = strip` unless set.
    Semiglobal(Common),
    /// Euler–Maruyama particles versus the Galerkin density.
    Sde(Common),
    /// Summarise the manifests under an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML (or .json) file of flat key/value settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` overrides (value read as JSON, else as a string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    /// Defaults < file < environment < flags.
    fn load(&self, strategy_default: Option<&str>) -> Result<RunConfig> {
        let mut map = match &self.config {
            Some(p) => read_map(p)?,
            None => serde_json::Map::new(),
        };
        if let Some(s) = strategy_default {
            map.entry("strategy").or_insert_with(|| s.into());
        }
        apply_env(&mut map, std::env::vars());
        let mut flags = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got {kv}")))?;
            flags.push((
                format!("GSTEER_{}", k.trim().to_ascii_uppercase()),
                v.trim().to_string(),
            ));
        }
        if let Some(s) = self.seed {
            flags.push(("GSTEER_SEED".into(), s.to_string()));
        }
        if let Some(t) = self.threads {
            flags.push(("GSTEER_THREADS".into(), t.to_string()));
        }
        if let Some(o) = &self.out {
            flags.push(("GSTEER_OUT".into(), o.display().to_string()));
        }
        apply_env(&mut map, flags);
        RunConfig::from_map(map)
    }
}

fn run(cli: Cli) -> Result<Option<CommandOutcome>> {
    let (common, f, strategy): (
        &Common,
        fn(&RunConfig, &std::path::Path) -> Result<CommandOutcome>,
        _,
    ) = match &cli.command {
        Command::Spectrum(c) => (c, report::cmd_spectrum, None),
        Command::NullControl(c) => (c, report::cmd_null_control, None),
        Command::ControlLoop(c) => (c, report::cmd_control_loop, None),
        Command::Semiglobal(c) => (c, report::cmd_control_loop, Some("strip")),
        Command::Sde(c) => (c, report::cmd_sde, None),
        Command::Report { out } => {
            print!("{}", report::cmd_report(out)?);
            return Ok(None);
        }
    };
    let cfg = common.load(strategy)?;
    f(&cfg, &cfg.out.clone()).map(Some)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(outcome)) => {
            let m = &outcome.manifest;
            println!("{}: {}", m.command, m.status);
            println!(
                "{}",
                serde_json::to_string_pretty(&m.summary).unwrap_or_default()
            );
            match outcome.error {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
