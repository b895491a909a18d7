//! Campaign runner: loads a TOML config, dispatches to the simulator and
//! writes `results.csv`, `record.json`, `config.resolved.toml` and
//! `timing.json` into the output directory.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

pub use config::{load_config, parse_config, resolve, Campaign, Command, ConfigFile, Overrides, Plan};
pub use error::{exit, CliError, CliResult, EXIT_CODE_HELP};
pub use run::{run, BatchReport, CampaignResult, FisherRow, Outcome};

pub const DEFAULT_OUT_DIR: &str = "wvkerr-out";

#[derive(Debug, Parser)]
#[command(name = "wvkerr", version, about = "Weak-value Kerr coupling simulator", after_help = EXIT_CODE_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Sweep the coupling g directly, or through the probe delay.
    #[command(after_help = EXIT_CODE_HELP)]
    SweepG(RunArgs),
    /// Sweep the probe photon-number spread by modulation depth.
    #[command(after_help = EXIT_CODE_HELP)]
    SweepDn(RunArgs),
    /// Sweep the post-selection offset epsilon.
    #[command(after_help = EXIT_CODE_HELP)]
    SweepEps(RunArgs),
    /// Precision against mean photon number, with a power-law fit.
    #[command(after_help = EXIT_CODE_HELP)]
    Scaling(RunArgs),
    /// Classical and quantum Fisher information with Cramér–Rao bounds.
    #[command(after_help = EXIT_CODE_HELP)]
    Fisher(RunArgs),
    /// One Monte Carlo batch, or independent replications of it.
    #[command(after_help = EXIT_CODE_HELP)]
    Batch(RunArgs),
}

impl CommandArgs {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            CommandArgs::SweepG(a) => (Command::SweepG, a),
            CommandArgs::SweepDn(a) => (Command::SweepDn, a),
            CommandArgs::SweepEps(a) => (Command::SweepEps, a),
            CommandArgs::Scaling(a) => (Command::Scaling, a),
            CommandArgs::Fisher(a) => (Command::Fisher, a),
            CommandArgs::Batch(a) => (Command::Batch, a),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML campaign config.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Campaign seed; overrides `seed` in the config.
    #[arg(long, value_name = "U64", conflicts_with = "new_seed")]
    pub seed: Option<u64>,
    /// Draw a fresh seed from the OS, print it and record it in the outputs.
    #[arg(long)]
    pub new_seed: bool,
    /// Worker threads for the simulation; defaults to one per core.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
}

/// Runs `campaign` on `workers` threads, or the global pool when `None`.
pub fn run_with_workers(campaign: &Campaign, workers: Option<usize>) -> CliResult<Outcome> {
    match workers {
        Some(k) => wvkerr_core::montecarlo::with_workers(k, || run(campaign))
            .map_err(|e| CliError::from_core("", e))?,
        None => run(campaign),
    }
}

/// Runs `campaign` and writes all output files into `dir`.
pub fn run_to_dir(campaign: &Campaign, dir: &Path, workers: Option<usize>) -> CliResult<(Outcome, Vec<PathBuf>)> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let outcome = run_with_workers(campaign, workers)?;
    let timing = output::Timing {
        started_unix_seconds: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        workers,
    };
    let files = output::write_all(
        dir,
        &outcome.table,
        &outcome.record_json(campaign),
        &campaign.resolved_toml(),
        &timing,
    )?;
    Ok((outcome, files))
}

fn summary_lines(outcome: &Outcome) -> Vec<String> {
    let mut lines = Vec::new();
    match &outcome.result {
        CampaignResult::Sweep(s) => {
            if let Some(f) = &s.fit {
                lines.push(format!("{:?} fit: parameters {:?} +/- {:?}", f.kind, f.parameters, f.parameter_errors));
            }
            if let Some(g) = &s.g_estimate {
                lines.push(format!("g estimate: {:e} +/- {:e} rad", g.value, g.error));
            }
            if let Some(g) = &s.g_estimate_exact {
                lines.push(format!("g estimate (exact weak value): {:e} +/- {:e} rad", g.value, g.error));
            }
        }
        CampaignResult::Scaling(s) => match (s.exponent(), s.prefactor()) {
            (Some((b, be)), Some((a, ae))) => {
                lines.push(format!("delta_g = A N^b with b = {b:.4} +/- {be:.4}, A = {a:e} +/- {ae:e} rad"))
            }
            _ => lines.push("too few usable points for a power-law fit".to_string()),
        },
        CampaignResult::Fisher { rows } => {
            for r in rows {
                lines.push(format!(
                    "N = {:e}: F = {:e}, QFI = {:e}, classical dg_min = {:e} rad",
                    r.mean_n, r.fisher_classical_per_trial, r.qfi_per_use, r.classical_dg
                ));
            }
        }
        CampaignResult::Batch(b) => {
            lines.push(format!("exact normalized shift: {:e}", b.exact.delta_n_normalized));
            if let [one] = b.batches.as_slice() {
                lines.push(format!(
                    "Monte Carlo: {:e} +/- {:e} from {} post-selections",
                    one.delta_n_normalized,
                    one.normalized_standard_error(),
                    one.postselected_count
                ));
            }
            if let (Some(m), Some(s)) = (b.g_estimate_mean, b.g_estimate_std) {
                lines.push(format!("g estimate over replications: {m:e}, std {s:e} rad"));
            }
        }
    }
    lines
}

/// Full command-line flow. Returns the output directory.
pub fn execute(cli: &Cli) -> CliResult<PathBuf> {
    let (command, args) = cli.command.split();
    let seed = if args.new_seed {
        let seed = rand::random::<u64>() & config::MAX_SEED;
        eprintln!("seed = {seed}");
        Some(seed)
    } else {
        args.seed
    };
    let campaign = load_config(&args.config, Overrides {
        command: Some(command),
        seed,
    })?;
    let dir = args
        .out
        .clone()
        .or_else(|| campaign.resolved.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let (outcome, files) = run_to_dir(&campaign, &dir, args.workers.map(|k| k as usize))?;
    for line in summary_lines(&outcome) {
        println!("{line}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    if let CampaignResult::Sweep(s) = &outcome.result {
        if s.fit.is_none() {
            return Err(CliError::Fit(format!(
                "the sweep gave no fit (flat axis or non-converging Gaussian); data written to {}",
                dir.display()
            )));
        }
    }
    Ok(dir)
}
