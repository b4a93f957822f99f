use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qseal_lab::config::{ExperimentSpec, Kind, ProtocolName, StrategyName};
use qseal_lab::demo::{seal_demo, DemoArgs, DemoRule};
use qseal_lab::experiment::run_session_trial;
use qseal_lab::formats::SessionFile;
use qseal_lab::{default_output, run_experiment, OUT_DIR_ENV};

/// Seeded experiments on quantum seals and seal-based bit commitment.
#[derive(Parser)]
#[command(name = "qseal-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per grid cell (overrides the config file).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Experiment spec in TOML.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Report path; the metadata sidecar is written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Default output directory when --out is not given.
    #[arg(long, global = true, env = OUT_DIR_ENV, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Seal a string or a bit, optionally read it, and check every qubit.
    SealDemo(DemoCli),
    /// Basic Protocol sessions.
    CommitBasic(SessionCli),
    /// Advanced Protocol sessions.
    CommitAdvanced(SessionCli),
    /// A cheating strategy over a parameter grid.
    Attack(AttackCli),
    /// A strategy over a grid, requiring a nonincreasing rate along it.
    Sweep(AttackCli),
}

#[derive(Args)]
struct DemoCli {
    /// String length (default 8, or 40 with a bit rule).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = std::f64::consts::PI / 8.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Read the seal before the owner checks it.
    #[arg(long, overrides_with = "no_read")]
    read: bool,
    #[arg(long)]
    no_read: bool,
    #[arg(long, value_enum, default_value_t = DemoRule::String)]
    rule: DemoRule,
    /// Basis angle of the rotated-pair rule, in degrees.
    #[arg(long, default_value_t = 15)]
    angle: u16,
}

#[derive(Args)]
struct SessionCli {
    #[arg(long, value_enum)]
    strategy: Option<StrategyName>,
    /// Committed bit; random per trial when absent.
    #[arg(long)]
    bit: Option<u8>,
    /// Also write the session file of the first trial here.
    #[arg(long, value_name = "PATH")]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct AttackCli {
    #[arg(long, value_enum)]
    strategy: Option<StrategyName>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolName>,
    /// Target bit; random per trial when absent.
    #[arg(long)]
    bit: Option<u8>,
}

fn load_spec(cli: &Cli, kind: Kind) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec = ExperimentSpec::from_toml(&text)?;
            if spec.kind != kind {
                bail!("{} describes a {} experiment, not {kind}", path.display(), spec.kind);
            }
            spec
        }
        None => ExperimentSpec::new(kind),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(trials) = cli.trials {
        spec.trials = trials;
    }
    if let Some(out) = &cli.out {
        spec.output = Some(out.clone());
    }
    Ok(spec)
}

/// Runs the experiment; `Ok(false)` when some row failed its check.
fn experiment(cli: &Cli, spec: ExperimentSpec, transcript: Option<&PathBuf>) -> Result<bool> {
    let plan = spec.plan()?;
    let report = run_experiment(&plan)?;
    let out = plan
        .spec
        .output
        .clone()
        .unwrap_or_else(|| default_output(cli.out_dir.as_deref(), &plan));
    let meta = report
        .write(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    print!("{}", report.to_csv()?);
    eprintln!("report: {}\nmetadata: {}", out.display(), meta.display());
    if let Some(path) = transcript {
        let (_, outcome) = run_session_trial(&plan, &plan.cells[0], 0)?;
        let file = SessionFile {
            transcript: outcome.transcript,
            record: outcome.owner_record,
        };
        fs::write(path, file.to_text()).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("session file: {}", path.display());
    }
    let ok = report.all_pass();
    if !ok {
        let failed: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.cell.to_string())
            .collect();
        eprintln!("failed cells: {}", failed.join(", "));
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::SealDemo(d) => {
            if cli.config.is_some() {
                let spec = load_spec(cli, Kind::SealDemo)?;
                return experiment(cli, spec, None);
            }
            let args = DemoArgs {
                seed: cli.seed.unwrap_or(qseal_lab::config::DEFAULT_SEED),
                length: d.length,
                theta: d.theta,
                alpha: d.alpha,
                read: d.read && !d.no_read,
                rule: d.rule,
                angle: d.angle,
            };
            let (dump, _) = seal_demo(&args)?;
            match &cli.out {
                Some(path) => fs::write(path, &dump).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{dump}"),
            }
            Ok(true)
        }
        Command::CommitBasic(s) | Command::CommitAdvanced(s) => {
            let kind = if matches!(cli.command, Command::CommitBasic(_)) {
                Kind::Basic
            } else {
                Kind::Advanced
            };
            let mut spec = load_spec(cli, kind)?;
            if s.strategy.is_some() {
                spec.strategy = s.strategy;
            }
            if s.bit.is_some() {
                spec.bit = s.bit;
            }
            experiment(cli, spec, s.transcript.as_ref())
        }
        Command::Attack(a) | Command::Sweep(a) => {
            let kind = if matches!(cli.command, Command::Attack(_)) {
                Kind::Attack
            } else {
                Kind::Sweep
            };
            let mut spec = load_spec(cli, kind)?;
            if a.strategy.is_some() {
                spec.strategy = a.strategy;
            }
            if a.protocol.is_some() {
                spec.protocol = a.protocol;
            }
            if a.bit.is_some() {
                spec.bit = a.bit;
            }
            let collective = matches!(spec.strategy, None | Some(StrategyName::CollectiveSearch));
            if kind == Kind::Sweep && cli.config.is_none() && collective {
                // the default sweep: collective search over n at s - m = 32
                spec.grid.s = Some(vec![48]);
                spec.grid.n = Some(vec![2, 3, 4, 5]);
            }
            experiment(cli, spec, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
