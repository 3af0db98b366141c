use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hetnet_core::config::{ScenarioKind, SimConfig};
use hetnet_core::SolverRegistry;
use hetnet_harness::acceptance::{run_criterion, AcceptanceContext, Status, Verdict, CRITERIA, DEFAULT_SEED};
use hetnet_harness::experiment::{run_experiment, ExperimentId, ExperimentSpec};
use hetnet_harness::output::write_results;

#[derive(Parser)]
#[command(name = "hetnet", version, about = "Energy-minimizing resource allocation experiments for two-tier cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML file with the base configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every trial seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverChoice>,
    /// Restrict to one access regime.
    #[arg(long, global = true)]
    scenario: Option<ScenarioKind>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Dual,
    Iterative,
    Both,
}

impl SolverChoice {
    fn names(self) -> Vec<String> {
        match self {
            Self::Dual => vec!["dual".into()],
            Self::Iterative => vec!["iterative".into()],
            Self::Both => vec!["dual".into(), "iterative".into()],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (or `all`) and write CSV files and a plot.
    Run {
        /// Experiment name, or `all`.
        experiment: String,
    },
    /// Evaluate the acceptance criteria.
    Accept {
        /// Criteria to evaluate; all when omitted.
        #[arg(long = "criterion", value_parser = clap::value_parser!(u8).range(1..=8))]
        criteria: Vec<u8>,
        /// Also fail when a criterion is evaluated but not met.
        #[arg(long)]
        strict: bool,
    },
    /// Compare the solvers with the exhaustive and grid oracles.
    OracleCheck,
}

fn base_config(common: &Common) -> Result<SimConfig> {
    let cfg = match &common.config {
        Some(path) => SimConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => SimConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn experiments(name: &str) -> Result<Vec<ExperimentId>> {
    if name == "all" {
        return Ok(ExperimentId::ALL.to_vec());
    }
    Ok(vec![name.parse()?])
}

fn run(common: &Common, name: &str) -> Result<bool> {
    let base = base_config(common)?;
    let registry = SolverRegistry::with_defaults(&base.dual, &base.pricing);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut complete = true;
    for id in experiments(name)? {
        let mut spec = ExperimentSpec::new(id, base.clone());
        if let Some(seed) = common.seed {
            spec.master_seed = seed;
        }
        if let Some(trials) = common.trials {
            spec.trials = trials;
        }
        if let Some(choice) = common.solver {
            spec.solvers = choice.names();
        }
        if let Some(kind) = common.scenario {
            if id.is_pricing() && kind != ScenarioKind::MsfHybrid {
                bail!("{id} prices hosted users and needs --scenario msf-hybrid");
            }
            spec.kinds = vec![kind];
        }
        spec.validate()?;
        eprintln!("running {id}: {} points x {} trials", spec.sweep.len() * spec.rate_thresholds.len(), spec.trials);
        let table = run_experiment(&spec, &registry)?;
        for row in table.errors() {
            eprintln!("  error: {} {} trial {} at {}: {}", row.scenario, row.solver, row.trial, row.sweep_value, row.error);
        }
        complete &= table.complete();
        for path in write_results(&out, id, &table)? {
            println!("{}", path.display());
        }
    }
    Ok(complete)
}

fn report(ctx: &AcceptanceContext, criteria: &[u8], out: Option<&PathBuf>) -> Result<Vec<Verdict>> {
    let mut verdicts = Vec::new();
    for &c in criteria {
        let v = run_criterion(ctx, c);
        println!("{v}");
        verdicts.push(v);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("acceptance.json");
        std::fs::write(&path, serde_json::to_string_pretty(&verdicts)?)?;
        eprintln!("wrote {}", path.display());
    }
    let passed = verdicts.iter().filter(|v| v.passed()).count();
    println!("{passed}/{} criteria passed", verdicts.len());
    Ok(verdicts)
}

fn context(common: &Common) -> Result<AcceptanceContext> {
    if common.trials.is_some() || common.solver.is_some() || common.scenario.is_some() {
        bail!("the acceptance criteria fix their own trials, solvers and scenarios");
    }
    let mut ctx = AcceptanceContext::new(common.seed.unwrap_or(DEFAULT_SEED));
    if common.config.is_some() {
        ctx.base = base_config(common)?;
        ctx.registry = SolverRegistry::with_defaults(&ctx.base.dual, &ctx.base.pricing);
    }
    Ok(ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { experiment } => run(&cli.common, experiment),
        Command::Accept { criteria, strict } => context(&cli.common).and_then(|ctx| {
            let all: Vec<u8> = CRITERIA.iter().map(|c| c.0).collect();
            let chosen = if criteria.is_empty() { &all } else { criteria };
            let verdicts = report(&ctx, chosen, cli.common.out.as_ref())?;
            let evaluated = verdicts.iter().all(|v| v.status != Status::MissingDependency);
            Ok(evaluated && (!strict || verdicts.iter().all(Verdict::passed)))
        }),
        Command::OracleCheck => context(&cli.common).and_then(|ctx| {
            let verdicts = report(&ctx, &[1, 2], cli.common.out.as_ref())?;
            Ok(verdicts.iter().all(Verdict::passed))
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
