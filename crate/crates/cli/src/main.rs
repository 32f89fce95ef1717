use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use ddq::experiment::{plot_curves, run_experiment, ExperimentPlan, RunSpec};
use ddq::nn::Checkpoint;
use ddq::trainer::{TrainerConfig, Variant};
use ddq_hitl::{HitlConfig, HitlService};

/// Deep Dyna-Q dialogue policy training, plotting and human-in-the-loop serving.
#[derive(Parser)]
#[command(name = "ddq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (variant, K, seed) combination and write per-run CSVs.
    Train(TrainArgs),
    /// Render learning curves and a success table from run CSVs.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve human-in-the-loop dialogues over HTTP.
    HitlServe {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Initial weights for every run, as written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "dqn,ddq")]
        variant: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Session event log, replayed on restart.
        #[arg(long, default_value = "hitl_sessions.jsonl")]
        log: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Comma-separated: dqn, ddq, ddq_rand_init, ddq_fixed_wm, dqn_k.
    #[arg(long, value_delimiter = ',', default_value = "ddq")]
    variant: Vec<String>,
    /// Comma-separated planning steps; ignored for dqn.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    k: Vec<usize>,
    /// Number of seeds, run as 0..seeds.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Overrides N from the config.
    #[arg(long)]
    epochs: Option<usize>,
    /// TOML trainer config; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Evaluate on 2000 dialogues instead of the configured count.
    #[arg(long)]
    full: bool,
}

fn parse_variant(name: &str) -> Result<Variant> {
    Variant::from_name(name).with_context(|| format!("unknown variant {name:?}"))
}

fn load_config(path: Option<&PathBuf>) -> Result<TrainerConfig> {
    match path {
        Some(p) => TrainerConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(TrainerConfig::default()),
    }
}

fn run_specs(variants: &[String], ks: &[usize]) -> Result<Vec<RunSpec>> {
    let mut runs = Vec::new();
    for name in variants {
        let variant = parse_variant(name)?;
        for &k in ks {
            let run = RunSpec::new(variant, k);
            if !runs.contains(&run) {
                runs.push(run);
            }
        }
    }
    Ok(runs)
}

fn train(args: &TrainArgs) -> Result<ExitCode> {
    let mut base = load_config(args.config.as_ref())?;
    if let Some(n) = args.epochs {
        base.epochs = n;
    }
    if args.full {
        base.eval_dialogues = 2000;
    }
    let mut plan = ExperimentPlan::new(base, run_specs(&args.variant, &args.k)?, (0..args.seeds).collect());
    plan.jobs = args.jobs;
    let report = run_experiment(&plan, &args.out)?;
    for row in &report.summary {
        println!(
            "{:<24} epoch {:>4}  success {:.3} ± {:.3}  reward {:>7.2}  turns {:>5.2}",
            RunSpec::new(row.variant, row.k).label(),
            row.epoch,
            row.success_mean,
            row.success_std,
            row.reward_mean,
            row.turns_mean
        );
    }
    println!("summary written to {}", report.summary_path.display());
    let mut failed = false;
    for f in report.failures() {
        failed = true;
        if let Err(e) = &f.result {
            eprintln!("run {} seed {} failed: {e}", f.run.label(), f.seed);
        }
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Train(args) => train(&args),
        Command::Plot { input, out } => {
            let written = plot_curves(&input, &out)?;
            print!("{}", std::fs::read_to_string(&written.table)?);
            for chart in &written.charts {
                println!("wrote {}", chart.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::HitlServe {
            port,
            checkpoint,
            variant,
            k,
            config,
            log,
            seed,
        } => {
            if variant.is_empty() {
                bail!("at least one variant is required");
            }
            let mut hitl = HitlConfig::new(load_config(config.as_ref())?, run_specs(&variant, &[k])?);
            hitl.seed = seed;
            hitl.log_path = Some(log);
            if let Some(p) = checkpoint {
                hitl.checkpoint = Some(Checkpoint::load(&p).with_context(|| format!("loading {}", p.display()))?);
            }
            let service = Arc::new(HitlService::open(hitl)?);
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}/v1");
            runtime.block_on(ddq_hitl::serve(service, addr))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
