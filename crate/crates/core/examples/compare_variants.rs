//! A small multi-seed comparison of DQN, DDQ and the world-model ablations,
//! written as CSVs and rendered to SVG charts.
//!
//! `cargo run --release --example compare_variants -- out/ 100`

use std::path::PathBuf;

use ddq::experiment::{plot_curves, run_experiment, ExperimentPlan, RunSpec};
use ddq::trainer::{TrainerConfig, Variant};

fn main() -> ddq::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "compare_variants_out".into()));
    let mut base = TrainerConfig::default();
    base.epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(60);
    base.eval_dialogues = 200;
    let runs = vec![
        RunSpec::new(Variant::Dqn, 0),
        RunSpec::new(Variant::Ddq, 5),
        RunSpec::new(Variant::DdqFixedWm, 5),
        RunSpec::new(Variant::DdqRandInit, 5),
        RunSpec::new(Variant::DqnK, 5),
    ];
    let mut plan = ExperimentPlan::new(base, runs, vec![0, 1]);
    plan.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    plan.write_checkpoints = false;
    let report = run_experiment(&plan, &out.join("runs"))?;
    for row in &report.summary {
        println!(
            "{:<22} epoch {:>4}  success {:.3} ± {:.3}",
            RunSpec::new(row.variant, row.k).label(),
            row.epoch,
            row.success_mean,
            row.success_std
        );
    }
    let plots = plot_curves(&out.join("runs"), &out.join("plots"))?;
    for chart in plots.charts {
        println!("wrote {}", chart.display());
    }
    Ok(())
}
