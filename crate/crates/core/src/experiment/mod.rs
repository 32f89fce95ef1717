//! Multi-seed experiment runner, per-epoch CSV output and learning-curve
//! charts.

mod plot;

pub use plot::{average_curves, plot_curves, read_curves, Curve, PlotOutput, RunCurve};

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::trainer::{Domain, EpochMetrics, Trainer, TrainerConfig, Variant};

/// Column names of a per-run metrics CSV.
pub const RUN_COLUMNS: [&str; 9] = [
    "epoch", "variant", "K", "success", "reward", "turns", "wm_loss_a", "wm_loss_r", "wm_loss_t",
];

/// Column names of `summary.csv`.
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "variant",
    "K",
    "epoch",
    "seeds",
    "success_mean",
    "success_std",
    "reward_mean",
    "turns_mean",
    "success_per_seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub variant: Variant,
    pub k: usize,
}

impl RunSpec {
    pub fn new(variant: Variant, k: usize) -> Self {
        RunSpec {
            variant,
            k: if variant == Variant::Dqn { 0 } else { k },
        }
    }

    pub fn label(&self) -> String {
        self.variant.label(self.k)
    }

    pub fn file_stem(&self, seed: u64) -> String {
        format!("{}_k{}_seed{}", self.variant.name(), self.k, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Settings shared by every run; variant, K and seed are overridden.
    pub base: TrainerConfig,
    pub runs: Vec<RunSpec>,
    pub seeds: Vec<u64>,
    /// Epochs summarised across seeds.
    pub checkpoints: Vec<usize>,
    pub jobs: usize,
    pub write_checkpoints: bool,
}

impl ExperimentPlan {
    /// Summary checkpoints at epochs 100, 200 and 300 that fit in `N`, plus
    /// `N` itself.
    pub fn new(base: TrainerConfig, runs: Vec<RunSpec>, seeds: Vec<u64>) -> Self {
        let n = base.epochs;
        let mut checkpoints: Vec<usize> = [100, 200, 300].into_iter().filter(|c| *c <= n).collect();
        if !checkpoints.contains(&n) {
            checkpoints.push(n);
        }
        ExperimentPlan {
            base,
            runs,
            seeds,
            checkpoints,
            jobs: 1,
            write_checkpoints: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("plan needs at least one run and one seed".into()));
        }
        let n = self.base.epochs;
        for c in &self.checkpoints {
            if *c == 0 || *c > n {
                return Err(Error::Config(format!("checkpoint {c} outside [1, {n}]")));
            }
            if c % self.base.eval_every != 0 && *c != n {
                return Err(Error::Config(format!(
                    "checkpoint {c} is not an evaluation epoch (eval_every = {})",
                    self.base.eval_every
                )));
            }
        }
        for run in &self.runs {
            self.config_for(run, 0).validate()?;
        }
        Ok(())
    }

    pub fn config_for(&self, run: &RunSpec, seed: u64) -> TrainerConfig {
        TrainerConfig {
            variant: run.variant,
            planning_steps: run.k,
            seed,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub k: usize,
    pub epoch: usize,
    pub seeds: usize,
    pub success_mean: f64,
    pub success_std: f64,
    pub reward_mean: f64,
    pub turns_mean: f64,
    pub success_per_seed: Vec<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run: RunSpec,
    pub seed: u64,
    pub csv: PathBuf,
    pub result: Result<Vec<EpochMetrics>>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub outcomes: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }

    pub fn all_succeeded(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Runs every `(run, seed)` pair of the plan, writing one CSV per pair and a
/// `summary.csv` with per-checkpoint means across seeds.
///
/// Individual run failures are reported in the returned report; setup
/// errors (invalid plan, unwritable directory) are returned as `Err`.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: &Path) -> Result<ExperimentReport> {
    plan.validate()?;
    fs::create_dir_all(out_dir)?;
    let domain = Arc::new(Domain::build(&plan.base.domain, plan.base.max_turns)?);
    let jobs: Vec<(RunSpec, u64)> = plan
        .runs
        .iter()
        .flat_map(|r| plan.seeds.iter().map(move |s| (*r, *s)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunOutcome>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = plan.jobs.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(run, seed)) = jobs.get(i) else {
                    break;
                };
                let outcome = execute_run(plan, &run, seed, Arc::clone(&domain), out_dir);
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<RunOutcome> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect();
    let summary = summarize(plan, &outcomes);
    let summary_path = out_dir.join("summary.csv");
    write_summary(&summary_path, &summary)?;
    Ok(ExperimentReport {
        outcomes,
        summary,
        summary_path,
    })
}

fn execute_run(plan: &ExperimentPlan, run: &RunSpec, seed: u64, domain: Arc<Domain>, out_dir: &Path) -> RunOutcome {
    let stem = run.file_stem(seed);
    let csv = out_dir.join(format!("{stem}.csv"));
    let ckpt = plan.write_checkpoints.then(|| out_dir.join(format!("{stem}.ckpt.json")));
    let result = (|| {
        let mut trainer = Trainer::with_domain(plan.config_for(run, seed), domain)?;
        let mut writer = csv::Writer::from_path(&csv)?;
        writer.write_record(RUN_COLUMNS)?;
        let metrics = trainer.train(|m| {
            writer.write_record(run_record(m))?;
            Ok(())
        });
        writer.flush()?;
        let metrics = metrics?;
        if let Some(path) = &ckpt {
            trainer.save_checkpoint(path)?;
        }
        Ok(metrics)
    })();
    RunOutcome {
        run: *run,
        seed,
        csv,
        result,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV record in [`RUN_COLUMNS`] order.
pub fn run_record(m: &EpochMetrics) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        m.variant.name().to_string(),
        m.k.to_string(),
        opt(m.eval.map(|e| e.success_rate)),
        opt(m.eval.map(|e| e.avg_reward)),
        opt(m.eval.map(|e| e.avg_turns)),
        opt(m.wm_losses.map(|l| l.user_action)),
        opt(m.wm_losses.map(|l| l.reward)),
        opt(m.wm_losses.map(|l| l.termination)),
    ]
}

fn summarize(plan: &ExperimentPlan, outcomes: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for run in &plan.runs {
        for &epoch in &plan.checkpoints {
            let evals: Vec<_> = outcomes
                .iter()
                .filter(|o| o.run == *run)
                .filter_map(|o| o.result.as_ref().ok())
                .filter_map(|ms| ms.iter().find(|m| m.epoch == epoch).and_then(|m| m.eval))
                .collect();
            if evals.is_empty() {
                continue;
            }
            let success: Vec<f64> = evals.iter().map(|e| e.success_rate).collect();
            let n = evals.len() as f64;
            let mean = success.iter().sum::<f64>() / n;
            let var = success.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
            rows.push(SummaryRow {
                variant: run.variant,
                k: run.k,
                epoch,
                seeds: evals.len(),
                success_mean: mean,
                success_std: var.sqrt(),
                reward_mean: evals.iter().map(|e| e.avg_reward).sum::<f64>() / n,
                turns_mean: evals.iter().map(|e| e.avg_turns).sum::<f64>() / n,
                success_per_seed: success,
            });
        }
    }
    rows
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        let per_seed: Vec<String> = r.success_per_seed.iter().map(|s| s.to_string()).collect();
        w.write_record([
            r.variant.name().to_string(),
            r.k.to_string(),
            r.epoch.to_string(),
            r.seeds.to_string(),
            r.success_mean.to_string(),
            r.success_std.to_string(),
            r.reward_mean.to_string(),
            r.turns_mean.to_string(),
            per_seed.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
