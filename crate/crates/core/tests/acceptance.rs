//! One pass/fail line per headline criterion. Run with
//! `cargo test -p ddq --test acceptance -- --nocapture` to see the report.

mod common;

use std::time::Instant;

use common::*;
use ddq::experiment::{run_experiment, ExperimentPlan, ExperimentReport, RunSpec};
use ddq::trainer::{TrainerConfig, Variant};

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn check(&mut self, id: &'static str, pass: bool, detail: String) {
        println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

const SEEDS: u64 = 5;
const N: usize = 300;

/// Per-seed success rates at the final epoch and epochs to 50% (censored
/// at N), for one run spec.
fn per_seed(report: &ExperimentReport, run: RunSpec) -> (Vec<f64>, Vec<usize>) {
    let mut finals = Vec::new();
    let mut t50 = Vec::new();
    for o in report.outcomes.iter().filter(|o| o.run == run) {
        let metrics = o.result.as_ref().expect("run succeeded");
        let evals: Vec<(usize, f64)> = metrics
            .iter()
            .filter_map(|m| m.eval.map(|e| (m.epoch, e.success_rate)))
            .collect();
        finals.push(evals.iter().find(|(e, _)| *e == N).expect("final evaluation").1);
        t50.push(evals.iter().find(|(_, s)| *s >= 0.5).map_or(N, |(e, _)| *e));
    }
    (finals, t50)
}

/// Epoch at which the seed-averaged curve first reaches 50%, censored at N.
fn mean_curve_t50(report: &ExperimentReport, run: RunSpec) -> usize {
    let runs: Vec<_> = report
        .outcomes
        .iter()
        .filter(|o| o.run == run)
        .map(|o| o.result.as_ref().unwrap())
        .collect();
    (1..=N)
        .filter_map(|epoch| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|ms| ms.iter().find(|m| m.epoch == epoch).and_then(|m| m.eval))
                .map(|e| e.success_rate)
                .collect();
            (vals.len() == runs.len()).then(|| (epoch, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .find(|(_, s)| *s >= 0.5)
        .map_or(N, |(e, _)| e)
}

fn mean<T: Copy + Into<f64>>(v: &[T]) -> f64 {
    v.iter().map(|x| (*x).into()).sum::<f64>() / v.len() as f64
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };

    let start = Instant::now();
    let td = (0..20).map(td_gradient_case).fold(0.0, f64::max);
    let wm = (0..20).map(wm_gradient_case).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "C1 gradient check",
        td < FD_TOLERANCE && wm < FD_TOLERANCE && secs < 60.0,
        format!("max relative error TD {td:.1e}, world model {wm:.1e}, {secs:.2}s"),
    );

    let dqn = RunSpec::new(Variant::Dqn, 0);
    let ddq5 = RunSpec::new(Variant::Ddq, 5);
    let ddq10 = RunSpec::new(Variant::Ddq, 10);
    let fixed = RunSpec::new(Variant::DdqFixedWm, 10);
    let rand_init = RunSpec::new(Variant::DdqRandInit, 10);
    let dqn10 = RunSpec::new(Variant::DqnK, 10);
    let mut base = TrainerConfig::default();
    base.epochs = N;
    base.eval_dialogues = 500;
    let mut plan = ExperimentPlan::new(base, vec![dqn, ddq5, ddq10, fixed, rand_init, dqn10], (0..SEEDS).collect());
    plan.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    plan.write_checkpoints = false;
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&plan, dir.path()).unwrap();
    assert!(report.all_succeeded(), "{:?}", report.failures().next());
    let at_n = |run| mean(&per_seed(&report, run).0);
    let (s_dqn, s_ddq5, s_ddq10, s_fixed, s_rand, s_dqn10) =
        (at_n(dqn), at_n(ddq5), at_n(ddq10), at_n(fixed), at_n(rand_init), at_n(dqn10));

    r.check(
        "C2 planning helps",
        s_ddq10 > s_ddq5 && s_ddq5 > s_dqn && s_ddq5 - s_dqn >= 0.10,
        format!("success at {N}: DDQ(10) {s_ddq10:.3}, DDQ(5) {s_ddq5:.3}, DQN {s_dqn:.3}"),
    );

    let t_ddq10 = mean(&per_seed(&report, ddq10).1.iter().map(|t| *t as f64).collect::<Vec<_>>());
    let t_dqn = mean(&per_seed(&report, dqn).1.iter().map(|t| *t as f64).collect::<Vec<_>>());
    r.check(
        "C3 sample efficiency",
        t_ddq10 / t_dqn < 0.5,
        format!(
            "mean epochs to 50%: DDQ(10) {t_ddq10:.0}, DQN {t_dqn:.0}, ratio {:.2}; on the seed-averaged curve {} vs {}",
            t_ddq10 / t_dqn,
            mean_curve_t50(&report, ddq10),
            mean_curve_t50(&report, dqn)
        ),
    );

    r.check(
        "C4 real experience upper bound",
        s_dqn10 >= s_ddq10,
        format!("success at {N}: DQN(10) {s_dqn10:.3}, DDQ(10) {s_ddq10:.3}"),
    );

    r.check(
        "C5 world model ablation",
        s_ddq10 >= s_rand && s_ddq10 - s_fixed >= 0.05,
        format!("success at {N}: DDQ(10) {s_ddq10:.3}, rand-init {s_rand:.3}, fixed {s_fixed:.3}"),
    );

    let (successes, failures, violations) = reward_accounting(1000, 2024);
    r.check(
        "C6 reward accounting",
        violations.is_empty() && successes > 0 && failures > 0,
        format!("{successes} successes, {failures} failures, {} violations", violations.len()),
    );

    let audits: Vec<String> = [(Variant::Dqn, 0), (Variant::DdqFixedWm, 10), (Variant::Ddq, 10)]
        .into_iter()
        .flat_map(|(v, k)| audit_run(v, k, 50, 7))
        .collect();
    r.check(
        "C7 parameter and buffer audit",
        audits.is_empty(),
        if audits.is_empty() { "50 epochs of DQN, fixed and DDQ, no violations".into() } else { audits.join("; ") },
    );

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let small = small_plan(15, vec![0, 1]);
    run_experiment(&small, a.path()).unwrap();
    run_experiment(&small, b.path()).unwrap();
    let diff = differing_files(a.path(), b.path());
    r.check("C8 determinism", diff.is_empty(), format!("differing files: {diff:?}"));

    let (acc, mse) = rule_learnability(0, 50);
    r.check(
        "C9 world model learnability",
        acc > 0.8 && mse < 1.0,
        format!("held-out accuracy {acc:.3}, reward MSE {mse:.4}"),
    );

    assert!(r.failed.is_empty(), "failed: {:?}", r.failed);
}
