mod common;

use common::{differing_files, small_plan};
use ddq::experiment::run_experiment;

#[test]
fn identical_plans_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let plan = small_plan(15, vec![0, 1]);
    assert!(run_experiment(&plan, a.path()).unwrap().all_succeeded());
    assert!(run_experiment(&plan, b.path()).unwrap().all_succeeded());
    assert_eq!(differing_files(a.path(), b.path()), Vec::<String>::new());
    assert!(std::fs::read_dir(a.path()).unwrap().count() > 12);
}

#[test]
fn parallel_jobs_do_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut plan = small_plan(10, vec![3]);
    run_experiment(&plan, a.path()).unwrap();
    plan.jobs = 4;
    run_experiment(&plan, b.path()).unwrap();
    assert_eq!(differing_files(a.path(), b.path()), Vec::<String>::new());
}

#[test]
fn different_seeds_differ() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut plan = small_plan(10, vec![0]);
    plan.runs.truncate(2);
    plan.write_checkpoints = false;
    run_experiment(&plan, a.path()).unwrap();
    plan.seeds = vec![1];
    run_experiment(&plan, b.path()).unwrap();
    let csv = |d: &std::path::Path, s: u64| std::fs::read(d.join(format!("ddq_k3_seed{s}.csv"))).unwrap();
    assert_ne!(csv(a.path(), 0), csv(b.path(), 1));
}
