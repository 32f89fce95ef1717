mod common;

use std::fs;
use std::path::Path;

use common::small_plan;
use ddq::experiment::{average_curves, plot_curves, read_curves, run_experiment, RUN_COLUMNS};
use ddq::trainer::Variant;
use ddq::Error;

fn write_run(dir: &Path, name: &str, variant: &str, k: usize, success: &[(usize, f64)]) {
    let mut body = RUN_COLUMNS.join(",") + "\n";
    for (e, s) in success {
        body += &format!("{e},{variant},{k},{s},0,0,,,\n");
        body += &format!("{},{variant},{k},,,,,,\n", e + 1);
    }
    fs::write(dir.join(name), body).unwrap();
}

#[test]
fn empty_input_is_an_error_and_writes_nothing() {
    let (input, output) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = output.path().join("plots");
    assert!(matches!(plot_curves(input.path(), &out), Err(Error::Format(_))));
    assert!(!out.exists());
}

#[test]
fn missing_column_is_a_format_error() {
    let (input, output) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_run(input.path(), "a.csv", "dqn", 0, &[(5, 0.1)]);
    fs::write(input.path().join("b.csv"), "epoch,variant,K\n1,ddq,5\n").unwrap();
    let out = output.path().join("plots");
    assert!(matches!(plot_curves(input.path(), &out), Err(Error::Format(_))));
    assert!(!out.exists());
}

#[test]
fn curves_average_runs_and_skip_unevaluated_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), "a.csv", "ddq", 5, &[(5, 0.2), (10, 0.4)]);
    write_run(dir.path(), "b.csv", "ddq", 5, &[(5, 0.4), (10, 0.8)]);
    write_run(dir.path(), "c.csv", "dqn", 0, &[(5, 0.1)]);
    fs::write(dir.path().join("summary.csv"), "not,a,run\n").unwrap();
    let runs = read_curves(dir.path()).unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(runs[0].points, vec![(5, 0.2), (10, 0.4)]);
    let curves = average_curves(&runs);
    let ddq = curves.iter().find(|c| c.variant == Variant::Ddq).unwrap();
    assert_eq!(ddq.runs, 2);
    assert!((ddq.success_at(10).unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(ddq.epochs_to(0.5), Some(10));
    assert_eq!(ddq.epochs_to(0.7), None);
}

#[test]
fn charts_show_one_series_per_k_and_the_table_matches_the_csvs() {
    let (input, output) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small_plan(10, vec![0, 1]), input.path()).unwrap();
    let out = plot_curves(input.path(), output.path()).unwrap();
    assert_eq!(out.charts.len(), 3);

    let sweep = fs::read_to_string(output.path().join("k_sweep.svg")).unwrap();
    assert_eq!(sweep.matches("<polyline").count(), 3);
    for label in ["DQN", "DDQ(3)", "DDQ(6)"] {
        assert!(sweep.contains(&format!(">{label}</text>")), "{label}");
    }
    let ablation = fs::read_to_string(output.path().join("world_model_ablation.svg")).unwrap();
    assert!(ablation.contains("fixed θ_M") && ablation.contains("rand-init θ_M"));

    let curves = average_curves(&read_curves(input.path()).unwrap());
    let table = fs::read_to_string(&out.table).unwrap();
    for c in &curves {
        let line = table.lines().find(|l| l.starts_with(&format!("{} ", c.label()))).unwrap();
        let last: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert!((last - c.success_at(10).unwrap()).abs() < 5e-4, "{line}");
    }
}
