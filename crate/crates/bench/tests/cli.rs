use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdsds-bench")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--n", "128", "--batches", "2", "--eps", "1e-4,1e-6", "--seed", "3,4", "--no-timing"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out-dir", dir.to_str().unwrap()]);
    bench(&args)
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = run_in(d.path(), &["--solver", "smpdsds"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = fs::read(a.path().join("results.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("results.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().next().unwrap(), "solver,n,N,eps,seed,Err,fval,k,seconds");
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.starts_with("smpdsds,128,2,") && l.ends_with(",0.000000")));
}

#[test]
fn invalid_schedule_exits_nonzero_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("sched.txt");
    // τ = 3/L breaks 1/τ − 1/μ > L/2
    fs::write(&sched, "schedule = constant\ntau_factor = 3\n").unwrap();
    let out = run_in(dir.path(), &["--solver", "admmds", "--schedule-file", sched.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule"));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn bad_arguments_exit_with_one() {
    let out = bench(&["gen", "--n", "100", "--out-dir", "/nonexistent-never"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple of 64"));
}

#[test]
fn gen_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bench(&["gen", "--n", "128", "--seed", "5", "--out-dir", d]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("m = 32, n = 128, K = 2"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lasso_n128_seed5.json")).unwrap()).unwrap();
    assert_eq!(json["a"].as_array().unwrap().len(), 32);

    let out = run_in(dir.path(), &["--solver", "pdsds", "--trace-every", "10"]);
    assert!(out.status.success());
    let trace = dir.path().join("traces/pdsds_n128_N1_eps1e-6_seed3.jsonl");
    let first = fs::read_to_string(&trace).unwrap();
    assert!(first.lines().next().unwrap().contains("\"type\":\"header\""));
    assert!(dir.path().join("traces/pdsds_n128_N1_eps1e-6_seed3_curve.csv").exists());
    let report = bench(&["report", "--out-dir", d]);
    assert!(report.status.success());
    let table = String::from_utf8_lossy(&report.stdout);
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("2/2"));
}

#[test]
fn distributed_run_reads_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("star.txt");
    fs::write(&graph, "# star\n1 2\n1 3\n1 4\n").unwrap();
    let out = run_in(dir.path(), &["--solver", "dist", "--graph-file", graph.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("dist,128,4,")));

    fs::write(&graph, "1 2\n3 4\n").unwrap();
    let out = run_in(dir.path(), &["--solver", "dist", "--graph-file", graph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "solver = minibatch\nbatches = 4\nschedule = dynamic\n").unwrap();
    let out = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "--solver", "daspdsds"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("daspdsds,128,2,")));
}
