use std::path::Path;
use std::process::{Command, Output};

fn rankbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankbench"))
        .args(args)
        .env_remove("RANKBENCH_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn without_elapsed(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            cols.remove(8);
            cols.join(",")
        })
        .collect()
}

#[test]
fn gen_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("easy.json");
    let file = file.to_str().unwrap();
    let g = rankbench(&["gen", "--family", "two-block", "--n", "8", "--k", "2", "--seed", "5", "--out", file]);
    assert!(g.status.success());
    assert!(Path::new(file).exists());

    let csv = dir.path().join("out.csv");
    let r = rankbench(&[
        "run", "--instance", file, "--seeds", "3", "--kappa", "8", "--label-rule", "desk",
        "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance_id,n,k,l,algorithm,seed,queries_used,success,elapsed_ms,bound_total");
    assert_eq!(lines.len(), 4);
    // count seeds start from the file's seed
    let seeds: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(seeds, ["5", "6", "7"]);
    assert!(lines[1..].iter().all(|l| l.starts_with("easy,8,2,2,pairwise,") && l.contains(",true,")));
}

#[test]
fn seeds_accept_lists_and_ranges() {
    let base = ["run", "--family", "two-block", "--n", "6", "--k", "1", "--kappa", "8", "--label-rule", "desk"];
    for (spec, want) in [("4,9", vec!["4", "9"]), ("2..5", vec!["2", "3", "4"])] {
        let mut args = base.to_vec();
        args.extend(["--seeds", spec]);
        let o = rankbench(&args);
        assert!(o.status.success());
        let out = stdout(&o);
        let seeds: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(5).unwrap()).collect();
        assert_eq!(seeds, want);
    }
}

#[test]
fn seed_start_reads_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_rankbench"))
        .args(["run", "--family", "two-block", "--n", "6", "--k", "1", "--kappa", "8", "--label-rule", "desk", "--seeds", "2"])
        .env("RANKBENCH_SEED", "40")
        .output()
        .unwrap();
    assert!(o.status.success());
    let out = stdout(&o);
    let seeds: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(seeds, ["40", "41"]);
}

#[test]
fn rerun_reproduces_rows() {
    let args = [
        "run", "--family", "geometric", "--rho", "0.5", "--n", "8", "--k", "2", "--seeds", "4",
        "--kappa", "8", "--label-rule", "desk",
    ];
    let a = rankbench(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let b = rankbench(&seq);
    assert!(a.status.success() && b.status.success());
    assert_eq!(without_elapsed(&stdout(&a)), without_elapsed(&stdout(&b)));
}

#[test]
fn bound_prints_breakdown() {
    let o = rankbench(&["bound", "--family", "custom", "--theta", "2,2,1,1", "--k", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("total        15"), "{out}");
    assert!(out.contains("simplified   16"), "{out}");

    let j = rankbench(&["bound", "--family", "custom", "--theta", "4,1", "--k", "1", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["total"], 2.25);
}

#[test]
fn tie_needs_opt_in() {
    let refused = rankbench(&["bound", "--family", "custom", "--theta", "3,1,1", "--k", "2"]);
    assert_eq!(refused.status.code(), Some(1));
    let allowed = rankbench(&["bound", "--family", "custom", "--theta", "3,1,1", "--k", "2", "--allow-tie"]);
    assert!(allowed.status.success());
    assert!(stdout(&allowed).contains("unbounded"));
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(rankbench(&["run", "--family", "geometric", "--n", "4", "--k", "9"]).status.code(), Some(1));
    assert_eq!(rankbench(&["run", "--instance", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(
        rankbench(&["run", "--family", "geometric", "--n", "4", "--k", "1", "--seeds", "x..y"]).status.code(),
        Some(1)
    );
    assert_eq!(
        rankbench(&["run", "--family", "geometric", "--n", "4", "--k", "1", "--algorithm", "nope"]).status.code(),
        Some(1)
    );
}

#[test]
fn budget_failures_still_exit_zero() {
    let o = rankbench(&[
        "run", "--family", "near-tie", "--eps", "0.01", "--n", "8", "--k", "2", "--seeds", "2", "--budget", "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().skip(1).all(|l| l.contains(",false,")));
}

#[test]
fn verify_reports_fit_and_success() {
    let o = rankbench(&[
        "verify", "--family", "two-block", "--n", "8", "--k", "2", "--l", "4", "--seeds", "3", "--kappa", "8",
        "--label-rule", "desk", "--draws", "20000",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["oracle_fit"].as_array().unwrap().len(), 5);
    assert_eq!(v["success"]["trials"], 3);
}
