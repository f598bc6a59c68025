use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sem");

fn markets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/markets"))
}

fn sem(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

#[test]
fn solve_emits_a_cleared_equilibrium() {
    let market = markets().join("foster.toml");
    let out = sem(&["solve", market.to_str().unwrap(), "--period", "2", "--shock", "rtb"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["period"], 2);
    assert_eq!(doc["converged"], true);
    assert!(doc["clearing_error"].as_f64().unwrap() <= 1e-9);
    let prices = doc["prices"].as_array().unwrap();
    assert_eq!(prices.len(), 3);
    assert_eq!(doc["allocation"].as_array().unwrap().len(), doc["demanders"].as_array().unwrap().len());
}

#[test]
fn simulated_traces_pass_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let market = markets().join("foster.toml");
    let out = sem(&["simulate", market.to_str().unwrap(), "--mechanism", "sem", "-n", "3", "--seeds", "4,9", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
    assert!(runs.starts_with("mechanism,n,seed,placement_rate,max_residual\n"));
    let report = dir.path().join("audit.json");
    let out = sem(&["audit", dir.path().join("sem-n3-seed9.json").to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["greedy"], true);
    assert_eq!(v["envy_free"], true);
}

#[test]
fn table1_honours_the_seed_block() {
    let dir = tempfile::tempdir().unwrap();
    let block = dir.path().join("seeds.txt");
    fs::write(&block, "# two seeds\n3\n8\n").unwrap();
    let out_dir = dir.path().join("t1");
    let out = sem(&["table1", "--seed-block", block.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("table1.csv")).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.lines().skip(1).all(|l| l.ends_with(",2")));
    assert!(out_dir.join("density_n25.svg").exists());
}

#[test]
fn studies_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let conv = dir.path().join("conv");
    let out = sem(&["converge", "--replicas", "1,5", "--out-dir", conv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(conv.join("convergence.csv")).unwrap().starts_with("n,seeds,median,tail,epsilon\n"));
    let pert = dir.path().join("pert");
    let out = sem(&["perturb", "--markets", "2", "--perturbations", "2", "--out-dir", pert.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(pert.join("perturbation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("all,"));
}

#[test]
fn bad_input_fails_with_a_message() {
    let out = sem(&["solve", "/no/such/market.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\n").unwrap();
    let out = sem(&["solve", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let out = sem(&["frobnicate"]);
    assert!(!out.status.success());
}
