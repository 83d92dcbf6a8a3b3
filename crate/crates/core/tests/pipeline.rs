mod common;

use std::fs;
use std::process::Command as Process;

use common::*;
use nadisc::experiments::{self, read_csv, run, run_cell, write_csv, Command, ExperimentConfig, CSV_COLUMNS};
use nadisc::valuations::{random_instance, Family, FamilyParams, InstanceDocument};
use nadisc::{Error, Valuation};

fn cell(command: Command, family: Family, n: usize, m: usize, k: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig { command, family: family.as_str().into(), n, m, k, seed, ..ExperimentConfig::default() }
}

#[test]
fn csv_header_is_stable() {
    let mut out = Vec::new();
    write_csv(&mut out, &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), include_str!("golden/header.csv"));
    assert_eq!(include_str!("golden/header.csv").trim_end().split(',').collect::<Vec<_>>(), CSV_COLUMNS);
}

#[test]
fn disc_row_matches_golden_file() {
    let cfg = cell(Command::Disc, Family::AdditiveUniform, 1, 3, 2, 1);
    let records = run(&cfg).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &records).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), include_str!("golden/disc_row.csv"));
}

#[test]
fn csv_round_trips() {
    let cfg = ExperimentConfig {
        command: Command::Sweep,
        sweep: experiments::SweepGrid {
            command: Command::Disc,
            n: vec![1, 2],
            k: vec![2, 3],
            m: vec![4],
            seeds: vec![0, 5],
        },
        ..ExperimentConfig::default()
    };
    let records = run(&cfg).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &records).unwrap();
    assert_eq!(read_csv(std::str::from_utf8(&out).unwrap()).unwrap(), records);
    assert!(read_csv("command,family\n").is_err());
}

#[test]
fn disc_command_matches_enumeration() {
    let cfg = cell(Command::Disc, Family::AdditiveUniform, 1, 3, 2, 1);
    let (rec, audit) = run_cell(&cfg).unwrap();
    let vals = random_instance(Family::AdditiveUniform, 1, 3, 1, &FamilyParams::default()).unwrap();
    let d = rec.realized_disc.unwrap();
    assert!(d >= 0.0);
    assert_eq!(d, disc_opt_naive(&vals, 3, 2));
    assert_eq!(disc_naive(&vals, &audit.optimum_coloring.unwrap(), 2), d);
}

#[test]
fn equal_weights_split_evenly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("equal.json");
    let vals = vec![Valuation::additive(vec![0.25; 4]).unwrap()];
    let doc = InstanceDocument::new("equal-weights", None, FamilyParams::default(), &vals).unwrap();
    fs::write(&path, doc.to_json().unwrap()).unwrap();
    let cfg = ExperimentConfig {
        command: Command::Split,
        family: experiments::FILE_FAMILY.into(),
        instance_path: Some(path),
        k: 2,
        ..ExperimentConfig::default()
    };
    let (rec, _) = run_cell(&cfg).unwrap();
    assert_eq!((rec.n, rec.m), (1, 4));
    assert_eq!(rec.imbalance, Some(0.0));
    assert!(rec.converged);
}

fn sweep_config(dir: &std::path::Path, name: &str, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        command: Command::Sweep,
        family: Family::Coverage.as_str().into(),
        restarts: 2,
        trials: 8,
        workers,
        output_path: Some(dir.join(name)),
        sweep: experiments::SweepGrid {
            command: Command::Round,
            n: vec![1, 2],
            k: vec![2, 3],
            m: vec![6],
            seeds: vec![0, 1],
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = sweep_config(dir.path(), "a.csv", 1);
    let b = sweep_config(dir.path(), "b.csv", 1);
    let c = sweep_config(dir.path(), "c.csv", 3);
    let ra = run(&a).unwrap();
    run(&b).unwrap();
    run(&c).unwrap();
    let bytes = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(bytes("a.csv"), bytes("b.csv"));
    assert_eq!(bytes("a.csv"), bytes("c.csv"));
    // Grid order: n outermost, then k, m, seed.
    let order: Vec<(usize, usize, u64)> = ra.iter().map(|r| (r.n, r.k, r.seed)).collect();
    assert_eq!(order, vec![(1, 2, 0), (1, 2, 1), (1, 3, 0), (1, 3, 1), (2, 2, 0), (2, 2, 1), (2, 3, 0), (2, 3, 1)]);
}

#[test]
fn capacity_errors_name_the_cell() {
    let cfg = cell(Command::Disc, Family::AdditiveUniform, 1, 20, 3, 4);
    match run_cell(&cfg) {
        Err(Error::Capacity(msg)) => {
            assert!(msg.contains("m=20") && msg.contains("k=3") && msg.contains("seed=4"), "{msg}")
        }
        other => panic!("expected a capacity error, got {other:?}"),
    }
}

#[test]
fn transfer_cell_halves_the_vprime_discrepancy() {
    let cfg = ExperimentConfig { restarts: 4, ..cell(Command::Transfer, Family::TableRandomLipschitz, 2, 6, 2, 3) };
    let (rec, _) = run_cell(&cfg).unwrap();
    assert_eq!(rec.transfer_disc.unwrap(), rec.realized_disc.unwrap() / 2.0);
}

#[test]
fn subsidy_cell_respects_the_total_bound() {
    let cfg = ExperimentConfig { restarts: 4, ..cell(Command::Subsidy, Family::Coverage, 3, 7, 99, 2) };
    let (rec, audit) = run_cell(&cfg).unwrap();
    assert_eq!(rec.k, 3);
    let d = rec.realized_disc.unwrap();
    assert!(rec.total_subsidy.unwrap() <= 2.0 * d + 1e-9);
    let rep = audit.subsidy.unwrap();
    assert!(rep.payments.p.iter().all(|&p| p <= d + 1e-9));
}

#[test]
fn audit_documents_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        audit_dir: Some(dir.path().join("audit")),
        ..cell(Command::Disc, Family::Coverage, 2, 4, 2, 9)
    };
    run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("audit/disc_coverage_n2_m4_k2_s9.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["record"]["seed"], 9);
    assert!(json["optimum_coloring"].is_array());
}

#[test]
fn config_files_round_trip() {
    let cfg = sweep_config(std::path::Path::new("/tmp"), "x.csv", 2);
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(ExperimentConfig::from_toml("bogus_field = 1").is_err());
    assert!(ExperimentConfig::from_toml("tol = -1.0").is_err());
    assert!(ExperimentConfig::from_toml("family = \"file\"").is_err());
}

const BIN: &str = env!("CARGO_BIN_EXE_nadisc");

#[test]
fn cli_prints_csv_and_exits_zero() {
    let out = Process::new(BIN)
        .args(["--command", "disc", "--n", "1", "--m", "3", "--k", "2", "--family", "additive-uniform", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), include_str!("golden/disc_row.csv"));
}

#[test]
fn cli_reads_config_files_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    let csv_path = dir.path().join("out.csv");
    fs::write(&cfg_path, "command = \"disc\"\nn = 1\nm = 3\nk = 2\nfamily = \"additive-uniform\"\nseed = 99\n")
        .unwrap();
    let status = Process::new(BIN)
        .arg("--config")
        .arg(&cfg_path)
        .args(["--seed", "1", "--output-path"])
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), include_str!("golden/disc_row.csv"));
}

#[test]
fn cli_sweep_flags_and_fit() {
    let out = Process::new(BIN)
        .args(["--command", "sweep", "--sweep-command", "disc", "--family", "additive-uniform"])
        .args([
            "--sweep-n",
            "1,2,3,4",
            "--sweep-k",
            "2",
            "--sweep-m",
            "4",
            "--sweep-seeds",
            "0,1",
            "--fit",
            "sqrt-nlog-nk",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let records = read_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(records.len(), 8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit: coefficient"));
}

#[test]
fn cli_reports_errors_with_exit_code_two() {
    let out = Process::new(BIN).args(["--command", "disc", "--family", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = Process::new(BIN).args(["--n", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_exits_one_when_a_split_does_not_converge() {
    // An unreachable tolerance with a single move leaves the split unconverged.
    let out = Process::new(BIN)
        .args(["--command", "split", "--n", "3", "--m", "9", "--k", "3", "--family", "table-random-lipschitz"])
        .args(["--restarts", "1", "--max-iters", "1", "--tol", "1e-300"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(!records[0].converged);
}
