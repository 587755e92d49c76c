use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn carleman(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleman"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("CARLEMAN_OUT")
        .output()
        .expect("binary runs")
}

#[test]
fn gap_suite_passes_for_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = carleman(&["verify", "--suite", "gap", "--tau-list", "0.5,1.5,2.5", "--dim", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{csv}");
    assert!(rows.iter().all(|r| r.starts_with("\"gap(") && r.contains(",true,")), "{csv}");
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# command = verify") && manifest.contains("seed = 1") && manifest.contains("# pass = true"));
}

#[test]
fn partition_contains_expected_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = carleman(&["partition", "--tau", "54.6", "--imax", "6"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = fs::read_to_string(dir.path().join("a_tau.csv")).unwrap();
    assert!(a.lines().any(|l| l == "3,0"), "{a}");
    let b = fs::read_to_string(dir.path().join("b_tau.csv")).unwrap();
    assert!(b.lines().count() > a.lines().count());
}

#[test]
fn missing_subcommand_exits_with_usage() {
    let out = Command::new(env!("CARGO_BIN_EXE_carleman")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "dim = 7\n").unwrap();
    let out = carleman(&["partition", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dim"));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "tau = 54.598\nimax = 6\nseed = 7\nsuite = gap\ntau_list = 0.5\nensemble = 5\n").unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            for cmd in ["regularize", "weights", "verify"] {
                let o = carleman(&[cmd, "--config", cfg.to_str().unwrap()], &out);
                assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
            }
            out
        })
        .collect();
    for file in ["alpha.csv", "epsilon.csv", "epsilon_rows.csv", "weights.csv", "reports.csv"] {
        let a = fs::read(runs[0].join(file)).unwrap();
        let b = fs::read(runs[1].join(file)).unwrap();
        assert!(!a.is_empty() && a == b, "{file} differs");
    }
}

#[test]
fn epsilon_file_round_trips_through_weights() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(carleman(&["regularize", "--tau", "54.598", "--imax", "6"], &first).status.success());
    let second = dir.path().join("second");
    let eps = first.join("epsilon.csv");
    let o = carleman(&["weights", "--tau", "54.598", "--eps-file", eps.to_str().unwrap()], &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let third = dir.path().join("third");
    let o = carleman(&["weights", "--tau", "54.598", "--imax", "6"], &third);
    assert!(o.status.success());
    assert_eq!(fs::read(second.join("weights.csv")).unwrap(), fs::read(third.join("weights.csv")).unwrap());
}

#[test]
fn manifest_reruns_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(carleman(&["regularize", "--tau", "403.4", "--imax", "7", "--seed", "11"], &first).status.success());
    let second = dir.path().join("second");
    let manifest = first.join("manifest.txt");
    let o = carleman(&["regularize", "--config", manifest.to_str().unwrap()], &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["alpha.csv", "epsilon.csv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
}
