use std::path::Path;
use std::process::{Command, Output};

use junction_core::ctmc::parse_prism;

fn junction(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_junction"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("JUNCTION_WORKERS")
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn field(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].parse().unwrap()
}

#[test]
fn analyze_single_route_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = junction(&["analyze", "--config", "bundled:mm1_single_route"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("analyze.csv"));
    assert_eq!(r.len(), 1);
    assert!((field(&r[0], 4) - 1.0 / 7.0).abs() < 1e-12);
    assert!((field(&r[0], 5) - 1.0 / 7.0).abs() < 1e-12);
}

#[test]
fn csv_has_provenance_and_lf_endings() {
    let dir = tempfile::tempdir().unwrap();
    junction(&["analyze", "--config", "bundled:mm1_single_route"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with("# tool: junction "));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("# m: 1\n"));
    assert!(text.contains("\nlayout,route,lambda,mu,e_lw,p_loss,rho,gamma,threshold,pass\n"));
}

#[test]
fn analyze_equals_one_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let a = junction(&["analyze", "--mu", "0.25", "--layout", "double_track"], dir.path());
    assert!(a.status.code().unwrap() <= 1);
    let s = junction(
        &["sweep", "--mu-min", "0.25", "--mu-max", "0.25", "--layout", "double_track"],
        dir.path(),
    );
    assert!(s.status.code().unwrap() <= 1);
    let analyzed = rows(&dir.path().join("analyze.csv"));
    let swept = rows(&dir.path().join("sweep.csv"));
    assert_eq!(analyzed.len(), 4);
    assert_eq!(swept.len(), 4);
    for (a, s) in analyzed.iter().zip(&swept) {
        assert_eq!(&a[1], &s[2]);
        // e_lw, rho, gamma, threshold, pass
        for (ia, is) in [(4, 3), (6, 4), (7, 5), (8, 6), (9, 7)] {
            assert_eq!(&a[ia], &s[is]);
        }
    }
}

#[test]
fn simulate_is_byte_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = ["simulate", "--config", "bundled:validation", "--runs", "1", "--seed", "7", "--hours", "6", "--mu", "0.5"];
    assert_eq!(junction(&args, d1.path()).status.code(), Some(0));
    assert_eq!(junction(&args, d2.path()).status.code(), Some(0));
    let a = std::fs::read(d1.path().join("simulate.csv")).unwrap();
    let b = std::fs::read(d2.path().join("simulate.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(rows(&d1.path().join("simulate.csv")).len(), 4);
}

#[test]
fn simulate_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = junction(
        &["simulate", "--config", "bundled:validation", "--runs", "2", "--hours", "3", "--mu", "0.5", "--trace"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let trace = rows(&dir.path().join("trace_mu0.5_run1.csv"));
    // One snapshot per minute inside [60, 120].
    assert!(trace.len() >= 60 && trace.len() <= 61, "{}", trace.len());
    assert_eq!(trace[0].len(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(junction(&["analyze", "--config", "/no/such/file.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(junction(&["analyze", "--config", "bundled:nothing"], dir.path()).status.code(), Some(2));
    assert_eq!(junction(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(junction(&["sweep", "--routes", "r7"], dir.path()).status.code(), Some(2));
    // A service rate below the load is infeasible everywhere on the grid.
    let infeasible = junction(&["sweep", "--mu-min", "0.05", "--mu-max", "0.05"], dir.path());
    assert_eq!(infeasible.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&infeasible.stdout).contains("infeasible"));
    let bad_workers = Command::new(env!("CARGO_BIN_EXE_junction"))
        .args(["analyze", "--config", "bundled:mm1_single_route", "--out"])
        .arg(dir.path())
        .env("JUNCTION_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_workers.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[junction]\nname = \"x\"\nroutes = [{ name = \"a\" }]\ncolour = 1\n").unwrap();
    let out = junction(&["analyze", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn compare_favours_overpass() {
    let dir = tempfile::tempdir().unwrap();
    let out = junction(&["compare", "--mu-step", "0.02"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&dir.path().join("compare.csv"));
    assert_eq!(&r[0][0], "double_track");
    assert_eq!(&r[1][0], "double_track_overpass");
    assert!(field(&r[1], 2) >= field(&r[0], 2));
    assert_eq!(field(&r[0], 3), 0.0);
    assert!(field(&r[1], 3) >= 0.0);
}

#[test]
fn grid_on_small_program_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.toml");
    let base = junction_core::bundled::get("operating_programs").unwrap();
    let cut = base.find("programs = [").unwrap();
    let text = format!(
        "{}programs = [\n    {{ name = \"low\", regional = 2, freight = 1 }},\n    {{ name = \"urban\", regional = 10 }},\n]\n",
        &base[..cut]
    );
    std::fs::write(&path, text).unwrap();
    let out = junction(&["grid", "--config", path.to_str().unwrap(), "--mu-step", "0.05", "--mu-min", "0.05"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("grid.csv"));
    assert_eq!(r.len(), 8);
    for pair in r.chunks(2) {
        assert_eq!(&pair[0][2], "double_track");
        assert!(field(&pair[1], 4) >= field(&pair[0], 4));
    }
    let b = |m: &str, br: &str| {
        r.iter()
            .find(|x| &x[0] == m && &x[1] == br && &x[2] == "double_track")
            .map(|x| field(x, 4))
            .unwrap()
    };
    assert!(b("urban", "urban") < b("low", "low"));
}

#[test]
fn exported_prism_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = junction(&["export-prism", "--config", "bundled:single_track", "--m", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("single_track.prism")).unwrap();
    let model = parse_prism(&text).unwrap();
    assert_eq!(model.generator.dim(), 23);
    assert_eq!(model.rewards.len(), 2);
}

#[test]
fn size_queue_reports_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = junction(&["size-queue", "--config", "bundled:mm1_single_route", "--mu", "0.5", "--p-loss-limit", "0.001"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&dir.path().join("size_queue.csv"));
    assert_eq!(r.len(), 4);
    assert_eq!(&r[3][2], "true");
    let tight = junction(
        &["size-queue", "--config", "bundled:mm1_single_route", "--mu", "0.5", "--p-loss-limit", "0.001", "--m-max", "2"],
        dir.path(),
    );
    assert_eq!(tight.status.code(), Some(1));
}
