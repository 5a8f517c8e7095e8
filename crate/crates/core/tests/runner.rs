mod common;

use common::load;
use lio_core::runner::{ablate, run, RunConfig, RANGE_BUCKETS};

#[test]
fn noiseless_static_run_is_exact() {
    let report = run(&load("static", &[]), None).unwrap();
    assert_eq!(report.failures, 0);
    assert!(report.ate.rmse < 1e-6, "ate {}", report.ate.rmse);
    assert!(report.ate_unaligned.rmse < 1e-6);
}

#[test]
fn room_tracks_without_failures() {
    let report = run(&load("room", &[]), None).unwrap();
    assert_eq!(report.failures, 0);
    assert_eq!(report.est.len(), report.gt.len());
    assert!(report.ate.rmse < 0.05, "ate {}", report.ate.rmse);
}

#[test]
fn prior_reduces_corridor_drift() {
    let drift = |w: &str| run(&load("corridor", &[("reg.w", w)]), None).unwrap().final_drift().y.abs();
    let (free, regularized) = (drift("0"), drift("1"));
    assert!(regularized < free, "w=1 drift {regularized} vs w=0 {free}");
}

#[test]
fn runs_are_deterministic_and_write_outputs() {
    let cfg = load("room", &[("pipeline.scans", "15")]);
    let dir = tempfile::tempdir().unwrap();
    let a = run(&cfg, Some(dir.path())).unwrap();
    let b = run(&cfg, None).unwrap();
    assert_eq!(a.est.to_tum_string(), b.est.to_tum_string());
    for name in ["est.tum", "gt.tum", "metrics.json", "eigen_timeline.csv", "diagnostics.jsonl", "config.cfg"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.jsonl")).unwrap();
    assert_eq!(diag.lines().count(), a.scans.len());
    // the written configuration reproduces the run
    let again = RunConfig::load(&dir.path().join("config.cfg")).unwrap();
    assert_eq!(run(&again, None).unwrap().est.to_tum_string(), a.est.to_tum_string());
}

#[test]
fn ablation_uses_identical_inputs() {
    let cfg = load("fast_yaw", &[("pipeline.scans", "4")]);
    let dir = tempfile::tempdir().unwrap();
    let report = ablate(&cfg, Some(dir.path())).unwrap();
    assert_eq!(report.runs.len(), 4);
    // the first registration sees the same map and prior under every strategy
    let first = |name| report.get(name).unwrap().scans.iter().find(|s| s.registered()).unwrap().clone();
    let none = first("none");
    assert_eq!(none.accepted, none.total);
    for name in ["fixed", "scan_adaptive", "point_adaptive"] {
        let s = first(name);
        assert_eq!((s.raw_points, s.total), (none.raw_points, none.total), "{name}");
        assert!(s.accepted <= s.total);
    }
    let retention = report.get("none").unwrap().retention.unwrap();
    assert!(retention.buckets.iter().all(|b| b.accepted == b.total && b.true_accepted == b.true_total));
    let csv = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * RANGE_BUCKETS.len());
    assert!(dir.path().join("point_adaptive/est.tum").is_file());
}
