mod common;

use common::{map_from, noiseless_lidar, planar, still_scan};
use lio_core::correspondence::{match_scan, MatchConfig, RejectionStrategy, RelativeMotion};
use lio_core::lie::{boxminus, boxplus_pose, exp_so3, Pose, Tangent6};
use lio_core::pointmap::{voxel_downsample, SubmapConfig, VoxelSubmap};
use lio_core::propagation::PosePrior;
use lio_core::registration::{
    analyze_degeneracy, build_system, estimate_pose, solve_iteration, RegistrationConfig, RegistrationStatus,
};
use lio_core::sim::SceneModel;
use nalgebra::{Matrix3, Vector3};

struct Fixture {
    map: VoxelSubmap,
    points: Vec<Vector3<f64>>,
    truth: Pose,
}

fn room_fixture() -> Fixture {
    let world = SceneModel::room().build().unwrap();
    let lidar = noiseless_lidar();
    let rig = lidar.rig(Pose::from_translation(Vector3::new(0.0, 0.0, 0.1)));
    let truth = planar(1.0, -0.5, 0.0, 0.3);
    let views = [truth, planar(-2.0, 1.0, 0.0, 0.0), planar(3.0, 2.0, 0.0, 1.2)];
    let map = map_from(&world, &lidar, &rig, &views, 0.25);
    let raw: Vec<_> = still_scan(&world, &lidar, &rig, &truth, 7).into_iter().map(|(p, _)| p).collect();
    Fixture { map, points: voxel_downsample(&raw, 0.5).unwrap(), truth }
}

fn prior_at(pose: Pose, sigma_rot: f64, sigma_trans: f64) -> PosePrior {
    PosePrior { pose, rot_cov: Matrix3::identity() * sigma_rot.powi(2), trans_cov: Matrix3::identity() * sigma_trans.powi(2) }
}

fn perturbed(truth: &Pose) -> Pose {
    boxplus_pose(truth, &Tangent6::new(Vector3::new(0.01, -0.02, 0.03), Vector3::new(0.08, -0.06, 0.04)))
}

fn match_cfg() -> MatchConfig {
    MatchConfig { strategy: RejectionStrategy::None, ..MatchConfig::default() }
}

#[test]
fn recovers_pose_from_perturbed_prior() {
    let f = room_fixture();
    let prior = prior_at(perturbed(&f.truth), 0.05, 0.2);
    let cfg = RegistrationConfig { w: 0.0, max_iterations: 20, ..RegistrationConfig::default() };
    let out = estimate_pose(&f.points, &f.map, &prior, &RelativeMotion::identity(), &match_cfg(), &cfg).unwrap();
    assert_eq!(out.status, RegistrationStatus::Converged);
    let err = boxminus(&out.pose, &f.truth);
    assert!(err.trans.norm() < 5e-3, "translation error {}", err.trans.norm());
    assert!(err.rot.norm() < 1e-3, "rotation error {}", err.rot.norm());
    assert_eq!(out.points_global.len(), f.points.len());
}

#[test]
fn heavy_prior_holds_the_prediction() {
    let f = room_fixture();
    let start = perturbed(&f.truth);
    let prior = prior_at(start, 0.05, 0.2);
    let free = RegistrationConfig { w: 0.0, ..RegistrationConfig::default() };
    let pinned = RegistrationConfig { w: 1e9, ..RegistrationConfig::default() };
    let motion = RelativeMotion::identity();
    let a = estimate_pose(&f.points, &f.map, &prior, &motion, &match_cfg(), &free).unwrap();
    let b = estimate_pose(&f.points, &f.map, &prior, &motion, &match_cfg(), &pinned).unwrap();
    let moved_free = boxminus(&a.pose, &start).norm();
    let moved_pinned = boxminus(&b.pose, &start).norm();
    assert!(moved_free > 0.05);
    assert!(moved_pinned < 1e-3 * moved_free, "pinned step {moved_pinned} vs free {moved_free}");
}

#[test]
fn step_solves_the_regularized_normal_equations() {
    let f = room_fixture();
    let prior = prior_at(f.truth, 0.01, 0.05);
    let pose = perturbed(&f.truth);
    let corrs = match_scan(&f.points, &f.map, &pose, &RelativeMotion::identity(), &match_cfg()).unwrap();
    for w in [0.0, 1.0, 25.0] {
        let cfg = RegistrationConfig { w, ..RegistrationConfig::default() };
        let sys = build_system(&corrs.items, &pose, &cfg.kernel, cfg.residual_mode).unwrap();
        let report = analyze_degeneracy(&sys, &prior, &cfg);
        let delta = solve_iteration(&sys, &pose, &prior.pose, &report, &cfg).unwrap().to_vector();
        let weight = report.weight() * w;
        let offset = boxminus(&pose, &prior.pose).to_vector();
        let lhs = (sys.hessian() + weight) * delta;
        let rhs = sys.gradient() - weight * offset;
        assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1.0), "w = {w}");
        // the prior never weakens the spectrum
        assert!(report.lambda_min_trans_reg >= report.lambda_min_trans() - 1e-9);
        assert!(report.lambda_min_rot_reg >= report.lambda_min_rot() - 1e-9);
    }
}

#[test]
fn no_accepted_pairs_skips_and_returns_prior() {
    let mut far = VoxelSubmap::new(SubmapConfig::default());
    far.insert(&[Vector3::new(500.0, 500.0, 500.0)], &Vector3::new(500.0, 500.0, 500.0));
    let points = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0)];
    let prior = prior_at(Pose::new(exp_so3(&Vector3::new(0.0, 0.0, 0.2)), Vector3::new(1.0, 2.0, 3.0)), 0.01, 0.05);
    let cfg = MatchConfig { strategy: RejectionStrategy::Fixed { tau: 0.5 }, ..MatchConfig::default() };
    let out = estimate_pose(&points, &far, &prior, &RelativeMotion::identity(), &cfg, &RegistrationConfig::default()).unwrap();
    assert_eq!(out.status, RegistrationStatus::Skipped);
    assert!(out.status.is_failure());
    assert_eq!(out.pose, prior.pose);
    assert!(out.iterations.is_empty());
}

#[test]
fn empty_map_is_an_error() {
    let map = VoxelSubmap::new(SubmapConfig::default());
    let prior = prior_at(Pose::identity(), 0.01, 0.05);
    let res = estimate_pose(&[Vector3::x()], &map, &prior, &RelativeMotion::identity(), &match_cfg(), &RegistrationConfig::default());
    assert!(res.is_err());
}
