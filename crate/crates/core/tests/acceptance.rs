//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use lio_core::correspondence::{point_threshold, Correspondence, MatchConfig, RejectionStrategy, RelativeMotion};
use lio_core::eval::{ate_rmse, Trajectory};
use lio_core::lie::{boxminus, boxplus_pose, exp_so3, log_so3, sym_eig3, Pose, Tangent6};
use lio_core::pointmap::{voxel_downsample, SubmapConfig, VoxelSubmap};
use lio_core::propagation::{
    predict_pose, propagate_covariance, transition, transition_jacobians, ImuNoiseParams, ImuSample, NavState, NoiseVector,
    PosePrior, PropagationConfig, StateCovariance, StateVector, NOISE_DIM, STATE_DIM,
};
use lio_core::registration::{
    analyze_degeneracy, build_system, estimate_pose, solve_iteration, RegistrationConfig, RegistrationStatus, ResidualMode,
    RobustKernel,
};
use lio_core::runner::{ablate, run_with, RunOptions};
use lio_core::sim::{simulate_imu, ImuBiases, SceneModel, TrajectoryKind, TrajectorySpec};
use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let rotation = exp_so3(&(unit(&mut rng) * angle));
        let translation = unit(&mut rng) * rng.random_range(0.0..3.0);
        let p = unit(&mut rng) * rng.random_range(0.0..120.0);
        let motion = RelativeMotion { rotation, translation };
        let moved = (rotation * p + translation - p).norm();
        worst = worst.max(moved - point_threshold(&motion, &p));
    }
    // rotation axis ⊥ p and translation along the chord: the bound is tight
    let mut tight = 0.0f64;
    for _ in 0..1000 {
        let p = unit(&mut rng) * rng.random_range(0.1..120.0);
        let axis = p.cross(&unit(&mut rng)).normalize();
        let angle = rng.random_range(0.01..std::f64::consts::PI);
        let rotation = exp_so3(&(axis * angle));
        let chord = rotation * p - p;
        let translation = chord.normalize() * rng.random_range(0.0..3.0);
        let motion = RelativeMotion { rotation, translation };
        tight = tight.max(((rotation * p + translation - p).norm() - point_threshold(&motion, &p)).abs());
    }
    check(worst <= 1e-9 && tight <= 1e-9, format!("largest displacement minus bound {worst:.2e} m over 1e5 draws, tight-case gap {tight:.2e} m"))
}

fn random_state(rng: &mut ChaCha8Rng) -> NavState {
    NavState {
        rotation: exp_so3(&(unit(rng) * rng.random_range(0.0..3.0))),
        position: unit(rng) * 5.0,
        velocity: unit(rng) * 2.0,
        gyro_bias: unit(rng) * 0.01,
        accel_bias: unit(rng) * 0.05,
        gravity: Vector3::new(0.0, 0.0, -9.81) + unit(rng) * 0.01,
    }
}

fn ac2() -> Outcome {
    // closed-loop recovery of analytic trajectories
    let cfg = PropagationConfig::default();
    let mut worst_pos = 0.0f64;
    let specs = [
        TrajectorySpec { kind: TrajectoryKind::FigureEight, rate: 1000.0, amplitude: 3.0, period: 10.0, yaw_amplitude: 0.5, duration: 1.0, ..TrajectorySpec::default() },
        TrajectorySpec { kind: TrajectoryKind::FigureEight, rate: 1000.0, duration: 1.0, ..TrajectorySpec::default() },
        TrajectorySpec { kind: TrajectoryKind::LineWithYaw, rate: 1000.0, velocity: Vector3::new(3.0, 0.0, 0.0), yaw_rate: std::f64::consts::FRAC_PI_6, duration: 1.0, ..TrajectorySpec::default() },
        TrajectorySpec { kind: TrajectoryKind::ConstantVelocity, rate: 1000.0, velocity: Vector3::new(0.0, 1.5, 0.0), duration: 1.0, ..TrajectorySpec::default() },
    ];
    for spec in &specs {
        let gravity = Vector3::new(0.0, 0.0, -9.81);
        let imu = simulate_imu(spec, &ImuNoiseParams::zero(), &ImuBiases::default(), &gravity, 3).map_err(|e| e.to_string())?;
        let k0 = spec.sample(0.0).unwrap();
        let x0 = NavState {
            rotation: k0.pose.rotation,
            position: k0.pose.translation,
            velocity: k0.velocity,
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
            gravity,
        };
        let pred = predict_pose(&x0, &StateCovariance::zeros(), 0.0, 1.0, &imu, &ImuNoiseParams::zero(), &cfg).map_err(|e| e.to_string())?;
        let mut this = 0.0f64;
        for (t, pose) in pred.trace.samples() {
            this = this.max((pose.translation - spec.pose_at(*t).unwrap().translation).norm());
        }
        worst_pos = worst_pos.max(this);
    }

    // Jacobians against central differences on the error state
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_fx = 0.0f64;
    let mut worst_fw = 0.0f64;
    let h = 1e-6;
    for _ in 0..50 {
        let x = random_state(&mut rng);
        let u = ImuSample::new(0.0, unit(&mut rng) * 1.5, unit(&mut rng) * 12.0);
        let dt = 0.005;
        let (fx, fw) = transition_jacobians(&x, &u, dt);
        let base = transition(&x, &u, dt, &NoiseVector::zeros());
        for i in 0..STATE_DIM {
            let mut d = StateVector::zeros();
            d[i] = h;
            let plus = transition(&x.boxplus(&d), &u, dt, &NoiseVector::zeros()).boxminus(&base);
            let minus = transition(&x.boxplus(&-d), &u, dt, &NoiseVector::zeros()).boxminus(&base);
            worst_fx = worst_fx.max(((plus - minus) / (2.0 * h) - fx.column(i)).amax());
        }
        for i in 0..NOISE_DIM {
            let mut w = NoiseVector::zeros();
            w[i] = h;
            let plus = transition(&x, &u, dt, &w).boxminus(&base);
            let minus = transition(&x, &u, dt, &-w).boxminus(&base);
            worst_fw = worst_fw.max(((plus - minus) / (2.0 * h) - fw.column(i)).amax());
        }
    }

    // covariance stays symmetric PSD through a long propagation
    let noise = ImuNoiseParams::default();
    let mut x = random_state(&mut rng);
    let mut p = StateCovariance::identity() * 1e-6;
    let mut worst_asym = 0.0f64;
    let mut worst_neg = 0.0f64;
    for _ in 0..2000 {
        let u = ImuSample::new(0.0, unit(&mut rng) * 0.5, Vector3::new(0.0, 0.0, 9.81) + unit(&mut rng));
        p = propagate_covariance(&p, &x, &u, 0.005, &noise).map_err(|e| e.to_string())?;
        x = transition(&x, &u, 0.005, &NoiseVector::zeros());
        worst_asym = worst_asym.max((p - p.transpose()).amax());
        let eig = SymmetricEigen::new(p).eigenvalues.min();
        worst_neg = worst_neg.max(-eig / p.trace());
    }
    check(
        worst_pos < 1e-4 && worst_fx < 1e-5 && worst_fw < 1e-5 && worst_asym == 0.0 && worst_neg <= 1e-12,
        format!(
            "closed-loop {worst_pos:.2e} m, F_x {worst_fx:.2e}, F_w {worst_fw:.2e}, asym {worst_asym:.1e}, min eig/trace {:.1e}",
            -worst_neg
        ),
    )
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SubmapConfig { max_points_per_voxel: 10_000, prune_radius: 1e6, ..SubmapConfig::default() };
    let mut map = VoxelSubmap::new(cfg);
    let points: Vec<_> = (0..10_000)
        .map(|_| Vector3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-3.0..3.0)))
        .collect();
    map.insert(&points, &Vector3::zeros());
    let stored: Vec<_> = map.points().copied().collect();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let q = Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-10.0..10.0));
        let brute = stored.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
        let (_, d) = map.nearest(&q).unwrap();
        if d != brute {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0 && stored.len() == points.len(),
        format!("{mismatches} mismatches over 1000 queries against {} stored points", stored.len()),
    )
}

fn fixture_report(scene: SceneModel, pose: &Pose) -> (f64, Vector3<f64>) {
    let world = scene.build().unwrap();
    let lidar = common::noiseless_lidar();
    let rig = lidar.rig(Pose::identity());
    let corrs: Vec<_> = common::still_scan(&world, &lidar, &rig, pose, 5)
        .into_iter()
        .map(|(p, truth)| Correspondence {
            source: p,
            target: truth.foot,
            normal: Some(truth.normal),
            threshold: f64::INFINITY,
            distance: 0.0,
            accepted: true,
        })
        .collect();
    let sys = build_system(&corrs, pose, &RobustKernel::None, ResidualMode::PointToPlane).unwrap();
    let prior = PosePrior { pose: *pose, rot_cov: Matrix3::identity() * 1e-4, trans_cov: Matrix3::identity() * 1e-2 };
    let report = analyze_degeneracy(&sys, &prior, &RegistrationConfig::default());
    (report.trans.lambda_min() / report.trans.lambda_max(), report.trans.eigen.vector(0))
}

fn ac4() -> Outcome {
    let (corridor_ratio, axis) = fixture_report(SceneModel::corridor(), &common::planar(0.0, 3.0, 0.0, 0.4));
    let angle = axis.dot(&Vector3::y()).abs().min(1.0).acos().to_degrees();
    let (room_ratio, _) = fixture_report(SceneModel::room(), &common::planar(1.0, -0.5, 0.0, 0.3));
    check(
        corridor_ratio < 1e-3 && angle < 1.0 && room_ratio > 0.1,
        format!("corridor λmin/λmax {corridor_ratio:.2e}, axis error {angle:.3}°, room λmin/λmax {room_ratio:.3}"),
    )
}

fn ac5() -> Outcome {
    let cfg = common::load("corridor", &[]);
    let report = run_with(&cfg, None, RunOptions { retention: false, keep_iterations: true }).map_err(|e| e.to_string())?;
    let w = cfg.registration.w;
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for log in report.iterations.iter().flatten() {
        for block in [&log.report.rot, &log.report.trans] {
            let raw = sym_eig3(&block.hessian).min();
            let reg = sym_eig3(&(block.hessian + block.weight * w)).min();
            let tol = 1e-12 * block.lambda_max().max(1.0);
            worst = worst.min(reg - raw + tol);
            checked += 1;
        }
    }
    let below_floor = report
        .scans
        .iter()
        .filter(|s| match (s.lambda_min_rot_reg, s.floor_rot, s.lambda_min_trans_reg, s.floor_trans) {
            (Some(r), Some(fr), Some(t), Some(ft)) => r < fr || t < ft,
            _ => false,
        })
        .count();
    check(
        checked > 0 && worst >= 0.0 && below_floor == 0,
        format!("{checked} logged blocks, none lowered by the prior; {below_floor} scans below the clamp floor"),
    )
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5 {
        let s = seed.to_string();
        let r0 = run_with(&common::load("corridor", &[("seed", &s), ("reg.w", "0")]), None, RunOptions::default()).map_err(|e| e.to_string())?;
        let r1 = run_with(&common::load("corridor", &[("seed", &s), ("reg.w", "1")]), None, RunOptions::default()).map_err(|e| e.to_string())?;
        let (d0, d1) = (r0.final_drift().y.abs(), r1.final_drift().y.abs());
        ok &= d1 <= 0.5 * d0 && r1.ate.rmse < r0.ate.rmse;
        lines.push(format!("s{seed}: drift {d0:.2}→{d1:.2} m, ATE {:.2}→{:.2} m", r0.ate.rmse, r1.ate.rmse));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 60.0, format!("{} ({secs:.1} s)", lines.join("; ")))
}

fn ac7() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5 {
        let cfg = common::load("fast_yaw", &[("seed", &seed.to_string())]);
        let report = ablate(&cfg, None).map_err(|e| e.to_string())?;
        let far = |name: &str| report.get(name).and_then(|r| r.retention.as_ref()).map(|s| s.buckets[3].retention()).unwrap();
        let ate = |name: &str| report.get(name).unwrap().ate.rmse;
        let gap = far("point_adaptive") - far("fixed");
        let best_other = ["none", "fixed", "scan_adaptive"].iter().map(|n| ate(n)).fold(f64::INFINITY, f64::min);
        let ratio = ate("point_adaptive") / best_other;
        ok &= gap >= 0.20 && ratio <= 1.05;
        lines.push(format!("s{seed}: far retention +{:.0} pp, ATE ratio {ratio:.2}", gap * 100.0));
    }
    check(ok, lines.join("; "))
}

fn ac8() -> Outcome {
    let world = SceneModel::room().build().unwrap();
    let lidar = common::noiseless_lidar();
    let rig = lidar.rig(Pose::identity());
    let truth = common::planar(0.5, 0.3, 0.0, 0.2);
    // the first view coincides with the query so the true pose is an exact
    // fixed point; the others add overlapping geometry
    let map_poses = [
        truth,
        common::planar(0.0, 0.0, 0.0, 0.0),
        common::planar(1.0, 0.5, 0.0, 0.3),
        common::planar(-1.0, 1.0, 0.0, -0.4),
        common::planar(0.5, -1.0, 0.0, 0.8),
    ];
    let map = common::map_from(&world, &lidar, &rig, &map_poses, 0.25);
    let scan: Vec<_> = common::still_scan(&world, &lidar, &rig, &truth, 77).into_iter().map(|(p, _)| p).collect();
    let points = voxel_downsample(&scan, 0.25).unwrap();
    let cfg = RegistrationConfig::default();
    let match_cfg = MatchConfig { strategy: RejectionStrategy::None, ..MatchConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_t, mut worst_r, mut max_iter, mut recovered) = (0.0f64, 0.0f64, 0, 0);
    for _ in 0..100 {
        let delta = Tangent6::new(unit(&mut rng) * 2f64.to_radians(), unit(&mut rng) * 0.1);
        let start = boxplus_pose(&truth, &delta);
        let prior = PosePrior { pose: start, rot_cov: Matrix3::identity() * 2f64.to_radians().powi(2), trans_cov: Matrix3::identity() * 0.01 };
        let out = estimate_pose(&points, &map, &prior, &RelativeMotion::identity(), &match_cfg, &cfg).map_err(|e| e.to_string())?;
        let err = boxminus(&out.pose, &truth);
        let (et, er) = (err.trans.norm(), err.rot.norm());
        worst_t = worst_t.max(et);
        worst_r = worst_r.max(er);
        max_iter = max_iter.max(out.iterations.len());
        if et < 1e-3 && er < 1e-3 && out.status == RegistrationStatus::Converged {
            recovered += 1;
        }
    }
    check(
        recovered == 100 && max_iter <= cfg.max_iterations,
        format!("{recovered}/100 recovered, worst {worst_t:.1e} m / {worst_r:.1e} rad, ≤ {max_iter} iterations"),
    )
}

/// Cost of the fixed correspondence set at `(Exp(r), t)`, evaluated
/// without the crate's residual code.
fn direct_cost(corrs: &[Correspondence], x: &Vector6<f64>, mode: ResidualMode) -> f64 {
    let r = Rotation3::from_scaled_axis(Vector3::new(x[0], x[1], x[2]));
    let t = Vector3::new(x[3], x[4], x[5]);
    corrs
        .iter()
        .map(|c| {
            let d = r * c.source + t - c.target;
            match (mode, c.normal) {
                (ResidualMode::PointToPoint, _) | (_, None) => d.norm_squared(),
                (_, Some(n)) => n.dot(&d).powi(2),
            }
        })
        .sum()
}

/// Newton iterations on central-difference derivatives.
fn numeric_minimum(corrs: &[Correspondence], mode: ResidualMode) -> Vector6<f64> {
    let f = |x: &Vector6<f64>| direct_cost(corrs, x, mode);
    let mut x = Vector6::zeros();
    for _ in 0..100 {
        let h = 1e-4;
        let mut g = Vector6::zeros();
        let mut hess = nalgebra::Matrix6::zeros();
        for i in 0..6 {
            let mut ei = Vector6::zeros();
            ei[i] = h;
            g[i] = (f(&(x + ei)) - f(&(x - ei))) / (2.0 * h);
            for j in 0..6 {
                let mut ej = Vector6::zeros();
                ej[j] = h;
                hess[(i, j)] = (f(&(x + ei + ej)) - f(&(x + ei - ej)) - f(&(x - ei + ej)) + f(&(x - ei - ej))) / (4.0 * h * h);
            }
        }
        // damp until the model is convex, then backtrack on the true cost
        let mut damping = 0.0;
        let mut step = Vector6::zeros();
        for _ in 0..60 {
            let shifted = hess + nalgebra::Matrix6::identity() * damping;
            if let Some(ch) = shifted.cholesky() {
                step = ch.solve(&-g);
                break;
            }
            damping = if damping == 0.0 { 1e-9 * hess.diagonal().amax().max(1.0) } else { damping * 10.0 };
        }
        let f0 = f(&x);
        let mut scale = 1.0;
        while f(&(x + step * scale)) > f0 && scale > 1e-12 {
            scale *= 0.5;
        }
        x += step * scale;
        if (step * scale).norm() < 1e-13 {
            break;
        }
    }
    x
}

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let cfg = RegistrationConfig { w: 0.0, kernel: RobustKernel::None, ..RegistrationConfig::default() };
    for trial in 0..40 {
        let mode = if trial % 2 == 0 { ResidualMode::PointToPlane } else { ResidualMode::PointToPoint };
        let truth = Pose::new(exp_so3(&(unit(&mut rng) * rng.random_range(0.0..0.3))), unit(&mut rng) * 0.5);
        let corrs: Vec<_> = (0..10)
            .map(|_| {
                let source = unit(&mut rng) * rng.random_range(1.0..10.0);
                let normal = unit(&mut rng);
                let target = truth.transform_point(&source) + unit(&mut rng) * 0.05;
                Correspondence { source, target, normal: Some(normal), threshold: f64::INFINITY, distance: 0.0, accepted: true }
            })
            .collect();
        let prior = PosePrior { pose: Pose::identity(), rot_cov: Matrix3::identity(), trans_cov: Matrix3::identity() };
        let mut pose = Pose::identity();
        for _ in 0..50 {
            let sys = build_system(&corrs, &pose, &RobustKernel::None, mode).map_err(|e| e.to_string())?;
            let report = analyze_degeneracy(&sys, &prior, &cfg);
            let step = solve_iteration(&sys, &pose, &prior.pose, &report, &cfg).map_err(|e| e.to_string())?;
            pose = boxplus_pose(&pose, &step);
            if step.norm() < 1e-14 {
                break;
            }
        }
        let x = numeric_minimum(&corrs, mode);
        let oracle = Pose::new(Rotation3::from_scaled_axis(Vector3::new(x[0], x[1], x[2])), Vector3::new(x[3], x[4], x[5]));
        let rot = log_so3(&(oracle.rotation.inverse() * pose.rotation)).norm();
        let dev = rot.max((oracle.translation - pose.translation).norm());
        worst = worst.max(dev);
    }
    check(worst < 1e-6, format!("worst deviation from direct minimization {worst:.2e} over 40 instances"))
}

fn ac10() -> Outcome {
    let positions = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 1.0, 0.0], [2.0, 3.0, 1.0], [0.0, 4.0, 2.0]];
    let gt = Trajectory::from_poses(positions.iter().enumerate().map(|(i, p)| (i as f64, Pose::from_translation(Vector3::from(*p))))).unwrap();
    let offset = Vector3::new(0.75, 1.0, 0.0);
    let shifted = Trajectory::from_poses(positions.iter().enumerate().map(|(i, p)| (i as f64, Pose::from_translation(Vector3::from(*p) + offset)))).unwrap();
    let offset_rmse = ate_rmse(&shifted, &gt, false).map_err(|e| e.to_string())?.rmse;

    // symmetric cross with radial perturbations: the best rigid fit is the
    // generating transform, leaving rmse = sqrt(4c²/5)
    let c = 0.1;
    let cross = [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
    let bumps = [[c, 0.0, 0.0], [-c, 0.0, 0.0], [0.0, c, 0.0], [0.0, -c, 0.0], [0.0, 0.0, 0.0]];
    let moved = Pose::new(exp_so3(&Vector3::new(0.3, -0.2, 1.1)), Vector3::new(5.0, -3.0, 2.0));
    let gt2 = Trajectory::from_poses(cross.iter().enumerate().map(|(i, p)| (i as f64, Pose::from_translation(Vector3::from(*p))))).unwrap();
    let est2 = Trajectory::from_poses(
        cross.iter().zip(&bumps).enumerate().map(|(i, (p, b))| (i as f64, Pose::from_translation(moved.transform_point(&(Vector3::from(*p) + Vector3::from(*b)))))),
    )
    .unwrap();
    let aligned = ate_rmse(&est2, &gt2, true).map_err(|e| e.to_string())?.rmse;
    let expected = (4.0 * c * c / 5.0f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let random = Trajectory::from_poses((0..200).map(|i| {
        let t = 1.0e9 + i as f64 * 0.1 + rng.random_range(0.0..0.01);
        (t, Pose::new(exp_so3(&(unit(&mut rng) * rng.random_range(0.0..3.1))), unit(&mut rng) * rng.random_range(0.0..1e3)))
    }))
    .unwrap();
    let text = random.to_tum_string();
    let parsed = Trajectory::parse_tum(&text).map_err(|e| e.to_string())?;
    let bit_exact = parsed.to_tum_string() == text && parsed.poses() == random.poses();
    check(
        offset_rmse == 1.25 && (aligned - expected).abs() < 1e-9 && bit_exact,
        format!("offset rmse {offset_rmse} (1.25), aligned {aligned:.12} vs {expected:.12}, TUM round trip bit-exact: {bit_exact}"),
    )
}

fn ac11() -> Outcome {
    let cfg = common::load("room", &[]);
    let on_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_with(&cfg, None, RunOptions::default()))
    };
    let a = on_pool(1).map_err(|e| e.to_string())?;
    let b = on_pool(4).map_err(|e| e.to_string())?;
    let c = run_with(&cfg, None, RunOptions::default()).map_err(|e| e.to_string())?;
    let identical = a.est.to_tum_string() == b.est.to_tum_string() && b.est.to_tum_string() == c.est.to_tum_string();
    let ms = c.mean_scan_ms();
    check(identical && ms < 50.0, format!("est.tum identical across runs and 1/4 threads: {identical}; {ms:.1} ms per scan"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1 chord bound", ac1),
        ("AC2 propagation fidelity", ac2),
        ("AC3 nearest-neighbour exactness", ac3),
        ("AC4 degeneracy detection", ac4),
        ("AC5 eigenvalue elevation", ac5),
        ("AC6 degeneracy compensation", ac6),
        ("AC7 ablation ordering", ac7),
        ("AC8 well-conditioned recovery", ac8),
        ("AC9 Gauss-Newton equivalence", ac9),
        ("AC10 evaluation correctness", ac10),
        ("AC11 determinism and budget", ac11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        // the report is the deliverable; strict mode turns it into a gate
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
