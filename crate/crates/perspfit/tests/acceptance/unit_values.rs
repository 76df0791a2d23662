//! Worked examples for every operation, checked exactly or within the
//! tolerance of their oracle.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector2, Vector3};
use perspfit::config::{RunConfig, TrackingPolicy};
use perspfit::harness::{evaluate_predictions, run_fit, run_sweep, SweepKind};
use perspfit::io::{derive_crop, load_keypoints, OpenPoseDocument, OpenPosePerson};
use perspfit::report::Report;
use perspfit::synth::{generate_synthetic, SyntheticScene, SyntheticSceneSpec};
use perspfit_core::body::{
    forward_kinematics, model_to_observation_joints, KinematicTree, PartOrientations, PoseParams,
    NUM_JOINTS, NUM_OBSERVATION_JOINTS, NUM_POSE_PARAMS,
};
use perspfit_core::camera::{
    approx_focal, center_shift, crop_to_image, focal_from_fov, full_translation, project, project_point,
    project_weak, tz_from_scale, weak_equivalent_intrinsics, weak_from_translation, CameraError,
    CameraTranslation, CropSpec, Intrinsics, WeakCameraParams,
};
use perspfit_core::fitting::{
    fit_camera_and_orientation, fit_frame, reprojection_loss, FitConfig, FitError, JointLimits, Keypoint2D,
    LossKind, ProjectionMode,
};
use perspfit_core::geometry::{
    apply_similarity, axis_angle_to_matrix, geodesic_distance, procrustes_align, AxisAngle, RotationMatrix,
    SimilarityTransform,
};
use perspfit_core::metrics::{
    auc, mpjae, mpjae_pa, mpjpe, mpjpe_pa, pa_alignment, pck, EvalPair, MetricsReport, AUC_MAX_MM, AUC_STEPS,
    PCK_THRESHOLD_MM,
};
use perspfit_core::smoothing::{one_euro_step, smooth_sequence, OneEuroConfig, OneEuroState, TimedSkeleton};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::common::{close, fixtures, initialization_metrics, per_frame_config, rng, vclose, Checks, Failure, Outcome};
use crate::scenarios::{close_spec, focal_spec, jittered_track, motion_spec, off_center_spec, temporal_variance};

pub fn run() -> Outcome {
    let mut c = Checks::default();
    geometry(&mut c);
    camera(&mut c);
    body(&mut c);
    fitting(&mut c)?;
    smoothing(&mut c)?;
    metrics(&mut c);
    pipeline(&mut c)?;
    c.finish("examples")
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> RotationMatrix {
    let axis = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)).normalize();
    axis_angle_to_matrix(&AxisAngle(axis * rng.random_range(0.0..max_angle)))
}

fn random_pose(rng: &mut ChaCha8Rng, sigma: f64) -> PoseParams {
    let normal = Normal::new(0.0, sigma).unwrap();
    PoseParams::from_vec((0..NUM_POSE_PARAMS).map(|_| normal.sample(rng)).collect()).unwrap()
}

fn mclose(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) -> bool {
    (a - b).abs().max() <= tol
}

/// Rotation matrix of a unit quaternion built from the axis-angle vector.
fn quaternion_oracle(v: &Vector3<f64>) -> Matrix3<f64> {
    let angle = v.norm();
    let axis = v / angle;
    let (w, x, y, z) = ((angle / 2.0).cos(), axis.x * (angle / 2.0).sin(), axis.y * (angle / 2.0).sin(), axis.z * (angle / 2.0).sin());
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn geometry(c: &mut Checks) {
    let m = axis_angle_to_matrix(&AxisAngle::zero());
    c.check("rodrigues zero", *m.matrix() == Matrix3::identity(), || format!("{m:?}"));
    let m = axis_angle_to_matrix(&AxisAngle::new(0.0, 0.0, FRAC_PI_2));
    let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    c.check("rodrigues quarter turn", mclose(m.matrix(), &expected, 1e-12), || format!("{m:?}"));
    let v = Vector3::new(0.3, -0.2, 0.9);
    let m = *axis_angle_to_matrix(&AxisAngle(v)).matrix();
    c.check("rodrigues orthogonal", mclose(&(m.transpose() * m), &Matrix3::identity(), 1e-12), || format!("{m:?}"));
    c.check("rodrigues determinant", close(m.determinant(), 1.0, 1e-12), || format!("{}", m.determinant()));
    c.check("rodrigues quaternion oracle", mclose(&m, &quaternion_oracle(&v), 1e-12), || format!("{m:?}"));

    let id = RotationMatrix::identity();
    c.check("geodesic identical", geodesic_distance(&id, &id) == 0.0, || "nonzero".into());
    let d = geodesic_distance(&id, &RotationMatrix::rot_z(FRAC_PI_2));
    c.check("geodesic quarter turn", close(d, FRAC_PI_2, 1e-12), || format!("{d}"));
    let d = geodesic_distance(&RotationMatrix::rot_x(0.4), &RotationMatrix::rot_x(1.0));
    c.check("geodesic same axis", close(d, 0.6, 1e-12), || format!("{d}"));

    let mut rng = rng(101);
    let x = random_cloud(&mut rng, 24);
    let t = procrustes_align(&x, &x).unwrap();
    c.check("procrustes identity", close(t.scale, 1.0, 1e-12) && mclose(t.rotation.matrix(), &Matrix3::identity(), 1e-12) && t.translation.norm() < 1e-12, || format!("{t:?}"));
    let truth = SimilarityTransform {
        scale: 2.0,
        rotation: RotationMatrix::rot_z(FRAC_PI_2),
        translation: Vector3::new(1.0, 2.0, 3.0),
    };
    let y = apply_similarity(&truth, &x);
    let t = procrustes_align(&x, &y).unwrap();
    let recovered = close(t.scale, 2.0, 1e-9)
        && mclose(t.rotation.matrix(), truth.rotation.matrix(), 1e-9)
        && vclose(&t.translation, &truth.translation, 1e-9)
        && t.sum_squared_residual(&x, &y) < 1e-9;
    c.check("procrustes exact recovery", recovered, || format!("{t:?}"));

    // Residual RMS of a σ = 1 mm copy sits just below √3·σ per point, since
    // the fit absorbs 7 of the 72 degrees of freedom; no sampled transform
    // may beat the closed form.
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let jitter = Normal::new(0.0, 0.01).unwrap();
    let mut ratios = Vec::new();
    let mut beaten = 0;
    for _ in 0..50 {
        let x = random_cloud(&mut rng, 24);
        let q = random_rotation(&mut rng, PI);
        let y: Vec<_> = x.iter().map(|p| q.rotate(p) * 1.3 + Vector3::from_fn(|_, _| noise.sample(&mut rng))).collect();
        let t = procrustes_align(&x, &y).unwrap();
        let cost = t.sum_squared_residual(&x, &y);
        ratios.push((cost / 24.0).sqrt() / (3f64.sqrt() * 1e-3));
        for _ in 0..200 {
            let other = SimilarityTransform {
                scale: t.scale * (1.0 + jitter.sample(&mut rng)),
                rotation: axis_angle_to_matrix(&AxisAngle(Vector3::from_fn(|_, _| jitter.sample(&mut rng)))) * t.rotation,
                translation: t.translation + Vector3::from_fn(|_, _| jitter.sample(&mut rng)),
            };
            if other.sum_squared_residual(&x, &y) < cost {
                beaten += 1;
            }
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    c.check("procrustes noise level", (0.75..1.05).contains(&mean), || format!("RMS / (√3 σ) = {mean:.3}"));
    c.check("procrustes beats sampled transforms", beaten == 0, || format!("{beaten} sampled transforms did better"));

    let p = [Vector3::new(0.3, -1.0, 2.5)];
    c.check("similarity identity", apply_similarity(&SimilarityTransform::identity(), &p)[0] == p[0], || "moved".into());
    let scale2 = SimilarityTransform {
        scale: 2.0,
        ..SimilarityTransform::identity()
    };
    let out = apply_similarity(&scale2, &[Vector3::new(1.0, 1.0, 1.0)])[0];
    c.check("similarity scale", out == Vector3::new(2.0, 2.0, 2.0), || format!("{out:?}"));
    let back = apply_similarity(&truth, &apply_similarity(&truth.inverse(), &x));
    let ok = back.iter().zip(&x).all(|(a, b)| vclose(a, b, 1e-9));
    c.check("similarity inverse round trip", ok, || "round trip drifted".into());
}

fn camera(c: &mut Checks) {
    let f = approx_focal(1920.0, 1080.0);
    c.check("approx focal 1080p", close(f, 2202.91, 0.005) && (f - 2200.0).abs() / 2200.0 < 0.005, || format!("{f}"));
    c.check("approx focal zero height", approx_focal(640.0, 0.0) == 640.0, || format!("{}", approx_focal(640.0, 0.0)));
    let f = approx_focal(224.0, 224.0);
    c.check("approx focal crop", close(f, 316.78, 0.005) && close(f, 224.0 * 2f64.sqrt(), 1e-9), || format!("{f}"));

    let f = focal_from_fov(1920.0, 1080.0, 55f64.to_radians()).unwrap();
    let oracle = 1920f64.hypot(1080.0) / (2.0 * 27.5f64.to_radians().tan());
    c.check("fov focal arithmetic", close(f, oracle, 1e-9), || format!("{f} vs {oracle}"));
    c.check("fov focal near diagonal", (f - approx_focal(1920.0, 1080.0)).abs() / f < 0.05, || format!("{f}"));
    let f = focal_from_fov(1920.0, 1080.0, 2.0 * 0.5f64.atan()).unwrap();
    c.check("fov focal tan one half", close(f, 1920f64.hypot(1080.0), 1e-9), || format!("{f}"));
    let f = focal_from_fov(1000.0, 0.0, FRAC_PI_2).unwrap();
    c.check("fov focal right angle", close(f, 500.0, 1e-9), || format!("{f}"));

    let tz = tz_from_scale(5000.0, 1.0, 1.0, 224.0).unwrap();
    c.check("tz weak crop", close(tz, 44.643, 5e-4), || format!("{tz}"));
    let tz = tz_from_scale(2200.0, 3.0, 1.0, 224.0).unwrap();
    c.check("tz full image", close(tz, 6.548, 5e-4), || format!("{tz}"));
    let (a, b) = (tz_from_scale(1800.0, 2.5, 0.8, 224.0).unwrap(), tz_from_scale(1800.0, 2.5, 1.6, 224.0).unwrap());
    c.check("tz inverse in scale", close(b, a / 2.0, 1e-12), || format!("{a} {b}"));

    let (w, h) = (1920.0, 1080.0);
    let shift = center_shift(&CropSpec::new(w / 2.0, h / 2.0, 448.0), 1.0, w, h).unwrap();
    c.check("center shift centered", shift == (0.0, 0.0), || format!("{shift:?}"));
    let off = CropSpec::new(1200.0, h / 2.0, 448.0);
    let shift = center_shift(&off, 1.0, w, h).unwrap();
    c.check("center shift off center", close(shift.0, 1.0714, 5e-5) && close(shift.0, 480.0 / 448.0, 1e-12), || format!("{shift:?}"));
    let crop = CropSpec::new(1500.0, 200.0, 300.0);
    let (s1, s2) = (center_shift(&crop, 0.9, w, h).unwrap(), center_shift(&crop, 1.8, w, h).unwrap());
    c.check("center shift halves", close(s2.0, s1.0 / 2.0, 1e-12) && close(s2.1, s1.1 / 2.0, 1e-12), || format!("{s1:?} {s2:?}"));

    let centered = CropSpec::new(w / 2.0, h / 2.0, 672.0);
    let weak = WeakCameraParams { s: 1.0, tx: 0.12, ty: -0.05 };
    let t = full_translation(&weak, &centered, 2200.0, w, h).unwrap().0;
    c.check("full translation centered", t.x == 0.12 && t.y == -0.05 && close(t.z, 6.548, 5e-4), || format!("{t:?}"));
    let weak = WeakCameraParams { s: 1.0, tx: 0.0, ty: 0.0 };
    let t = full_translation(&weak, &centered, 2200.0, w, h).unwrap().0;
    c.check("full translation no offset", t.x == 0.0 && t.y == 0.0 && t.z > 0.0, || format!("{t:?}"));
    let weak = WeakCameraParams { s: 1.0, tx: 0.3, ty: 0.0 };
    let t = full_translation(&weak, &off, 2200.0, w, h).unwrap().0;
    // The offset is added: a crop right of center puts the subject at +x.
    c.check("full translation off center", close(t.x, 0.3 + 480.0 / 448.0, 1e-12), || format!("{t:?}"));

    let k = Intrinsics::new(1000.0, 112.0, 112.0, 224.0, 224.0).unwrap();
    let t5 = CameraTranslation::new(0.0, 0.0, 5.0);
    let p = project(&[Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)], &k, &t5).unwrap();
    c.check("project optical axis", p[0] == Vector2::new(112.0, 112.0), || format!("{:?}", p[0]));
    c.check("project offset point", close(p[1].x, 312.0, 1e-12) && p[1].y == 112.0, || format!("{:?}", p[1]));
    let behind = project(&[Vector3::new(0.0, 0.0, -5.0)], &k, &t5);
    c.check("project behind camera", matches!(behind, Err(CameraError::BehindCamera { .. })), || format!("{behind:?}"));
    let crop_k = Intrinsics::weak_crop(224.0);
    let p = project_weak(&[Vector3::zeros()], &crop_k, &WeakCameraParams { s: 1.0, tx: 0.0, ty: 0.0 }).unwrap();
    c.check("weak origin at crop center", vclose(&Vector3::new(p[0].x, p[0].y, 0.0), &Vector3::new(112.0, 112.0, 0.0), 1e-12), || format!("{:?}", p[0]));

    // Weak-perspective crop pipeline against full perspective on the image.
    let pts = [Vector3::zeros(), Vector3::new(0.4, -0.5, 0.3), Vector3::new(-0.4, 0.6, -0.3), Vector3::new(0.1, 0.9, 0.25)];
    let f = approx_focal(w, h);
    let k = Intrinsics::centered(f, w, h).unwrap();
    let discrepancy = |tz: f64| {
        let t = CameraTranslation::new(0.3, 0.1, tz);
        let full = project(&pts, &k, &t).unwrap();
        let crop = CropSpec::new(full[0].x, full[0].y, 1.44 * f / tz);
        let weak = weak_from_translation(&t, &crop, f, w, h).unwrap();
        let weak_px = project_weak(&pts, &Intrinsics::weak_crop(crop.res), &weak).unwrap();
        full.iter().zip(&weak_px).map(|(a, b)| (a - crop_to_image(b, &crop)).norm()).fold(0.0, f64::max)
    };
    let near: Vec<f64> = [2.0, 3.0, 5.0, 10.0, 20.0].iter().map(|&tz| discrepancy(tz)).collect();
    c.check("weak discrepancy grows as camera approaches", near.windows(2).all(|p| p[0] > p[1]), || format!("{near:?} px"));
    let far: Vec<f64> = [100.0, 150.0, 400.0].iter().map(|&tz| discrepancy(tz)).collect();
    c.check("weak and full converge far away", far.iter().all(|&d| d < 0.5), || format!("{far:?} px"));
}

fn brute_force_positions(tree: &KinematicTree, pose: &PoseParams) -> Vec<Vector3<f64>> {
    fn global(tree: &KinematicTree, pose: &PoseParams, j: usize) -> Matrix3<f64> {
        let local = *axis_angle_to_matrix(&pose.joint(j)).matrix();
        match tree.parent(j) {
            Some(p) => global(tree, pose, p) * local,
            None => local,
        }
    }
    fn position(tree: &KinematicTree, pose: &PoseParams, j: usize) -> Vector3<f64> {
        match tree.parent(j) {
            Some(p) => position(tree, pose, p) + global(tree, pose, p) * tree.offset(j),
            None => Vector3::zeros(),
        }
    }
    (0..NUM_JOINTS).map(|j| position(tree, pose, j)).collect()
}

fn body(c: &mut Checks) {
    let (tree, mapping) = fixtures();
    let rest = forward_kinematics(&tree, &PoseParams::zeros());
    let cumulative = brute_force_positions(&tree, &PoseParams::zeros());
    let offsets_ok = (0..NUM_JOINTS).all(|j| {
        let mut sum = Vector3::zeros();
        let mut k = j;
        while let Some(p) = tree.parent(k) {
            sum += tree.offset(k);
            k = p;
        }
        vclose(&rest.joints3d[j], &sum, 1e-12) && vclose(&cumulative[j], &sum, 1e-12)
    });
    c.check("rest pose is cumulative offsets", offsets_ok, || "rest positions differ".into());
    let identity_parts = rest.parts.0.iter().all(|r| mclose(r.matrix(), &Matrix3::identity(), 1e-12));
    c.check("rest pose parts are identity", identity_parts, || "non-identity part".into());

    let mut turned = PoseParams::zeros();
    turned.set_joint(0, AxisAngle::new(0.0, 0.0, FRAC_PI_2));
    let rz = RotationMatrix::rot_z(FRAC_PI_2);
    let out = forward_kinematics(&tree, &turned);
    let ok = out.joints3d.iter().zip(&rest.joints3d).all(|(a, b)| vclose(a, &rz.rotate(b), 1e-12));
    c.check("global orientation rotates rest pose", ok, || "positions differ".into());

    let mut rng = rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let pose = random_pose(&mut rng, 0.5);
        let fk = forward_kinematics(&tree, &pose);
        for (a, b) in fk.joints3d.iter().zip(brute_force_positions(&tree, &pose)) {
            worst = worst.max((a - b).norm());
        }
    }
    c.check("forward kinematics matches brute force", worst < 1e-12, || format!("worst {worst:e} m"));

    let obs = model_to_observation_joints(&rest, &mapping);
    let mid = (rest.joints3d[1] + rest.joints3d[2]) / 2.0;
    c.check("mid hip is hip midpoint", vclose(&obs[8], &mid, 1e-12), || format!("{:?} vs {mid:?}", obs[8]));
    let mut wrists = true;
    let mut hull = true;
    for _ in 0..100 {
        let skel = forward_kinematics(&tree, &random_pose(&mut rng, 0.5));
        let obs = model_to_observation_joints(&skel, &mapping);
        wrists &= obs[4] == skel.joints3d[21] && obs[7] == skel.joints3d[20];
        for o in 0..NUM_OBSERVATION_JOINTS {
            let rows: Vec<_> = mapping.rows().iter().filter(|r| r.0 == o).collect();
            let total: f64 = rows.iter().map(|r| r.2).sum();
            let combo: Vector3<f64> = rows.iter().map(|r| skel.joints3d[r.1] * r.2).sum();
            let (lo, hi) = rows.iter().fold((Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)), |(lo, hi), r| {
                (lo.inf(&skel.joints3d[r.1]), hi.sup(&skel.joints3d[r.1]))
            });
            let inside = (0..3).all(|a| obs[o][a] >= lo[a] - 1e-12 && obs[o][a] <= hi[a] + 1e-12);
            hull &= rows.iter().all(|r| r.2 >= 0.0) && close(total, 1.0, 1e-12) && vclose(&obs[o], &combo, 1e-12) && inside;
        }
    }
    c.check("wrist observations copy model wrists", wrists, || "wrist differs".into());
    c.check("observations in convex hull of sources", hull, || "observation outside its sources".into());
}

fn scene(spec: SyntheticSceneSpec) -> Result<SyntheticScene, String> {
    let (tree, mapping) = fixtures();
    generate_synthetic(&spec, &tree, &mapping).map_err(|e| e.to_string())
}

fn clean_spec(frames: usize, seed: u64) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        frames,
        pose_sigma: 0.0,
        translation_noise: 0.0,
        keypoint_sigma: 0.0,
        confidence_range: [1.0, 1.0],
        seed,
        ..Default::default()
    }
}

fn root_relative_mpjpe(tree: &KinematicTree, a: &PoseParams, b: &PoseParams) -> f64 {
    let (pa, pb) = (forward_kinematics(tree, a), forward_kinematics(tree, b));
    pa.joints3d.iter().zip(&pb.joints3d).map(|(x, y)| (x - y).norm()).sum::<f64>() / NUM_JOINTS as f64
}

fn fitting(c: &mut Checks) -> Result<(), String> {
    let (tree, mapping) = fixtures();
    let cfg = FitConfig::default();

    let k = Intrinsics::centered(2200.0, 1920.0, 1080.0).unwrap();
    let t = CameraTranslation::new(0.2, -0.1, 4.0);
    let mut rng = rng(103);
    let joints = mapping.apply(&forward_kinematics(&tree, &random_pose(&mut rng, 0.3)).joints3d);
    let exact: Vec<Keypoint2D> = project(&joints, &k, &t).unwrap().iter().map(|p| Keypoint2D::new(p.x, p.y, 1.0)).collect();
    let e = reprojection_loss(&joints, &t, &k, &exact, LossKind::Squared).unwrap();
    let zero_grad = e.translation_grad.norm() < 1e-9 && e.joint_grads.iter().all(|g| g.norm() < 1e-9);
    c.check("perfect fit loss and gradient", e.value < 1e-18 && zero_grad, || format!("{}", e.value));
    let mut ignored = exact.clone();
    ignored[3] = Keypoint2D::new(-4000.0, 9000.0, 0.0);
    let e = reprojection_loss(&joints, &t, &k, &ignored, LossKind::Squared).unwrap();
    c.check("zero confidence joint ignored", e.value < 1e-18, || format!("{}", e.value));
    let mut offset = exact.clone();
    offset[7].x += 10.0;
    offset[7].confidence = 0.5;
    let e = reprojection_loss(&joints, &t, &k, &offset, LossKind::Squared).unwrap();
    c.check("weighted offset contribution", close(e.value, 25.0, 1e-9), || format!("{}", e.value));

    let clean = scene(clean_spec(10, 104))?;
    let mut fixed = true;
    let mut unchanged = true;
    let mut trace_end = 0.0f64;
    for (obs, truth) in clean.sequence.frames.iter().zip(&clean.truth) {
        let s1 = fit_camera_and_orientation(obs, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
        let rot = geodesic_distance(&axis_angle_to_matrix(&s1.global_orientation), &axis_angle_to_matrix(&obs.init_pose.global_orientation()));
        let final_loss = s1.loss_trace.last().copied().unwrap_or(s1.initial_loss);
        fixed &= rot < 1e-6 && vclose(&s1.translation.0, &truth.init_translation.0, 1e-6) && final_loss < 1e-10;
        let full = fit_frame(obs, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
        unchanged &= root_relative_mpjpe(&tree, &full.pose, &obs.init_pose) < 1e-6;
        trace_end = trace_end.max(full.loss_trace.last().copied().unwrap_or(f64::INFINITY));
    }
    c.check("stage 1 fixed point", fixed, || "stage 1 moved an exact initialization".into());
    c.check("stage 2 fixed point", unchanged, || "pose moved from an exact initialization".into());
    c.check("perfect frame loss trace", trace_end < 1e-10, || format!("final loss {trace_end:e}"));

    // Exactly 10% of the translation norm, in a random direction.
    let (w, h) = clean.sequence.image_size;
    let focal = clean.intrinsics.focal;
    let mut worst: f64 = 0.0;
    for (obs, truth) in clean.sequence.frames.iter().zip(&clean.truth) {
        let dir = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)).normalize();
        let start = CameraTranslation(truth.translation.0 + dir * 0.1 * truth.translation.0.norm());
        let mut obs = obs.clone();
        obs.init_cam = weak_from_translation(&start, &obs.crop, focal, w, h).map_err(|e| e.to_string())?;
        let s1 = fit_camera_and_orientation(&obs, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((s1.translation.0 - truth.translation.0).norm() / truth.translation.0.norm());
    }
    c.check("translation recovered within 2%", worst < 0.02, || format!("worst relative error {worst:.4}"));

    let noisy = scene(SyntheticSceneSpec {
        frames: 100,
        seed: 105,
        ..Default::default()
    })?;
    let torso_cfg = FitConfig {
        stage1_use_all_joints: false,
        ..cfg.clone()
    };
    let (mut wins, mut err_all, mut err_torso) = (0, 0.0, 0.0);
    for (obs, truth) in noisy.sequence.frames.iter().zip(&noisy.truth) {
        let norm = truth.translation.0.norm();
        let all = fit_camera_and_orientation(obs, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
        let torso = fit_camera_and_orientation(obs, &tree, &mapping, &torso_cfg).map_err(|e| e.to_string())?;
        let (a, b) = ((all.translation.0 - truth.translation.0).norm() / norm, (torso.translation.0 - truth.translation.0).norm() / norm);
        err_all += a / 100.0;
        err_torso += b / 100.0;
        wins += usize::from(a < b);
    }
    c.check("all joints lower mean translation error", err_all < err_torso, || format!("{err_all:.4} vs {err_torso:.4}"));
    c.known_shortfall("all joints beat torso in 80% of trials", wins >= 80, || {
        format!("all joints lower in {wins}/100 frames, mean relative error {err_all:.4} vs {err_torso:.4}")
    });

    let recovery = scene(SyntheticSceneSpec {
        pose_sigma: 0.1,
        ..clean_spec(50, 106)
    })?;
    let out = run_fit(&recovery.sequence, &tree, &mapping, &per_frame_config()).map_err(|e| e.to_string())?;
    let before = initialization_metrics(&tree, &recovery).mpjpe;
    let after = out.final_metrics().ok_or("no metrics")?.mpjpe;
    c.known_shortfall("clean pose recovery halves MPJPE", after <= 0.5 * before, || {
        format!("MPJPE {before:.2} -> {after:.2} mm ({:.1}% reduction)", 100.0 * (1.0 - after / before))
    });

    let limits = JointLimits::default();
    let elbow = 3 * 18 + 1;
    let (_, hi) = limits.bounds(elbow);
    let mut obs = clean.sequence.frames[0].clone();
    obs.init_pose.as_mut_slice()[elbow] = hi + 0.4;
    let fit = fit_frame(&obs, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
    let angle = fit.pose.as_slice()[elbow];
    c.check("hyperextended elbow pulled within limits", angle <= hi + 1e-3, || format!("{angle} > {hi}"));

    let close_suite = scene(SyntheticSceneSpec {
        frames: 50,
        ..close_spec()
    })?;
    let mut mpjpes = Vec::new();
    for mode in [ProjectionMode::Full, ProjectionMode::Weak] {
        let mut run_cfg = per_frame_config();
        run_cfg.fit.projection = mode;
        let out = run_fit(&close_suite.sequence, &tree, &mapping, &run_cfg).map_err(|e| e.to_string())?;
        mpjpes.push(out.final_metrics().ok_or("no metrics")?.clone());
    }
    c.check("full beats weak within 3 m", mpjpes[0].mpjpe < mpjpes[1].mpjpe, || {
        format!("{:.2} vs {:.2} mm", mpjpes[0].mpjpe, mpjpes[1].mpjpe)
    });
    c.check("full beats weak MPJAE within 3 m", mpjpes[0].mpjae < mpjpes[1].mpjae, || {
        format!("{:.2} vs {:.2} deg", mpjpes[0].mpjae, mpjpes[1].mpjae)
    });

    let off_center = scene(off_center_spec())?;
    let table = run_sweep(&off_center.sequence, &tree, &mapping, &per_frame_config(), SweepKind::CameraCenter).map_err(|e| e.to_string())?;
    let image = &table.row("image_center").ok_or("missing row")?.metrics;
    let bbox = &table.row("bbox_center").ok_or("missing row")?.metrics;
    c.check("image center beats bbox center MPJPE", image.mpjpe < bbox.mpjpe, || format!("{:.2} vs {:.2}", image.mpjpe, bbox.mpjpe));
    let all_six = image.mpjpe < bbox.mpjpe
        && image.mpjpe_pa < bbox.mpjpe_pa
        && image.pck > bbox.pck
        && image.auc > bbox.auc
        && image.mpjae < bbox.mpjae
        && image.mpjae_pa < bbox.mpjae_pa;
    c.check("image center wins every metric", all_six, || format!("{image:?} vs {bbox:?}"));
    Ok(())
}

fn run_filter(xs: &[f64], cfg: &OneEuroConfig) -> Vec<f64> {
    let mut state = OneEuroState::default();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| one_euro_step(&mut state, x, i as f64 / cfg.nominal_rate, cfg).unwrap())
        .collect()
}

fn smoothing(c: &mut Checks) -> Result<(), String> {
    let cfg = OneEuroConfig::default();
    let out = run_filter(&[3.5; 50], &cfg);
    c.check("constant input is a fixed point", out.iter().all(|&v| v == 3.5), || format!("{out:?}"));

    let mut rng = rng(107);
    let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.2).sin() * 40.0 + rng.random_range(-5.0..5.0)).collect();
    let fixed = OneEuroConfig { beta: 0.0, ..cfg };
    let out = run_filter(&xs, &fixed);
    let te = 1.0 / cfg.nominal_rate;
    let alpha = 1.0 / (1.0 + 1.0 / (2.0 * PI * cfg.min_cutoff * te));
    let mut ema = vec![xs[0]];
    for &x in &xs[1..] {
        let prev = *ema.last().unwrap();
        ema.push(alpha * x + (1.0 - alpha) * prev);
    }
    let worst = out.iter().zip(&ema).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.check("zero beta is exponential smoothing", worst < 1e-12, || format!("worst {worst:e}"));

    let step: Vec<f64> = (0..90).map(|i| if i < 10 { 0.0 } else { 100.0 }).collect();
    let rise = |cfg: &OneEuroConfig| run_filter(&step, cfg).iter().position(|&v| v >= 90.0);
    let (fast, slow) = (rise(&OneEuroConfig { beta: 1.0, ..cfg }), rise(&fixed));
    c.check("large beta rises sooner", matches!((fast, slow), (Some(a), Some(b)) if a < b), || format!("{fast:?} vs {slow:?}"));

    let (tree, _) = fixtures();
    let skel = forward_kinematics(&tree, &random_pose(&mut rng, 0.3));
    let single = vec![Some(TimedSkeleton {
        timestamp: 0.0,
        joints3d: skel.joints3d.clone(),
        parts: skel.parts,
    })];
    let out = smooth_sequence(&single, &cfg).map_err(|e| e.to_string())?;
    let same = out[0].as_ref().is_some_and(|s| {
        s.joints3d == skel.joints3d && s.parts.0.iter().zip(&skel.parts.0).all(|(a, b)| mclose(a.matrix(), b.matrix(), 1e-12))
    });
    c.check("single frame unchanged", same, || "frame changed".into());

    let noise = Normal::new(0.0, 5e-3).unwrap();
    let jittered: Vec<Option<TimedSkeleton>> = (0..150)
        .map(|i| {
            Some(TimedSkeleton {
                timestamp: i as f64 / 30.0,
                joints3d: skel.joints3d.iter().map(|p| p + Vector3::from_fn(|_, _| noise.sample(&mut rng))).collect(),
                parts: skel.parts,
            })
        })
        .collect();
    let smoothed = smooth_sequence(&jittered, &cfg).map_err(|e| e.to_string())?;
    let truth: Vec<TimedSkeleton> = jittered
        .iter()
        .map(|f| TimedSkeleton {
            joints3d: skel.joints3d.clone(),
            ..f.clone().unwrap()
        })
        .collect();
    let (raw_var, smooth_var) = (temporal_variance(&jittered, &truth), temporal_variance(&smoothed, &truth));
    let reduced = raw_var.iter().zip(&smooth_var).filter(|(r, s)| s < r).count();
    c.check("jitter variance reduced on every joint", reduced == NUM_JOINTS, || format!("{reduced}/{NUM_JOINTS}"));
    let mean = |frames: &[Option<TimedSkeleton>], j: usize| {
        frames.iter().flatten().map(|f| f.joints3d[j]).sum::<Vector3<f64>>() / frames.len() as f64
    };
    let drift = (0..NUM_JOINTS).map(|j| (mean(&smoothed, j) - mean(&jittered, j)).norm()).fold(0.0, f64::max);
    c.check("jitter mean preserved within 1 mm", drift < 1e-3, || format!("{:.3} mm", drift * 1000.0));

    // Lag cost on a noiseless moving track: the predictions carry a fixed
    // per-joint error, and smoothing may only add its lag on top.
    let (truth, _, gt) = jittered_track(&motion_spec(), 0.0, 0.0, 108)?;
    let bias = Normal::new(0.0, 0.03).unwrap();
    let offsets: Vec<Vector3<f64>> = (0..NUM_JOINTS).map(|_| Vector3::from_fn(|_, _| bias.sample(&mut rng))).collect();
    let raw: Vec<Option<TimedSkeleton>> = truth
        .iter()
        .map(|t| {
            Some(TimedSkeleton {
                joints3d: t.joints3d.iter().zip(&offsets).map(|(p, o)| p + o).collect(),
                ..t.clone()
            })
        })
        .collect();
    let smoothed = smooth_sequence(&raw, &cfg).map_err(|e| e.to_string())?;
    let (a, b) = (
        evaluate_predictions(&raw, &gt).map_err(|e| e.to_string())?.mpjpe,
        evaluate_predictions(&smoothed, &gt).map_err(|e| e.to_string())?.mpjpe,
    );
    c.check("lag cost below 10%", b / a < 1.1, || format!("MPJPE {a:.2} -> {b:.2} mm, ratio {:.4}", b / a));
    Ok(())
}

fn exact_pair() -> EvalPair {
    let (tree, _) = fixtures();
    let mut pose = PoseParams::zeros();
    pose.set_joint(18, AxisAngle::new(0.0, -0.7, 0.0));
    pose.set_joint(4, AxisAngle::new(0.5, 0.0, 0.0));
    let s = forward_kinematics(&tree, &pose);
    EvalPair {
        pred_joints: s.joints3d.clone(),
        gt_joints: s.joints3d,
        pred_parts: s.parts,
        gt_parts: s.parts,
    }
}

fn rotate_parts(parts: &PartOrientations, r: &RotationMatrix) -> PartOrientations {
    PartOrientations(parts.0.map(|p| *r * p))
}

fn metrics(c: &mut Checks) {
    let exact = exact_pair();
    c.check("MPJPE identical", mpjpe(&exact) == 0.0, || format!("{}", mpjpe(&exact)));
    let mut shifted = exact.clone();
    shifted.pred_joints.iter_mut().for_each(|p| *p += Vector3::new(0.05, 0.05, 0.05) / 3f64.sqrt());
    c.check("MPJPE root matching", mpjpe(&shifted) < 1e-9, || format!("{}", mpjpe(&shifted)));
    let mut one = exact.clone();
    one.pred_joints[12] += Vector3::new(0.0, 0.03, 0.0);
    c.check("MPJPE one joint", close(mpjpe(&one), 1.25, 1e-9), || format!("{}", mpjpe(&one)));

    let mut rng = rng(109);
    let sim = SimilarityTransform {
        scale: 1.7,
        rotation: random_rotation(&mut rng, PI),
        translation: Vector3::new(0.3, -2.0, 4.0),
    };
    let mut moved = exact.clone();
    moved.pred_joints = apply_similarity(&sim, &exact.gt_joints);
    c.check("MPJPE_PA removes similarity", mpjpe_pa(&moved) < 1e-6, || format!("{}", mpjpe_pa(&moved)));
    c.check("MPJPE_PA identical", mpjpe_pa(&exact) < 1e-9, || format!("{}", mpjpe_pa(&exact)));
    let (tree, _) = fixtures();
    let (a, b) = (forward_kinematics(&tree, &random_pose(&mut rng, 0.3)), forward_kinematics(&tree, &random_pose(&mut rng, 0.3)));
    let pair = EvalPair {
        pred_joints: a.joints3d,
        gt_joints: b.joints3d,
        pred_parts: a.parts,
        gt_parts: b.parts,
    };
    let value = mpjpe_pa(&pair);
    let (best, _) = pa_alignment(&pair);
    let mut sampled_min = f64::INFINITY;
    for _ in 0..10_000 {
        let t = SimilarityTransform {
            scale: best.scale * rng.random_range(0.5..2.0),
            rotation: random_rotation(&mut rng, PI),
            translation: best.translation + Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
        };
        let aligned = apply_similarity(&t, &pair.pred_joints);
        let m = aligned.iter().zip(&pair.gt_joints).map(|(p, g)| (p - g).norm()).sum::<f64>() / NUM_JOINTS as f64 * 1000.0;
        sampled_min = sampled_min.min(m);
    }
    c.check("MPJPE_PA below sampled transforms", value <= sampled_min + 1e-6, || format!("{value} vs {sampled_min}"));

    let single = std::slice::from_ref(&exact);
    c.check("PCK exact", pck(single, PCK_THRESHOLD_MM) == 100.0, || format!("{}", pck(single, PCK_THRESHOLD_MM)));
    let mut far_wrist = exact.clone();
    far_wrist.pred_joints[20] += Vector3::new(0.06, 0.0, 0.0);
    let v = pck(std::slice::from_ref(&far_wrist), PCK_THRESHOLD_MM);
    c.check("PCK one joint out", close(v, 100.0 * 11.0 / 12.0, 1e-9), || format!("{v}"));
    let mut boundary = exact.clone();
    boundary.gt_joints = vec![Vector3::zeros(); NUM_JOINTS];
    boundary.pred_joints = (0..NUM_JOINTS).map(|j| if j == 0 { Vector3::zeros() } else { Vector3::new(0.05, 0.0, 0.0) }).collect();
    let v = pck(std::slice::from_ref(&boundary), PCK_THRESHOLD_MM);
    c.check("PCK strict threshold", v == 0.0, || format!("{v}"));

    let v = auc(single, AUC_MAX_MM, AUC_STEPS).unwrap();
    c.check("AUC exact", close(v, 200.0 / 201.0, 1e-12), || format!("{v}"));
    // 0.125 m is exact in binary; 100 mm itself is not, so it is built from
    // a zero ground truth.
    let mut hundred = boundary.clone();
    hundred.pred_joints = (0..NUM_JOINTS).map(|j| if j == 0 { Vector3::zeros() } else { Vector3::new(0.0, 0.0, 0.1) }).collect();
    let v = auc(std::slice::from_ref(&hundred), AUC_MAX_MM, AUC_STEPS).unwrap();
    c.check("AUC at 100 mm", close(v, 100.0 / 201.0, 1e-12) && close(v, 0.498, 0.001), || format!("{v}"));
    let mut beyond = exact.clone();
    beyond.pred_joints.iter_mut().skip(1).for_each(|p| p.y += 0.25);
    let v = auc(std::slice::from_ref(&beyond), AUC_MAX_MM, AUC_STEPS).unwrap();
    c.check("AUC beyond range", v == 0.0, || format!("{v}"));

    c.check("MPJAE identical", mpjae(&exact) < 1e-5, || format!("{}", mpjae(&exact)));
    let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
    let ten = axis_angle_to_matrix(&AxisAngle(axis * 10f64.to_radians()));
    let mut off = exact.clone();
    off.pred_parts = PartOrientations(exact.gt_parts.0.map(|g| g * ten));
    c.check("MPJAE fixed axis", close(mpjae(&off), 10.0, 1e-9), || format!("{}", mpjae(&off)));
    let mut ninety = exact.clone();
    ninety.pred_parts.0[3] = exact.gt_parts.0[3] * RotationMatrix::rot_x(FRAC_PI_2);
    c.check("MPJAE one part", close(mpjae(&ninety), 10.0, 1e-9), || format!("{}", mpjae(&ninety)));

    let r = random_rotation(&mut rng, 3.0);
    let mut turned = pair.clone();
    turned.pred_joints = pair.gt_joints.iter().map(|p| r.rotate(p)).collect();
    turned.pred_parts = rotate_parts(&pair.gt_parts, &r);
    c.check("MPJAE_PA global rotation", mpjae_pa(&turned) < 1e-5, || format!("{}", mpjae_pa(&turned)));
    c.check("MPJAE_PA identical", mpjae_pa(&exact) < 1e-5, || format!("{}", mpjae_pa(&exact)));
    for p in turned.pred_parts.0.iter_mut() {
        let axis = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)).normalize();
        *p = *p * axis_angle_to_matrix(&AxisAngle(axis * 5f64.to_radians()));
    }
    c.check("MPJAE_PA part perturbation", close(mpjae_pa(&turned), 5.0, 0.1), || format!("{}", mpjae_pa(&turned)));
}

fn write_document(path: &std::path::Path, people: Vec<Vec<f64>>) -> Result<(), String> {
    let doc = OpenPoseDocument {
        version: 1.3,
        people: people
            .into_iter()
            .map(|pose_keypoints_2d| OpenPosePerson {
                person_id: vec![-1],
                pose_keypoints_2d,
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string(&doc).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn pipeline(c: &mut Checks) -> Result<(), String> {
    let (tree, mapping) = fixtures();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let person = |conf: f64, x0: f64| -> Vec<f64> { (0..25).flat_map(|i| [x0 + i as f64, 100.0 + 2.0 * i as f64, conf]).collect() };

    let one = dir.path().join("one.json");
    write_document(&one, vec![person(0.9, 10.0)])?;
    let frames = load_keypoints(&one, TrackingPolicy::HighestConfidence).map_err(|e| e.to_string())?;
    let kps = frames[0].clone().unwrap_or_default();
    c.check("single person document", kps.len() == 25 && kps[3] == Keypoint2D::new(13.0, 106.0, 0.9), || format!("{kps:?}"));

    let zero = dir.path().join("zero.json");
    write_document(&zero, vec![person(0.0, 10.0)])?;
    let kps = load_keypoints(&zero, TrackingPolicy::HighestConfidence).map_err(|e| e.to_string())?[0].clone().unwrap_or_default();
    let clean = scene(clean_spec(1, 110))?;
    let mut obs = clean.sequence.frames[0].clone();
    obs.keypoints = kps.clone();
    let unfittable = matches!(fit_frame(&obs, &tree, &mapping, &FitConfig::default()), Err(FitError::UndefinedLoss));
    c.check("zero confidences are unfittable", kps.len() == 25 && kps.iter().all(|k| k.confidence == 0.0) && unfittable, || format!("{kps:?}"));

    let two = dir.path().join("two.json");
    write_document(&two, vec![person(0.4, 10.0), person(0.8, 500.0)])?;
    let kps = load_keypoints(&two, TrackingPolicy::HighestConfidence).map_err(|e| e.to_string())?[0].clone().unwrap_or_default();
    c.check("most confident person selected", kps.first().is_some_and(|k| k.x == 500.0), || format!("{:?}", kps.first()));

    let image = (1920.0, 1080.0);
    let spread = [Keypoint2D::new(100.0, 200.0, 1.0), Keypoint2D::new(300.0, 500.0, 1.0), Keypoint2D::new(150.0, 300.0, 0.0)];
    let crop = derive_crop(&spread, image).map_err(|e| e.to_string())?;
    c.check("crop from keypoint span", close(crop.size, 360.0, 1e-9) && close(crop.cx, 200.0, 1e-9) && close(crop.cy, 350.0, 1e-9), || format!("{crop:?}"));
    let crop = derive_crop(&[Keypoint2D::new(700.0, 500.0, 0.6)], image).map_err(|e| e.to_string())?;
    c.check("crop floor", crop.size == 64.0, || format!("{crop:?}"));
    let corner = [Keypoint2D::new(10.0, 10.0, 1.0), Keypoint2D::new(110.0, 200.0, 1.0)];
    let crop = derive_crop(&corner, image).map_err(|e| e.to_string())?;
    let half = crop.size / 2.0;
    let inside = crop.cx - half >= 0.0 && crop.cy - half >= 0.0 && crop.cx + half <= image.0 && crop.cy + half <= image.1;
    c.check("crop clamped at edge", inside && close(crop.size, 228.0, 1e-9) && close(crop.cx, 114.0, 1e-9) && close(crop.cy, 114.0, 1e-9), || format!("{crop:?}"));

    let clean = scene(clean_spec(10, 111))?;
    let (w, h) = clean.sequence.image_size;
    let mut round_trip: f64 = 0.0;
    let mut final_loss: f64 = 0.0;
    for (obs, truth) in clean.sequence.frames.iter().zip(&clean.truth) {
        let decoded = full_translation(&obs.init_cam, &obs.crop, clean.intrinsics.focal, w, h).map_err(|e| e.to_string())?;
        round_trip = round_trip.max((decoded.0 - truth.translation.0).norm());
        let fit = fit_frame(obs, &tree, &mapping, &FitConfig::default()).map_err(|e| e.to_string())?;
        final_loss = final_loss.max(fit.final_loss);
    }
    c.check("synthetic zero noise fits exactly", final_loss < 1e-10, || format!("{final_loss:e}"));
    c.check("synthetic weak encoding round trip", round_trip <= 1e-9, || format!("{round_trip:e} m"));

    let near = scene(SyntheticSceneSpec {
        distance_range: [2.0, 3.0],
        ..clean_spec(10, 112)
    })?;
    let k = near.intrinsics;
    let (mut full_res, mut weak_res) = (0.0f64, f64::INFINITY);
    for (obs, truth) in near.sequence.frames.iter().zip(&near.truth) {
        let observed = mapping.apply(&forward_kinematics(&tree, &truth.pose).joints3d);
        let residual = |k: &Intrinsics, t: &CameraTranslation| -> f64 {
            observed.iter().zip(&obs.keypoints).map(|(p, kp)| (project_point(p, k, t) - kp.position()).norm_squared()).sum()
        };
        full_res = full_res.max(residual(&k, &truth.translation));
        let kw = weak_equivalent_intrinsics(&obs.crop, k.width, k.height);
        let tz = tz_from_scale(kw.focal, obs.crop.resize_factor(), obs.init_cam.s, obs.crop.res).map_err(|e| e.to_string())?;
        weak_res = weak_res.min(residual(&kw, &CameraTranslation::new(obs.init_cam.tx, obs.init_cam.ty, tz)));
    }
    c.check("weak residual positive at truth within 3 m", weak_res > 0.0 && full_res < 1e-12, || format!("full {full_res:e}, weak {weak_res:e} px²"));

    let suite = scene(SyntheticSceneSpec::default())?;
    let out = run_fit(&suite.sequence, &tree, &mapping, &per_frame_config()).map_err(|e| e.to_string())?;
    let report = out.final_metrics().ok_or("no metrics")?;
    let six = report.summary().iter().all(|(_, v)| v.is_finite()) && report.per_frame.len() == 50;
    c.check("suite report has six metrics", six, || format!("{:?}", report.summary()));

    let mut jittered = motion_spec();
    jittered.pose_sigma = 0.1;
    jittered.keypoint_sigma = 2.0;
    let moving = scene(jittered)?;
    let mut cfg = per_frame_config();
    let off = run_fit(&moving.sequence, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
    cfg.smoothing_enabled = true;
    let on = run_fit(&moving.sequence, &tree, &mapping, &cfg).map_err(|e| e.to_string())?;
    let (off, on) = (off.final_metrics().ok_or("no metrics")?, on.final_metrics().ok_or("no metrics")?);
    c.check("smoothing improves fitted sequence", on.improves_or_ties(off, 0.0), || format!("{:?} vs {:?}", on.summary(), off.summary()));

    let focal_suite = scene(focal_spec())?;
    let table = run_sweep(&focal_suite.sequence, &tree, &mapping, &per_frame_config(), SweepKind::Focal).map_err(|e| e.to_string())?;
    let values: Vec<f64> = table.rows.iter().map(|r| r.metrics.mpjpe).collect();
    let argmin = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let u_shape = values[..=argmin].windows(2).all(|p| p[1] <= p[0]) && values[argmin..].windows(2).all(|p| p[1] >= p[0]);
    let in_band = ["0.75x", "1x", "1.5x"].contains(&table.rows[argmin].label.as_str());
    c.check("focal sweep is U-shaped around 1x", u_shape && in_band, || {
        table.rows.iter().map(|r| format!("{} {:.1}", r.label, r.metrics.mpjpe)).collect::<Vec<_>>().join(", ")
    });

    match crate::scenarios::iteration_sweep() {
        Ok(_) => c.check("iteration sweep non-increasing", true, String::new),
        Err(Failure::Shortfall(d)) => c.known_shortfall("iteration sweep non-increasing", false, || d),
        Err(Failure::Regression(d)) => c.check("iteration sweep non-increasing", false, || d),
    }

    let empty = Report::empty("empty", &RunConfig::default());
    let empty_dir = dir.path().join("empty");
    empty.save(&empty_dir).map_err(|e| e.to_string())?;
    let back = Report::load(&empty_dir.join("report.json")).map_err(|e| e.to_string())?;
    c.check("empty report is valid", back == empty && back.frames.is_empty(), || format!("{back:?}"));
    let full = Report::from_run("suite", &per_frame_config(), &out);
    let metrics = full.metrics.as_ref().ok_or("no metrics")?;
    c.check("aggregate equals per-frame recomputation", MetricsReport::from_frames(metrics.per_frame.clone()) == *metrics, || "aggregate differs".into());
    let full_dir = dir.path().join("full");
    full.save(&full_dir).map_err(|e| e.to_string())?;
    let back = Report::load(&full_dir.join("report.json")).map_err(|e| e.to_string())?;
    c.check("report round trips exactly", back == full, || "loaded report differs".into());
    Ok(())
}
