use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semloc::geometry::{rotation_error_deg, Pose, Vec2, Vec3};
use semloc::semantics::{label_points, ClassRegistry};
use semloc::simworld::{
    generate_trajectory, generate_world, perturb_world, read_frames_dir, synthesize_frame,
    write_dataset, NoiseModel, Perturbation, SceneConfig, SimError, TrajectoryKind,
    TrajectoryParams, World,
};

fn small_config() -> SceneConfig {
    SceneConfig {
        objects_per_class: 2,
        landmarks_per_object: 20,
        background_landmarks: 200,
        clutter_objects: 1,
        clutter_landmarks: 60,
        clutter_size: [0.5, 0.5],
        ..SceneConfig::default()
    }
}

fn world() -> World {
    generate_world(&small_config(), 7).unwrap()
}

/// Pose looking at the centre of the left wall from the middle of the module.
fn looking_left() -> Pose {
    let p = TrajectoryParams {
        center: Vec3::new(3.0, 0.0, 0.0),
        heading_deg: [90.0, 0.0, 0.0],
        steps: 1,
        ..TrajectoryParams::default()
    };
    generate_trajectory(TrajectoryKind::Yaw, &p)[0].1
}

#[test]
fn landmark_counts() {
    let w = world();
    assert_eq!(w.labeled_landmark_count(), 8 * 2 * 20);
    assert_eq!(w.landmarks.len(), 320 + 60 + 200);
    for l in &w.landmarks {
        if l.class.is_some() {
            let owner = w.object(l.object.unwrap()).unwrap();
            assert_eq!(owner.class, l.class);
            assert_eq!(owner.landmarks.iter().filter(|&&id| id == l.id).count(), 1);
        }
    }
}

#[test]
fn objects_inside_their_walls_and_landmarks_inside_footprints() {
    let w = world();
    for o in &w.objects {
        let (c, u, v, _, half) = o.wall.frame(w.dims);
        for corner in o.corners(w.dims) {
            let d = corner - c;
            assert!(d.dot(&u).abs() <= half[0] + 1e-9 && d.dot(&v).abs() <= half[1] + 1e-9);
        }
        let (ou, ov, _) = o.axes(w.dims);
        for &id in &o.landmarks {
            let d = w.landmarks[id as usize].position - o.center;
            assert!(d.dot(&ou).abs() <= o.extent[0] / 2.0 + 1e-9);
            assert!(d.dot(&ov).abs() <= o.extent[1] / 2.0 + 1e-9);
        }
    }
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(world(), world());
    assert_ne!(world(), generate_world(&small_config(), 8).unwrap());
}

#[test]
fn infeasible_descriptor_spacing_is_an_error() {
    let cfg = SceneConfig {
        descriptor_dim: 2,
        descriptor_min_distance: 1.9,
        ..small_config()
    };
    assert!(matches!(
        generate_world(&cfg, 1),
        Err(SimError::Infeasible { .. })
    ));
}

#[test]
fn descriptor_nearest_neighbour_confusions_below_one_percent() {
    // A noisy observation is "confused" when some other landmark is nearer
    // to it than its own source.
    let w = world();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frame = synthesize_frame(&w, &looking_left(), &small_config().camera, &NoiseModel::default(), &mut rng);
    assert!(frame.len() > 50);
    let mut confused = 0;
    for (d, &id) in frame.descriptors.iter().zip(&frame.landmark_ids) {
        let own = d.distance_squared(&w.landmarks[id as usize].descriptor);
        if w.landmarks.iter().any(|l| l.id != id && l.descriptor.distance_squared(d) <= own) {
            confused += 1;
        }
    }
    assert!((confused as f64) < 0.01 * frame.len() as f64, "{confused}/{}", frame.len());

    // and the raw descriptors respect the spacing
    let mut min = f64::INFINITY;
    for (i, a) in w.landmarks.iter().enumerate() {
        for b in &w.landmarks[i + 1..] {
            min = min.min(a.descriptor.distance(&b.descriptor));
        }
    }
    assert!(min >= 0.8);
}

fn flag(w: &World) -> u64 {
    w.objects.iter().find(|o| o.class.is_none()).unwrap().id
}

#[test]
fn rotate_flag_keeps_centroid() {
    let w = world();
    let id = flag(&w);
    let p = perturb_world(&w, &Perturbation::rotate(id, 180.0)).unwrap();
    let ids = &w.object(id).unwrap().landmarks;
    let centroid = |w: &World| {
        ids.iter().map(|&i| w.landmarks[i as usize].position).sum::<Vec3>() / ids.len() as f64
    };
    let (c0, c1) = (centroid(&w), centroid(&p));
    assert!((c0 - c1).norm() < 1e-12, "{}", (c0 - c1).norm());
    // each landmark maps to its point reflection through the centroid in-plane
    for &i in ids {
        let a = w.landmarks[i as usize].position - c0;
        let b = p.landmarks[i as usize].position - c0;
        assert!((a + b).norm() < 1e-12);
        assert_eq!(w.landmarks[i as usize].descriptor, p.landmarks[i as usize].descriptor);
    }
    for (a, b) in w.landmarks.iter().zip(&p.landmarks) {
        if a.object != Some(id) {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn remove_and_translate() {
    let w = world();
    let movable = w
        .objects
        .iter()
        .find(|o| o.movable && o.class.is_some())
        .unwrap();
    let removed = perturb_world(&w, &Perturbation::remove(movable.id)).unwrap();
    assert_eq!(
        removed.labeled_landmark_count(),
        w.labeled_landmark_count() - movable.landmarks.len()
    );
    assert!(removed.object(movable.id).is_none());

    let moved = perturb_world(&w, &Perturbation::translate(movable.id, 0.3)).unwrap();
    for (a, b) in w.landmarks.iter().zip(&moved.landmarks) {
        if a.object == Some(movable.id) {
            assert!(((a.position - b.position).norm() - 0.3).abs() < 1e-12);
        } else {
            assert_eq!(a, b);
        }
    }
    assert_eq!(w, world(), "input unmodified");
}

#[test]
fn swap_exchanges_places() {
    let w = world();
    let mov: Vec<u64> = w.objects.iter().filter(|o| o.movable).map(|o| o.id).take(2).collect();
    let s = perturb_world(&w, &Perturbation::swap(mov[0], mov[1])).unwrap();
    let (a0, b0) = (w.object(mov[0]).unwrap(), w.object(mov[1]).unwrap());
    let (a1, b1) = (s.object(mov[0]).unwrap(), s.object(mov[1]).unwrap());
    assert!((a1.center - b0.center).norm() < 1e-12 && (b1.center - a0.center).norm() < 1e-12);
    assert_eq!((a1.wall, b1.wall), (b0.wall, a0.wall));
}

#[test]
fn immovable_and_unknown_targets_rejected() {
    let w = world();
    let fixed = w.objects.iter().find(|o| !o.movable).unwrap().id;
    assert!(matches!(
        perturb_world(&w, &Perturbation::rotate(fixed, 90.0)),
        Err(SimError::Immovable(_))
    ));
    assert!(matches!(
        perturb_world(&w, &Perturbation::remove(9999)),
        Err(SimError::UnknownObject(9999))
    ));
}

#[test]
fn yaw_sweep_steps_ten_degrees_about_body_z() {
    let params = TrajectoryParams { steps: 36, sweep_deg: 360.0, ..Default::default() };
    let traj = generate_trajectory(TrajectoryKind::Yaw, &params);
    assert_eq!(traj.len(), 36);
    for w in traj.windows(2) {
        let rel = Pose::relative_to(&w[0].1, &w[1].1);
        let angle = rel.rotation.angle().to_degrees();
        assert!((angle - 10.0).abs() < 1e-9, "{angle}");
        assert!(rel.translation.norm() < 1e-12);
        // camera −y is body z: rotation axis along the camera y axis
        let axis = rel.rotation.axis().unwrap();
        assert!((axis.y.abs() - 1.0).abs() < 1e-9);
        assert!((w[1].0 - w[0].0 - params.dt).abs() < 1e-12);
    }
}

#[test]
fn forward_translation_steps() {
    let params = TrajectoryParams { steps: 20, distance: 2.0, ..Default::default() };
    let traj = generate_trajectory(TrajectoryKind::TranslateForward, &params);
    assert_eq!(traj.len(), 20);
    for w in traj.windows(2) {
        let rel = Pose::relative_to(&w[0].1, &w[1].1);
        assert!(rel.rotation.angle() < 1e-12);
        assert!(((w[1].1.center() - w[0].1.center()).norm() - 0.1).abs() < 1e-12);
        // forward = +x for zero heading
        assert!((w[1].1.center().x - w[0].1.center().x - 0.1).abs() < 1e-12);
    }
}

#[test]
fn chained_relative_poses_reproduce_the_last_pose() {
    let params = TrajectoryParams {
        steps: 25,
        sweep_deg: 170.0,
        distance: 1.3,
        heading_deg: [30.0, -10.0, 5.0],
        ..Default::default()
    };
    for kind in [
        TrajectoryKind::Roll,
        TrajectoryKind::Pitch,
        TrajectoryKind::Yaw,
        TrajectoryKind::TranslateForward,
        TrajectoryKind::TranslateLateral,
    ] {
        let traj = generate_trajectory(kind, &params);
        let mut acc = traj[0].1;
        for w in traj.windows(2) {
            acc = Pose::relative_to(&w[0].1, &w[1].1).compose(&acc);
        }
        let last = traj.last().unwrap().1;
        assert!((acc.translation - last.translation).norm() < 1e-9, "{kind:?}");
        assert!(
            rotation_error_deg(&acc.rotation_matrix(), &last.rotation_matrix()).to_radians() < 1e-9,
            "{kind:?}"
        );
        for (_, p) in &traj {
            let r = p.rotation_matrix();
            assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
        }
    }
}

#[test]
fn noiseless_frame_is_exact_projection() {
    let w = world();
    let k = small_config().camera;
    let pose = looking_left();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = synthesize_frame(&w, &pose, &k, &NoiseModel::noiseless(), &mut rng);
    assert!(!f.is_empty());
    for (kp, &id) in f.keypoints.iter().zip(&f.landmark_ids) {
        let l = &w.landmarks[id as usize];
        let pc = pose.transform(&l.position);
        assert!(pc.z > 0.0);
        let px = Vec2::new(k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy);
        assert_eq!((kp.x, kp.y), (px.x, px.y));
        assert_eq!(f.descriptors[f.landmark_ids.iter().position(|&x| x == id).unwrap()], l.descriptor);
    }
    // every landmark in front and in bounds is present
    let expected = w
        .landmarks
        .iter()
        .filter(|l| {
            let pc = pose.transform(&l.position);
            pc.z >= 0.05 && {
                let (x, y) = (k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy);
                x >= 0.0 && y >= 0.0 && x <= (k.width - 1) as f64 && y <= (k.height - 1) as f64
            }
        })
        .count();
    assert_eq!(f.len(), expected);
}

#[test]
fn camera_facing_away_sees_nothing() {
    let w = world();
    // outside the module, looking away from it
    let p = TrajectoryParams {
        center: Vec3::new(-1.0, 0.0, 0.0),
        heading_deg: [180.0, 0.0, 0.0],
        steps: 1,
        ..Default::default()
    };
    let pose = generate_trajectory(TrajectoryKind::Yaw, &p)[0].1;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = synthesize_frame(&w, &pose, &small_config().camera, &NoiseModel::default(), &mut rng);
    assert!(f.is_empty() && f.boxes.is_empty());
}

#[test]
fn pixel_noise_half_normal_mean() {
    let w = world();
    let k = small_config().camera;
    let noise = NoiseModel { pixel_sigma: 0.5, descriptor_sigma: 0.0, box_margin: 2.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut samples = Vec::new();
    let mut step = 0;
    while samples.len() < 10_000 {
        let pose = generate_trajectory(
            TrajectoryKind::Yaw,
            &TrajectoryParams { steps: 12, sweep_deg: 360.0, ..Default::default() },
        )[step % 12]
            .1;
        step += 1;
        let f = synthesize_frame(&w, &pose, &k, &noise, &mut rng);
        for (kp, &id) in f.keypoints.iter().zip(&f.landmark_ids) {
            let pc = pose.transform(&w.landmarks[id as usize].position);
            samples.push((kp.x - (k.fx * pc.x / pc.z + k.cx)).abs());
            samples.push((kp.y - (k.fy * pc.y / pc.z + k.cy)).abs());
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let expected = 0.5 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");
}

fn box_coverage(noise: NoiseModel) -> (usize, usize) {
    let w = world();
    let k = small_config().camera;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut inside, mut total) = (0, 0);
    let traj = generate_trajectory(
        TrajectoryKind::Yaw,
        &TrajectoryParams { steps: 24, sweep_deg: 360.0, ..Default::default() },
    );
    for (_, pose) in &traj {
        let f = synthesize_frame(&w, pose, &k, &noise, &mut rng);
        let labels = label_points(f.keypoints.iter().map(|kp| (kp.x, kp.y)), &f.boxes);
        for (label, &id) in labels.iter().zip(&f.landmark_ids) {
            let lm = &w.landmarks[id as usize];
            if lm.class.is_some() {
                total += 1;
                if *label == lm.class {
                    inside += 1;
                }
            }
        }
    }
    (inside, total)
}

#[test]
fn boxes_contain_their_objects_keypoints() {
    let (inside, total) = box_coverage(NoiseModel::noiseless());
    assert!(total > 500);
    assert_eq!(inside, total);
    let (inside, total) = box_coverage(NoiseModel::default());
    assert!(inside as f64 >= 0.99 * total as f64, "{inside}/{total}");
}

#[test]
fn keypoints_back_project_near_their_landmarks() {
    let w = world();
    let k = small_config().camera;
    let noise = NoiseModel::default();
    let pose = looking_left();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = synthesize_frame(&w, &pose, &k, &noise, &mut rng);
    let mut ok = 0;
    for (kp, &id) in f.keypoints.iter().zip(&f.landmark_ids) {
        let lm = w.landmarks[id as usize].position;
        let depth = pose.transform(&lm).z;
        let ray = Vector3::new((kp.x - k.cx) / k.fx, (kp.y - k.cy) / k.fy, 1.0) * depth;
        let back = pose.inverse().transform(&ray);
        // 3σ in pixels converted to meters at that depth
        if (back - lm).norm() <= 3.0 * noise.pixel_sigma * depth / k.fx * 2f64.sqrt() {
            ok += 1;
        }
    }
    assert!(ok as f64 >= 0.99 * f.len() as f64, "{ok}/{}", f.len());
}

#[test]
fn frames_are_deterministic_per_rng_seed() {
    let w = world();
    let k = small_config().camera;
    let make = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        synthesize_frame(&w, &looking_left(), &k, &NoiseModel::default(), &mut rng)
    };
    assert_eq!(make(), make());
}

#[test]
fn dataset_round_trip() {
    let w = world();
    let k = small_config().camera;
    let reg = ClassRegistry::station();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let frames: Vec<_> = generate_trajectory(
        TrajectoryKind::Yaw,
        &TrajectoryParams { steps: 4, ..Default::default() },
    )
    .iter()
    .enumerate()
    .map(|(i, (t, p))| synthesize_frame(&w, p, &k, &NoiseModel::default(), &mut rng).with_id(i as u64, *t))
    .collect();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_dataset(dir.path(), &w, &frames, &reg, &k).unwrap();
    assert!(paths.gt_traj.exists() && paths.world.exists() && paths.intrinsics.exists());
    let loaded = read_frames_dir(&paths.frames, Some(&paths.annotations), &reg, &k).unwrap();
    assert_eq!(loaded.len(), 4);
    for (a, b) in loaded.iter().zip(&frames) {
        assert_eq!(*a, b.to_frame());
    }
    let gt = semloc::trajectory::read_tum(&paths.gt_traj).unwrap();
    assert_eq!(gt.len(), 4);
    let r = Rotation3::from(gt[1].pose.unwrap().rotation);
    assert!(rotation_error_deg(r.matrix(), &frames[1].pose.rotation_matrix()) < 1e-6);
}
