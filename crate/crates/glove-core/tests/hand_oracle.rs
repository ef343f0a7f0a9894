//! Hand-model geometry checked against the rotation-matrix route, plus
//! forward-construction recovery and global-rotation invariance.

mod common;

use std::collections::BTreeMap;

use common::*;
use glove_core::hand::{compute_pose, flexion_angle, flexion_axis, relative_orientation};
use glove_core::quat::{Quaternion, Vec3};
use glove_core::topology::{Finger, Phalanx, SegmentLabel, SensorTopology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn relative_orientation_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for i in 0..500 {
        let parent = random_unit_quat(&mut rng);
        let child = random_unit_quat(&mut rng);
        let rel = relative_orientation(parent, child);
        // R_parent^T * R_child through matrices.
        let oracle =
            mat_to_quat(&mat_mul(&mat_transpose(&quat_to_mat(parent)), &quat_to_mat(child)));
        assert_quat_close(rel, oracle, 1e-9, &format!("pair {i}"));
    }
}

#[test]
fn flexion_survives_long_axis_twist() {
    // Compose flexion with a twist about the long axis through the matrix
    // route and check the decomposition discards exactly the twist.
    let mut rng = ChaCha8Rng::seed_from_u64(0xF00D);
    let axis = Vec3::new(1.0, 0.0, 0.0);
    let long = Vec3::new(0.0, 1.0, 0.0);
    for _ in 0..500 {
        let theta = rng.gen_range(-130.0..130.0);
        let tau = rng.gen_range(-80.0..80.0);
        let flex = Quaternion::from_axis_angle(axis, theta).unwrap();
        let twist = Quaternion::from_axis_angle(long, tau).unwrap();
        let rel = mat_to_quat(&mat_mul(&quat_to_mat(flex), &quat_to_mat(twist)));
        let angle = flexion_angle(rel, axis);
        assert!((angle - theta).abs() < 1e-6, "theta={theta} tau={tau} got {angle}");
    }
}

#[test]
fn forward_constructed_pose_recovers_angles() {
    let topo = SensorTopology::default_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9999);
    for _ in 0..200 {
        // Random hand-back mount anywhere in the world.
        let hand_back = random_unit_quat(&mut rng);
        let mut orientations: BTreeMap<u8, Quaternion> = BTreeMap::new();
        orientations.insert(topo.hand_back_id().unwrap(), hand_back);

        let mut expected: BTreeMap<Finger, (f64, f64)> = BTreeMap::new();
        for finger in Finger::ALL {
            let mcp = rng.gen_range(-25.0..130.0);
            let pip = rng.gen_range(-25.0..130.0);
            let axis = flexion_axis(finger);
            let prox =
                hand_back.multiply(Quaternion::from_axis_angle(axis, mcp).unwrap());
            let inter = prox.multiply(Quaternion::from_axis_angle(axis, pip).unwrap());
            let prox_id =
                topo.sensor_for_segment(SegmentLabel::phalanx(finger, Phalanx::Proximal)).unwrap();
            let inter_id = topo
                .sensor_for_segment(SegmentLabel::phalanx(finger, Phalanx::Intermediate))
                .unwrap();
            orientations.insert(prox_id.id, prox);
            orientations.insert(inter_id.id, inter);
            expected.insert(finger, (mcp, pip));
        }

        let pose = compute_pose(&orientations, &topo).unwrap();
        assert!(pose.missing.is_empty());
        for (finger, (mcp, pip)) in expected {
            let angles = pose.fingers[&finger];
            assert!((angles.mcp_deg - mcp).abs() < 1e-6, "{finger}: mcp {} vs {mcp}", angles.mcp_deg);
            assert!((angles.pip_deg - pip).abs() < 1e-6, "{finger}: pip {} vs {pip}", angles.pip_deg);
        }
    }
}

proptest! {
    /// A common world rotation applied to every segment leaves all joint
    /// angles untouched.
    #[test]
    fn joint_angles_are_world_invariant(seed in any::<u64>()) {
        let topo = SensorTopology::default_topology();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = random_unit_quat(&mut rng);

        let mut orientations: BTreeMap<u8, Quaternion> = BTreeMap::new();
        for s in &topo.sensors {
            orientations.insert(s.id, random_unit_quat(&mut rng));
        }
        let rotated: BTreeMap<u8, Quaternion> =
            orientations.iter().map(|(id, q)| (*id, world.multiply(*q))).collect();

        let base = compute_pose(&orientations, &topo).unwrap();
        let moved = compute_pose(&rotated, &topo).unwrap();
        for (finger, a) in &base.fingers {
            let b = &moved.fingers[finger];
            // Clamped angles pin to the boundary exactly; unclamped ones
            // must agree to fp precision.
            prop_assert!((a.mcp_deg - b.mcp_deg).abs() < 1e-9,
                "{finger}: {} vs {}", a.mcp_deg, b.mcp_deg);
            prop_assert!((a.pip_deg - b.pip_deg).abs() < 1e-9);
            prop_assert_eq!(a.mcp_clamped, b.mcp_clamped);
            prop_assert_eq!(a.pip_clamped, b.pip_clamped);
        }
    }
}
