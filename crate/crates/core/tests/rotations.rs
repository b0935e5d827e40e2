use std::f64::consts::PI;

use motion_prior::rot3::{
    axis_angle_to_rotmat, rotation_angle, rotmat_to_axis_angle, rotmat_to_sixd, sixd_to_rotmat, AxisAngle,
    RotationSixD,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vector3<f64>> {
    vec3().prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

fn sixd() -> impl Strategy<Value = RotationSixD> {
    (vec3(), vec3()).prop_filter("well conditioned", |(a, b)| {
        a.norm() > 1e-3 && b.norm() > 1e-3 && a.cross(b).norm() > 1e-3 * a.norm() * b.norm()
    })
    .prop_map(|(a, b)| RotationSixD::new(a, b))
}

/// Rotation from an explicit quaternion, independent of Rodrigues.
fn quat_rotmat(axis: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    let (s, w) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    let (x, y, z) = (axis.x * s, axis.y * s, axis.z * s);
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn sixd_output_is_a_rotation(x in sixd()) {
        let r = sixd_to_rotmat(&x).unwrap();
        prop_assert!(r.orthonormality_error() < 1e-9);
        prop_assert!((r.det() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sixd_roundtrip(x in sixd()) {
        let r = sixd_to_rotmat(&x).unwrap();
        let again = sixd_to_rotmat(&rotmat_to_sixd(&r)).unwrap();
        prop_assert!((r.0 - again.0).abs().max() < 1e-8);
    }

    #[test]
    fn sixd_ignores_positive_scaling(x in sixd(), k0 in 0.1..10.0f64, k1 in 0.1..10.0f64) {
        let r = sixd_to_rotmat(&x).unwrap();
        let scaled = sixd_to_rotmat(&RotationSixD::new(x.a0 * k0, x.a1 * k1)).unwrap();
        prop_assert!((r.0 - scaled.0).abs().max() < 1e-12);
    }

    #[test]
    fn rodrigues_matches_quaternion(axis in unit(), theta in 0.0..PI) {
        let r = axis_angle_to_rotmat(&AxisAngle(axis * theta));
        prop_assert!((r.0 - quat_rotmat(&axis, theta)).abs().max() < 1e-12);
    }

    #[test]
    fn axis_angle_roundtrip(axis in unit(), theta in 0.0..PI) {
        let r = axis_angle_to_rotmat(&AxisAngle(axis * theta));
        let back = axis_angle_to_rotmat(&rotmat_to_axis_angle(&r));
        prop_assert!((r.0 - back.0).abs().max() < 1e-8);
    }

    #[test]
    fn roundtrip_near_zero(axis in unit(), theta in 0.0..1e-4f64) {
        let v = axis * theta;
        let r = axis_angle_to_rotmat(&AxisAngle(v));
        let back = rotmat_to_axis_angle(&r);
        prop_assert!((back.0 - v).abs().max() < 1e-8);
        prop_assert!((axis_angle_to_rotmat(&back).0 - r.0).abs().max() < 1e-8);
    }

    #[test]
    fn roundtrip_near_pi(axis in unit(), delta in 0.0..1e-4f64) {
        let theta = PI - delta;
        let r = axis_angle_to_rotmat(&AxisAngle(axis * theta));
        let back = rotmat_to_axis_angle(&r);
        prop_assert!((axis_angle_to_rotmat(&back).0 - r.0).abs().max() < 1e-8);
        prop_assert!((back.angle() - theta).abs() < 1e-8);
    }

    #[test]
    fn angle_matches_trace(axis in unit(), theta in 1e-3..PI - 1e-3) {
        let r = axis_angle_to_rotmat(&AxisAngle(axis * theta));
        prop_assert!((rotation_angle(&r) - theta).abs() < 1e-9);
    }

    #[test]
    fn sixd_is_continuous(x in sixd(), d in vec3()) {
        // a small input perturbation moves the output by a comparable amount
        let eps = 1e-7;
        let r = sixd_to_rotmat(&x).unwrap();
        let y = RotationSixD::new(x.a0 + d * eps, x.a1);
        let q = sixd_to_rotmat(&y).unwrap();
        let bound = 10.0 * eps * d.norm() / (x.a0.norm().min(x.a1.norm()) * x.a0.normalize().cross(&x.a1.normalize()).norm());
        prop_assert!((r.0 - q.0).abs().max() <= bound + 1e-14);
    }
}

#[test]
fn degenerate_sixd_is_rejected() {
    let a = Vector3::new(1.0, 2.0, 3.0);
    assert!(sixd_to_rotmat(&RotationSixD::new(Vector3::zeros(), a)).is_err());
    assert!(sixd_to_rotmat(&RotationSixD::new(a, a * 2.0)).is_err());
}

#[test]
fn exactly_pi_about_each_axis() {
    for axis in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 0.0).normalize()] {
        let r = axis_angle_to_rotmat(&AxisAngle(axis * PI));
        let back = rotmat_to_axis_angle(&r);
        assert!((back.angle() - PI).abs() < 1e-12);
        assert!((back.0.normalize().cross(&axis)).norm() < 1e-12);
    }
}
