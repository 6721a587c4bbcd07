//! Property tests of the ray tracer, the angle helpers and the file formats.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;

use echotomo::flow::{reflect, trace, PhasePoint, TraceLimits, TraceStatus};
use echotomo::geometry::{disc_scene, two_ellipse_example, Scene, Vector};
use echotomo::io::{self, SampleRow};
use echotomo::spectrum::{wrap_angle, wrap_diff};

fn scene() -> Scene<2> {
    two_ellipse_example()
}

proptest! {
    #[test]
    fn reflection_is_an_isometric_involution(a in 0.0..TAU, b in 0.0..TAU) {
        let u = Vector::<2>::new(a.cos(), a.sin());
        let n = Vector::<2>::new(b.cos(), b.sin());
        prop_assume!(u.dot(&n).abs() > 1e-3);
        let r = reflect(&u, &n, 1e-7).unwrap();
        prop_assert!((r.norm() - 1.0).abs() < 1e-14);
        prop_assert!((r.dot(&n) + u.dot(&n)).abs() < 1e-14);
        let back = reflect(&r, &n, 1e-7).unwrap();
        prop_assert!((back - u).norm() < 1e-14);
    }

    #[test]
    fn rays_leave_through_s0_with_additive_time(theta in 0.0..TAU, phi in -0.98 * FRAC_PI_2..0.98 * FRAC_PI_2) {
        let scene = scene();
        let t = trace(&scene, PhasePoint::planar_entry(&scene, theta, phi), &TraceLimits::default()).unwrap();
        prop_assume!(t.status == TraceStatus::Exited);
        let exit = t.exit.unwrap();
        prop_assert!((exit.x.norm() - scene.s0.radius).abs() < 1e-9);
        prop_assert!(exit.x.dot(&exit.u) > 0.0);
        let sum: f64 = t.segment_lengths.iter().sum();
        prop_assert!((sum - t.total_time).abs() < 1e-10);
        let pts = t.points();
        for (w, len) in pts.windows(2).zip(&t.segment_lengths) {
            prop_assert!(((w[1] - w[0]).norm() - len).abs() < 1e-10);
            let mid = 0.5 * (w[0] + w[1]);
            prop_assert!(scene.bodies.iter().all(|b| b.value(&mid) > 0.0));
        }
        for r in &t.reflections {
            prop_assert!((r.outgoing.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_ray_retraces_the_path(theta in 0.0..TAU, phi in -1.2..1.2f64) {
        let scene = disc_scene(4.0, &[([-1.8, -0.4], 1.1), ([1.6, 0.9], 0.8)]);
        let limits = TraceLimits::default();
        let fwd = trace(&scene, PhasePoint::planar_entry(&scene, theta, phi), &limits).unwrap();
        prop_assume!(fwd.status == TraceStatus::Exited);
        let back = trace(&scene, fwd.exit.unwrap().reversed(), &limits).unwrap();
        prop_assert_eq!(back.status, TraceStatus::Exited);
        prop_assert!((back.total_time - fwd.total_time).abs() < 1e-9);
        let mut seq = fwd.body_sequence();
        seq.reverse();
        prop_assert_eq!(back.body_sequence(), seq);
        prop_assert!((back.exit.unwrap().x - fwd.entry.x).norm() < 1e-8);
    }

    #[test]
    fn angles_wrap_into_range(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(wrap_diff(w - a).abs() < 1e-12);
        let d = wrap_diff(a);
        prop_assert!(d > -PI && d <= PI);
    }

    #[test]
    fn sample_rows_round_trip(
        x in 0.0..TAU,
        y in 0.0..TAU,
        t in 0.0..100.0f64,
        k in proptest::option::of(0usize..200),
        branch in proptest::option::of(any::<u64>()),
        u in proptest::option::of((-1.0..1.0f64, -1.0..1.0f64)),
    ) {
        let row = SampleRow {
            column: k,
            role: "center".into(),
            x_angle: x,
            y_angle: y,
            t,
            k,
            branch: branch.map(|b| format!("{b:016x}")),
            u1: u.map(|p| p.0),
            u2: u.map(|p| p.1),
            v1: None,
            v2: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        io::write_csv(&path, std::slice::from_ref(&row)).unwrap();
        let back: Vec<SampleRow> = io::read_csv(&path).unwrap();
        prop_assert_eq!(back, vec![row]);
    }
}

#[test]
fn config_hash_is_stable() {
    let a = io::config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]}));
    let b = io::config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]}));
    let c = io::config_hash(&serde_json::json!({"a": 2, "b": [1.5, 2.0]}));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 64);
}
