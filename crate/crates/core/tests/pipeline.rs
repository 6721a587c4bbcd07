//! End-to-end reconstruction of two offset discs from a measured diagonal
//! spectrum, checked against the exact geometry.

use std::sync::OnceLock;

use echotomo::flow::TraceLimits;
use echotomo::geometry::{disc_scene, Scene, Vector};
use echotomo::io;
use echotomo::reconstruct::{
    levels_monotone, reconstruct_all, seed_second_body, segment_echograph, self_consistency,
    trace_z1_arcs, ReconstructionConfig, ReconstructionState,
};
use echotomo::recovery::{convex_hull_recover, HullGrid, LiveChords};
use echotomo::spectrum::echograph;
use echotomo::spectrum::{
    diag_spectrum, AngularGrid, DiagonalDataset, DEFAULT_STENCIL, DEFAULT_SWEEP,
};
use echotomo::validate::{validate_reconstruction, ValidationParams};

const DISCS: [([f64; 2], f64); 2] = [([-1.8, -0.4], 1.1), ([1.6, 0.9], 0.8)];

struct Run {
    scene: Scene<2>,
    data: DiagonalDataset,
    state: ReconstructionState,
}

fn run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let scene = disc_scene(4.0, &DISCS);
        let limits = TraceLimits::default();
        let hull = convex_hull_recover(
            &LiveChords {
                scene: &scene,
                limits,
            },
            &HullGrid::default(),
        )
        .unwrap();
        let line = hull.report.separating_line.expect("separating line");
        let data = diag_spectrum(
            &scene,
            &AngularGrid::new(2048),
            DEFAULT_STENCIL,
            DEFAULT_SWEEP,
            &limits,
        )
        .measured();
        let config = ReconstructionConfig {
            k_max: 5,
            ..ReconstructionConfig::default()
        };
        let state = reconstruct_all(&scene.s0, &data, Some(&line), &config).unwrap();
        Run { scene, data, state }
    })
}

#[test]
fn boundary_lies_on_the_discs() {
    let r = run();
    let rep = validate_reconstruction(&r.scene, &r.state, &ValidationParams::default());
    for b in &rep.bodies {
        assert!(
            b.hausdorff <= 2e-4,
            "body {} Hausdorff {}",
            b.body,
            b.hausdorff
        );
        assert!(b.coverage >= 0.9, "body {} coverage {}", b.body, b.coverage);
        assert!(
            b.z_inf_error <= 1e-3,
            "body {} z_inf error {}",
            b.body,
            b.z_inf_error
        );
    }
    assert_eq!(rep.audit_violations, 0);
    assert_eq!(r.state.audit_violations(), 0);
}

#[test]
fn first_seed_is_the_farthest_point() {
    let r = run();
    // The disc reaching closest to S0.
    let (c, rad) = DISCS
        .iter()
        .map(|(c, r)| (Vector::<2>::new(c[0], c[1]), *r))
        .max_by(|a, b| (a.0.norm() + a.1).total_cmp(&(b.0.norm() + b.1)))
        .unwrap();
    let zk = c + rad * c.normalize();
    let got = Vector::<2>::new(r.state.seeds.z_k[0], r.state.seeds.z_k[1]);
    assert!((got - zk).norm() < 1e-4, "z_K {got:?} vs {zk:?}");
}

#[test]
fn replay_reproduces_times() {
    let r = run();
    let rep = self_consistency(&r.scene.s0, &r.data, &r.state);
    assert!(rep.checked > 0);
    assert!(rep.max_time_error <= 1e-3 * r.scene.s0.radius, "{rep:?}");
    assert!(levels_monotone(&r.state, 1e-6));
}

#[test]
fn stored_dataset_round_trips() {
    let r = run();
    let dir = tempfile::tempdir().unwrap();
    io::write_diagonal(dir.path(), "diag", &r.data).unwrap();
    let back = io::read_diagonal(&r.scene.s0, dir.path(), "diag").unwrap();
    assert_eq!(back, r.data);
    let first = std::fs::read(dir.path().join("diag.csv")).unwrap();
    io::write_diagonal(dir.path(), "diag", &back).unwrap();
    assert_eq!(std::fs::read(dir.path().join("diag.csv")).unwrap(), first);
}

#[test]
fn first_level_alone_is_the_z1_trace() {
    let r = run();
    let config = ReconstructionConfig {
        k_max: 1,
        ..ReconstructionConfig::default()
    };
    let line = &r.state.seeds.separating;
    let state = reconstruct_all(&r.scene.s0, &r.data, Some(line), &config).unwrap();
    let echo = echograph(&r.scene.s0, &r.data);
    let arcs = segment_echograph(&echo, &r.data.grid, r.scene.s0.radius, &config.segmentation);
    let seeds = seed_second_body(&r.scene.s0, &r.data, Some(line)).unwrap();
    let z1 = trace_z1_arcs(&r.scene.s0, &echo, &arcs, &r.data.grid, &seeds).unwrap();
    assert_eq!(state.depth, 1);
    assert_eq!(state.arcs, z1.to_vec());
}
