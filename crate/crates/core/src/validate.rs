//! Checks of a reconstruction against the scene it was measured from. None
//! of this is available to the reconstruction itself.

use serde::{Deserialize, Serialize};

use crate::flow::{first_intersection, Intersection};
use crate::geometry::{Scene, Vector};
use crate::reconstruct::ReconstructionState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationParams {
    /// A true boundary sample is covered if a reconstructed point of its
    /// body lies this close.
    pub cover_radius: f64,
    /// Samples this close to the true `z_inf` are left out of the coverage.
    pub exclusion: f64,
    /// True boundary samples per body.
    pub samples: usize,
    /// Deepest level followed when labelling true boundary points.
    pub max_level: usize,
}

impl Default for ValidationParams {
    fn default() -> Self {
        Self {
            cover_radius: 0.01,
            exclusion: 0.05,
            samples: 4000,
            max_level: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyReport {
    /// Label used by the reconstruction (1 or 2).
    pub label: usize,
    /// Id of the matching body in the scene.
    pub body: usize,
    pub points: usize,
    /// Largest distance from a reconstructed point to the true boundary.
    pub hausdorff: f64,
    /// Fraction of boundary samples outside the `z_inf` neighbourhood that
    /// are covered.
    pub coverage: f64,
    pub z_inf_true: [f64; 2],
    pub z_inf_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub bodies: Vec<BodyReport>,
    pub audit_checked: usize,
    /// Backtrace reflections whose true level is not below the level of the
    /// point they served.
    pub audit_violations: usize,
}

/// Mutual nearest points of two disjoint convex bodies, from the closest
/// pair of boundary samples polished by alternating projection.
pub fn true_nearest_points(
    scene: &Scene<2>,
    b1: usize,
    b2: usize,
    samples: usize,
) -> (Vector<2>, Vector<2>) {
    let (k1, k2) = (scene.body(b1).expect("body"), scene.body(b2).expect("body"));
    let (s1, s2) = (k1.boundary_samples(samples), k2.boundary_samples(samples));
    let mut best = (f64::INFINITY, s1[0], s2[0]);
    for p in &s1 {
        for q in &s2 {
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, *p, *q);
            }
        }
    }
    let (mut p, mut q) = (best.1, best.2);
    for _ in 0..200 {
        let np = k1.nearest_boundary_point(&q);
        let nq = k2.nearest_boundary_point(&np);
        let moved = (np - p).norm() + (nq - q).norm();
        p = np;
        q = nq;
        if moved < 1e-15 {
            break;
        }
    }
    (p, q)
}

/// Level of a boundary point: 1 if its outward normal ray leaves S0 without
/// meeting the obstacle, otherwise one more than the level of the first
/// point the ray meets. `None` past `max_level`.
pub fn true_level(scene: &Scene<2>, body: usize, q: &Vector<2>, max_level: usize) -> Option<usize> {
    if max_level == 0 {
        return None;
    }
    let b = scene.body(body)?;
    let foot = b.nearest_boundary_point(q);
    let n = b.gradient(&foot).normalize();
    match first_intersection(scene, &foot, &n).ok()? {
        Intersection::ExitS0 { .. } => Some(1),
        Intersection::Hit { body, point, .. } => {
            true_level(scene, body, &point, max_level - 1).map(|k| k + 1)
        }
        Intersection::None => None,
    }
}

/// Scene body closest to `p`.
fn nearest_body(scene: &Scene<2>, p: &Vector<2>) -> usize {
    scene
        .bodies
        .iter()
        .min_by(|a, b| {
            a.signed_distance(p)
                .abs()
                .total_cmp(&b.signed_distance(p).abs())
        })
        .map(|b| b.id)
        .expect("scene has bodies")
}

pub fn validate_reconstruction(
    scene: &Scene<2>,
    state: &ReconstructionState,
    params: &ValidationParams,
) -> ValidationReport {
    let v = |p: [f64; 2]| Vector::<2>::new(p[0], p[1]);
    let ids = [
        nearest_body(scene, &v(state.seeds.z_k)),
        nearest_body(scene, &v(state.seeds.z2)),
    ];
    let (t1, t2) = true_nearest_points(scene, ids[0], ids[1], params.samples.min(4000));
    let truth = [t1, t2];
    let mut bodies = Vec::new();
    for label in [1, 2] {
        let body = scene.body(ids[label - 1]).expect("body");
        let pts = state.body_points(label);
        let hausdorff = pts
            .iter()
            .map(|p| body.signed_distance(p).abs())
            .fold(0.0, f64::max);
        let zi = truth[label - 1];
        let samples: Vec<Vector<2>> = body
            .boundary_samples(params.samples)
            .into_iter()
            .filter(|s| (s - zi).norm() >= params.exclusion)
            .collect();
        let covered = samples
            .iter()
            .filter(|s| pts.iter().any(|p| (p - *s).norm() < params.cover_radius))
            .count();
        bodies.push(BodyReport {
            label,
            body: body.id,
            points: pts.len(),
            hausdorff,
            coverage: if samples.is_empty() {
                0.0
            } else {
                covered as f64 / samples.len() as f64
            },
            z_inf_true: [zi.x, zi.y],
            z_inf_error: (v(state.z_inf[label - 1]) - zi).norm(),
        });
    }
    let mut violations = 0;
    for r in &state.audit {
        let q = v(r.point);
        let lvl = true_level(scene, nearest_body(scene, &q), &q, params.max_level);
        if lvl.is_none_or(|k| k >= r.level) {
            violations += 1;
        }
    }
    ValidationReport {
        bodies,
        audit_checked: state.audit.len(),
        audit_violations: violations,
    }
}
