//! Property checks on simulated data, shared by the `verify` command and the
//! acceptance run. Random test points come from a seeded ChaCha stream.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{
    trace, trace_from, two_point_continuation, PhasePoint, TraceLimits, TraceStatus, Trajectory,
};
use crate::geometry::{Scene, Shape, Vector};
use crate::recovery::{HullResult, SeparatingLine};

/// One named property with its measured value and the bound it must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= limit` (NaN fails).
    pub fn at_most(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            limit: 1.0,
            detail: detail.into(),
        }
    }
}

fn random_entry(scene: &Scene<2>, rng: &mut ChaCha8Rng) -> PhasePoint<2> {
    let theta = rng.random_range(0.0..TAU);
    let phi = rng.random_range(-0.98 * FRAC_PI_2..0.98 * FRAC_PI_2);
    PhasePoint::planar_entry(scene, theta, phi)
}

/// `count` random entries; the stream depends only on `seed`.
pub fn random_entries(scene: &Scene<2>, count: usize, seed: u64) -> Vec<PhasePoint<2>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_entry(scene, &mut rng)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RaySuite {
    pub rays: usize,
    pub reflections: usize,
    /// Largest violation of angle equality and of the tangential component.
    pub specular: f64,
    pub speed: f64,
    pub additivity: f64,
    /// Largest distance between the entry and the exit of the reversed ray,
    /// plus the time difference.
    pub reversal: f64,
}

impl RaySuite {
    fn merge(self, o: Self) -> Self {
        Self {
            rays: self.rays + o.rays,
            reflections: self.reflections + o.reflections,
            specular: self.specular.max(o.specular),
            speed: self.speed.max(o.speed),
            additivity: self.additivity.max(o.additivity),
            reversal: self.reversal.max(o.reversal),
        }
    }
}

fn ray_properties(scene: &Scene<2>, tr: &Trajectory<2>, limits: &TraceLimits) -> RaySuite {
    let mut s = RaySuite {
        rays: 1,
        reflections: tr.reflections.len(),
        ..Default::default()
    };
    let cross = |a: &Vector<2>, b: &Vector<2>| a.x * b.y - a.y * b.x;
    for r in &tr.reflections {
        let n = scene
            .body(r.body)
            .expect("hit body")
            .gradient(&r.point)
            .normalize();
        s.specular = s
            .specular
            .max((r.incoming.dot(&n) + r.outgoing.dot(&n)).abs())
            .max((cross(&r.incoming, &n) - cross(&r.outgoing, &n)).abs());
        s.speed = s
            .speed
            .max((r.incoming.norm() - 1.0).abs())
            .max((r.outgoing.norm() - 1.0).abs());
    }
    let exit = tr.exit.expect("exiting ray");
    s.speed = s
        .speed
        .max((tr.entry.u.norm() - 1.0).abs())
        .max((exit.u.norm() - 1.0).abs());
    let pts = tr.points();
    let polyline: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let summed: f64 = tr.segment_lengths.iter().sum();
    s.additivity = (polyline - tr.total_time)
        .abs()
        .max((summed - tr.total_time).abs());
    s.reversal = match trace(scene, exit.reversed(), limits) {
        Ok(back) if back.status == TraceStatus::Exited => {
            let e = back.exit.expect("exited");
            (e.x - tr.entry.x).norm() + (back.total_time - tr.total_time).abs()
        }
        _ => f64::INFINITY,
    };
    s
}

/// Specular law, unit speed, time additivity and reversal over `count`
/// random rays that exit S0.
pub fn ray_suite(scene: &Scene<2>, count: usize, seed: u64, limits: &TraceLimits) -> RaySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(count);
    let mut exiting = Vec::with_capacity(count);
    // Draw in rounds until enough rays exit; order is fixed by the stream.
    while exiting.len() < count {
        entries.clear();
        entries.extend((0..count - exiting.len()).map(|_| random_entry(scene, &mut rng)));
        let traced: Vec<Option<Trajectory<2>>> = entries
            .par_iter()
            .map(|e| {
                trace(scene, *e, limits)
                    .ok()
                    .filter(|t| t.status == TraceStatus::Exited)
            })
            .collect();
        exiting.extend(traced.into_iter().flatten());
    }
    exiting
        .par_iter()
        .map(|t| ray_properties(scene, t, limits))
        .reduce(RaySuite::default, RaySuite::merge)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSuite {
    pub branches: usize,
    pub attempts: usize,
    pub max_error: f64,
    pub max_error_fine: f64,
    /// Median over branches of the error ratio between `h` and `h / 5`,
    /// among branches whose error at `h` is above the rounding floor.
    pub median_decay: f64,
}

fn time_at(
    scene: &Scene<2>,
    seed: &Trajectory<2>,
    tx: f64,
    ty: f64,
    limits: &TraceLimits,
) -> Option<f64> {
    let x = scene.s0.point_at(tx);
    let y = scene.s0.point_at(ty);
    let c = two_point_continuation(scene, seed, (x, y), limits).ok()?;
    let e = c.exit?;
    Some(c.total_time + e.u.dot(&(y - e.x)))
}

/// Central difference of `T` along a random direction of the angle pair,
/// against the first variation `<v, b> - <u, a>`; errors at `h` and `h / 5`.
fn derivative_errors(
    scene: &Scene<2>,
    seed: &Trajectory<2>,
    dir: (f64, f64),
    h: f64,
    limits: &TraceLimits,
) -> Option<(f64, f64)> {
    let s0 = &scene.s0;
    let exit = seed.exit?;
    let tx = s0.angle_of(&seed.entry.x);
    let ty = s0.angle_of(&exit.x);
    let av = dir.0 * s0.radius * s0.tangent_at(tx);
    let bv = dir.1 * s0.radius * s0.tangent_at(ty);
    let exact = exit.u.dot(&bv) - seed.entry.u.dot(&av);
    let fd = |h: f64| -> Option<f64> {
        let p = time_at(scene, seed, tx + dir.0 * h, ty + dir.1 * h, limits)?;
        let m = time_at(scene, seed, tx - dir.0 * h, ty - dir.1 * h, limits)?;
        Some((p - m) / (2.0 * h))
    };
    Some(((fd(h)? - exact).abs(), (fd(h / 5.0)? - exact).abs()))
}

/// Derivative identity on `count` random branches with at least one
/// reflection.
pub fn derivative_suite(
    scene: &Scene<2>,
    count: usize,
    seed: u64,
    h: f64,
    limits: &TraceLimits,
) -> DerivativeSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors: Vec<(f64, f64)> = Vec::with_capacity(count);
    let mut attempts = 0;
    while errors.len() < count && attempts < 20 * count {
        let round: Vec<(PhasePoint<2>, f64)> = (0..count - errors.len())
            .map(|_| (random_entry(scene, &mut rng), rng.random_range(0.0..TAU)))
            .collect();
        attempts += round.len();
        let found: Vec<Option<(f64, f64)>> = round
            .par_iter()
            .map(|(e, psi)| {
                let t = trace(scene, *e, limits).ok()?;
                if t.status != TraceStatus::Exited || t.reflections.is_empty() {
                    return None;
                }
                derivative_errors(scene, &t, (psi.cos(), psi.sin()), h, limits)
            })
            .collect();
        errors.extend(found.into_iter().flatten());
    }
    let floor = 1e-9;
    let mut ratios: Vec<f64> = errors
        .iter()
        .filter(|e| e.0 > floor)
        .map(|e| e.0 / e.1.max(f64::MIN_POSITIVE))
        .collect();
    ratios.sort_by(f64::total_cmp);
    DerivativeSuite {
        branches: errors.len(),
        attempts,
        max_error: errors.iter().map(|e| e.0).fold(0.0, f64::max),
        max_error_fine: errors.iter().map(|e| e.1).fold(0.0, f64::max),
        median_decay: ratios.get(ratios.len() / 2).copied().unwrap_or(f64::NAN),
    }
}

/// Number of S0 entries among `count` random ones that end up trapped.
pub fn trapped_entries(scene: &Scene<2>, count: usize, seed: u64, limits: &TraceLimits) -> usize {
    random_entries(scene, count, seed)
        .par_iter()
        .filter(|e| matches!(trace(scene, **e, limits), Ok(t) if t.status == TraceStatus::BudgetTrapped))
        .count()
}

/// Status of the ray started midway between the first two discs along the
/// line of their centers: the period-two orbit.
pub fn period_two_status(scene: &Scene<2>, limits: &TraceLimits) -> Option<TraceStatus> {
    let centers: Vec<Vector<2>> = scene
        .bodies
        .iter()
        .filter_map(|b| match &b.shape {
            Shape::Ball { center, .. } => Some(*center),
            _ => None,
        })
        .take(2)
        .collect();
    let [c1, c2] = centers[..] else { return None };
    let d = (c2 - c1).normalize();
    trace_from(scene, 0.5 * (c1 + c2), d, limits)
        .ok()
        .map(|t| t.status)
}

/// Closed-form support function of the convex hull of discs and ellipses,
/// about the S0 center.
pub fn exact_support(scene: &Scene<2>, angle: f64) -> f64 {
    let w = Vector::<2>::new(angle.cos(), angle.sin());
    scene
        .bodies
        .iter()
        .map(|b| match &b.shape {
            Shape::Ball { center, radius } => (center - scene.s0.center).dot(&w) + radius,
            Shape::Ellipsoid {
                center,
                semi_axes,
                axes,
            } => {
                let local = axes.transpose() * w;
                let r = (semi_axes.x * local.x).hypot(semi_axes.y * local.y);
                (center - scene.s0.center).dot(&w) + r
            }
            Shape::Implicit(_) => b
                .boundary_samples(4096)
                .iter()
                .map(|p| (p - scene.s0.center).dot(&w))
                .fold(f64::NEG_INFINITY, f64::max),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest support error of a recovered hull.
pub fn support_error(scene: &Scene<2>, hull: &HullResult) -> f64 {
    hull.angles
        .iter()
        .zip(&hull.support)
        .map(|(a, h)| (h - exact_support(scene, *a)).abs())
        .fold(
            0.0,
            |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) },
        )
}

/// Whether the line leaves every boundary sample of one body strictly on
/// one side and those of the other on the opposite side.
pub fn separates(scene: &Scene<2>, line: &SeparatingLine) -> bool {
    if scene.bodies.len() != 2 {
        return false;
    }
    let range = |i: usize| {
        scene.bodies[i]
            .boundary_samples(2048)
            .iter()
            .map(|p| line.side(p))
            .fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s), hi.max(s)))
    };
    let (r1, r2) = (range(0), range(1));
    (r1.1 < 0.0 && r2.0 > 0.0) || (r2.1 < 0.0 && r1.0 > 0.0)
}

/// Boundary point of the scene closest to S0, found from dense samples
/// and a bisection on the normal condition on the winning body.
pub fn closest_to_sphere(scene: &Scene<2>) -> Vector<2> {
    let c = scene.s0.center;
    let mut best: Option<(f64, usize, usize)> = None;
    let n = 8192;
    for (bi, b) in scene.bodies.iter().enumerate() {
        for (j, p) in b.boundary_samples(n).iter().enumerate() {
            let r = (p - c).norm();
            if best.is_none_or(|x| r > x.0) {
                best = Some((r, bi, j));
            }
        }
    }
    let (_, bi, j) = best.expect("scene has bodies");
    let body = &scene.bodies[bi];
    let centre = body.interior_point();
    let at = |phi: f64| body.radial_boundary_point(&Vector::<2>::new(phi.cos(), phi.sin()));
    let samples = body.boundary_samples(n);
    let d = samples[j] - centre;
    let phi0 = d.y.atan2(d.x);
    let step = 2.0 * TAU / n as f64;
    // At the optimum the outward normal is parallel to `z - c`.
    let g = |phi: f64| {
        let z = at(phi);
        let n = body.gradient(&z);
        let r = z - c;
        n.x * r.y - n.y * r.x
    };
    let (mut lo, mut hi) = (phi0 - step, phi0 + step);
    let g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disc_scene, two_ellipse_example};

    #[test]
    fn disc_support_is_closed_form() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.5], 0.5)]);
        assert!((exact_support(&scene, 0.0) - 2.5).abs() < 1e-15);
        assert!((exact_support(&scene, std::f64::consts::PI) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ellipse_support_matches_samples() {
        let scene = two_ellipse_example();
        for k in 0..12 {
            let ang = TAU * k as f64 / 12.0;
            let w = Vector::<2>::new(ang.cos(), ang.sin());
            let sampled = scene
                .bodies
                .iter()
                .flat_map(|b| b.boundary_samples(20000))
                .map(|p| p.dot(&w))
                .fold(f64::MIN, f64::max);
            assert!((exact_support(&scene, ang) - sampled).abs() < 1e-6);
        }
    }

    #[test]
    fn closest_point_of_off_center_disc() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0)]);
        let z = closest_to_sphere(&scene);
        assert!((z - Vector::<2>::new(-3.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn small_ray_suite_on_example() {
        let scene = two_ellipse_example();
        let s = ray_suite(&scene, 200, 7, &TraceLimits::default());
        assert_eq!(s.rays, 200);
        assert!(s.specular < 1e-12 && s.speed < 1e-12);
        assert!(s.additivity < 1e-10 * 4.0 && s.reversal < 1e-8 * 4.0);
    }

    #[test]
    fn period_two_orbit_between_discs() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)]);
        assert_eq!(
            period_two_status(&scene, &TraceLimits::default()),
            Some(TraceStatus::BudgetTrapped)
        );
    }
}
