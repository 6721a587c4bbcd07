//! Simply reflecting billiard rays in the exterior of the obstacle, from an
//! inward point of S0 until they leave through S0 again.

use nalgebra::{DMatrix, DVector};

use crate::error::FlowError;
use crate::geometry::{tangent_basis, ConvexBody, Scene, Vector, BOUNDARY_TOL};

/// Rays shorter than this (relative to the scene scale) are treated as
/// self-intersections and ignored.
const MIN_SEGMENT: f64 = 1e-12;
const MARCH_STEP: f64 = 1e-3;
const MAX_BISECTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint<const D: usize> {
    pub x: Vector<D>,
    pub u: Vector<D>,
}

impl<const D: usize> PhasePoint<D> {
    pub fn new(x: Vector<D>, u: Vector<D>) -> Self {
        Self { x, u }
    }

    /// The reversed phase point `(x, -u)`.
    pub fn reversed(&self) -> Self {
        Self {
            x: self.x,
            u: -self.u,
        }
    }
}

impl PhasePoint<2> {
    /// Entry point at polar angle `theta` on S0, aimed at angle `phi` from
    /// the inward normal (positive `phi` leans counterclockwise).
    pub fn planar_entry(scene: &Scene<2>, theta: f64, phi: f64) -> Self {
        let x = scene.s0.point_at(theta);
        let inward = -Vector::<2>::new(theta.cos(), theta.sin());
        let tangent = scene.s0.tangent_at(theta);
        let u = phi.cos() * inward + phi.sin() * tangent;
        Self { x, u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection<const D: usize> {
    pub body: usize,
    pub point: Vector<D>,
    pub incoming: Vector<D>,
    pub outgoing: Vector<D>,
    pub normal: Vector<D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceStatus {
    Exited,
    BudgetTrapped,
    TangencyDetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub entry: PhasePoint<D>,
    pub reflections: Vec<Reflection<D>>,
    pub exit: Option<PhasePoint<D>>,
    /// Point of the tangential contact that stopped the trace, if any.
    pub tangency: Option<Vector<D>>,
    pub segment_lengths: Vec<f64>,
    pub total_time: f64,
    pub status: TraceStatus,
}

impl<const D: usize> Trajectory<D> {
    /// Ordered body ids hit by the ray.
    pub fn body_sequence(&self) -> Vec<usize> {
        self.reflections.iter().map(|r| r.body).collect()
    }

    pub fn signature(&self) -> u64 {
        let mut sig = Signature::new();
        for r in &self.reflections {
            sig.push(r.body);
        }
        sig.finish()
    }

    /// Entry point, reflection points, then the exit or tangency point.
    pub fn points(&self) -> Vec<Vector<D>> {
        let mut pts = Vec::with_capacity(self.reflections.len() + 2);
        pts.push(self.entry.x);
        pts.extend(self.reflections.iter().map(|r| r.point));
        if let Some(e) = &self.exit {
            pts.push(e.x);
        } else if let Some(t) = &self.tangency {
            pts.push(*t);
        }
        pts
    }
}

/// FNV-1a over the body-id sequence; identifies reflection combinatorics.
#[derive(Debug, Clone, Copy)]
pub struct Signature(u64);

impl Signature {
    pub fn new() -> Self {
        Signature(0xcbf2_9ce4_8422_2325)
    }

    pub fn push(&mut self, id: usize) {
        for b in (id as u64).to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceLimits {
    pub max_reflections: usize,
    /// Time budget; `None` means 100 times the S0 radius.
    pub max_time: Option<f64>,
    pub tangency_threshold: f64,
}

impl Default for TraceLimits {
    fn default() -> Self {
        Self {
            max_reflections: 200,
            max_time: None,
            tangency_threshold: 1e-7,
        }
    }
}

impl TraceLimits {
    pub fn time_budget(&self, scale: f64) -> f64 {
        self.max_time.unwrap_or(100.0 * scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionResult<const D: usize> {
    pub exit: PhasePoint<D>,
    pub trajectory: Trajectory<D>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intersection<const D: usize> {
    Hit {
        body: usize,
        point: Vector<D>,
        length: f64,
    },
    ExitS0 {
        point: Vector<D>,
        length: f64,
    },
    None,
}

/// Nearest forward intersection of the ray with a body boundary, or else
/// its exit through S0.
pub fn first_intersection<const D: usize>(
    scene: &Scene<D>,
    origin: &Vector<D>,
    direction: &Vector<D>,
) -> Result<Intersection<D>, FlowError> {
    first_intersection_excluding(scene, origin, direction, None)
}

fn first_intersection_excluding<const D: usize>(
    scene: &Scene<D>,
    origin: &Vector<D>,
    direction: &Vector<D>,
    exclude: Option<usize>,
) -> Result<Intersection<D>, FlowError> {
    let a = scene.scale();
    let min_len = MIN_SEGMENT * a;
    let exit_len = match sphere_exit_length(scene, origin, direction) {
        Some(s) if s > min_len => s,
        _ => return Ok(Intersection::None),
    };
    let mut best: Option<(usize, f64)> = None;
    for body in &scene.bodies {
        if Some(body.id) == exclude {
            continue;
        }
        let limit = best.map(|b| b.1).unwrap_or(exit_len);
        if let Some(s) = ray_body_entry(body, origin, direction, min_len, limit, a)? {
            if s < limit {
                best = Some((body.id, s));
            }
        }
    }
    Ok(match best {
        Some((body, length)) => Intersection::Hit {
            body,
            point: origin + length * direction,
            length,
        },
        None => {
            let raw = origin + exit_len * direction;
            let point = scene.s0.center + (raw - scene.s0.center).normalize() * scene.s0.radius;
            Intersection::ExitS0 {
                point,
                length: exit_len,
            }
        }
    })
}

/// Forward distance to the sphere along the ray, for an origin inside or on
/// the sphere.
fn sphere_exit_length<const D: usize>(
    scene: &Scene<D>,
    origin: &Vector<D>,
    dir: &Vector<D>,
) -> Option<f64> {
    let p = origin - scene.s0.center;
    let b = dir.dot(&p);
    let c = p.norm_squared() - scene.s0.radius * scene.s0.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s = if b < 0.0 { -b + sq } else { -c / (b + sq) };
    if s.is_finite() {
        Some(s)
    } else {
        None
    }
}

/// Entry distance of the ray into the body, if it enters within `limit`.
fn ray_body_entry<const D: usize>(
    body: &ConvexBody<D>,
    origin: &Vector<D>,
    dir: &Vector<D>,
    min_len: f64,
    limit: f64,
    scale: f64,
) -> Result<Option<f64>, FlowError> {
    if let Some(q) = body.quadric() {
        let d = origin - q.center;
        let md = q.m * dir;
        let qa = dir.dot(&md);
        let qb = 2.0 * d.dot(&md);
        let qc = d.dot(&(q.m * d)) - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Ok(None);
        }
        let sq = disc.sqrt();
        let qq = -0.5 * (qb + qb.signum() * sq);
        let (r1, r2) = if qq != 0.0 {
            (qq / qa, qc / qq)
        } else {
            (0.0, 0.0)
        };
        let (lo, _hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        if lo > min_len {
            return Ok(Some(lo));
        }
        return Ok(None);
    }
    // Generic field: march to bracket the first outside-to-inside change.
    let step = MARCH_STEP * scale;
    let f = |s: f64| body.value(&(origin + s * dir));
    let mut s0 = min_len;
    let mut f0 = f(s0);
    let mut s = s0;
    while s < limit {
        let s1 = (s + step).min(limit);
        let f1 = f(s1);
        if f0 > 0.0 && f1 <= 0.0 {
            let (mut lo, mut hi) = (s0, s1);
            let tol = 1e-12 * scale;
            let mut steps = 0;
            while hi - lo > tol {
                steps += 1;
                if steps > MAX_BISECTION {
                    return Err(FlowError::NumericalFailure { steps });
                }
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut root = 0.5 * (lo + hi);
            // One derivative polish step, kept only if it stays in the bracket.
            let p = origin + root * dir;
            let slope = body.gradient(&p).dot(dir);
            if slope.abs() > 1e-300 {
                let polished = root - body.value(&p) / slope;
                if polished >= lo - tol && polished <= hi + tol {
                    root = polished;
                }
            }
            return Ok(Some(root));
        }
        s0 = s1;
        f0 = f1;
        s = s1;
    }
    Ok(None)
}

/// Specular reflection of `incoming` about the plane with unit `normal`.
pub fn reflect<const D: usize>(
    incoming: &Vector<D>,
    normal: &Vector<D>,
    tangency_threshold: f64,
) -> Result<Vector<D>, FlowError> {
    let c = incoming.dot(normal);
    if c.abs() < tangency_threshold {
        return Err(FlowError::TangentIncidence { cosine: c });
    }
    Ok(incoming - 2.0 * c * normal)
}

/// Trace from an inward phase point of S0.
pub fn trace<const D: usize>(
    scene: &Scene<D>,
    entry: PhasePoint<D>,
    limits: &TraceLimits,
) -> Result<Trajectory<D>, FlowError> {
    check_entry(scene, &entry)?;
    trace_impl(scene, entry, limits, None)
}

/// Trace from an arbitrary point of the exterior (for example a boundary
/// point of a body), without the S0 entry checks.
pub fn trace_from<const D: usize>(
    scene: &Scene<D>,
    origin: Vector<D>,
    direction: Vector<D>,
    limits: &TraceLimits,
) -> Result<Trajectory<D>, FlowError> {
    trace_impl(scene, PhasePoint::new(origin, direction), limits, None)
}

fn check_entry<const D: usize>(scene: &Scene<D>, entry: &PhasePoint<D>) -> Result<(), FlowError> {
    let a = scene.scale();
    let rel = entry.x - scene.s0.center;
    if (rel.norm() - a).abs() > 1e-9 * a
        || (entry.u.norm() - 1.0).abs() > 1e-12
        || rel.dot(&entry.u) >= 0.0
    {
        return Err(FlowError::InvalidEntry);
    }
    Ok(())
}

fn trace_impl<const D: usize>(
    scene: &Scene<D>,
    entry: PhasePoint<D>,
    limits: &TraceLimits,
    exclude: Option<usize>,
) -> Result<Trajectory<D>, FlowError> {
    let budget = limits.time_budget(scene.scale());
    let mut reflections = Vec::new();
    let mut segment_lengths = Vec::new();
    let mut total = 0.0;
    let mut p = entry.x;
    let mut d = entry.u;
    let mut last = exclude;
    loop {
        match first_intersection_excluding(scene, &p, &d, last)? {
            Intersection::Hit {
                body,
                point,
                length,
            } => {
                segment_lengths.push(length);
                total += length;
                let b = scene.body(body).expect("hit body exists");
                let normal = b.gradient(&point).normalize();
                let out = match reflect(&d, &normal, limits.tangency_threshold) {
                    Ok(o) => o,
                    Err(_) => {
                        return Ok(Trajectory {
                            entry,
                            reflections,
                            exit: None,
                            tangency: Some(point),
                            segment_lengths,
                            total_time: total,
                            status: TraceStatus::TangencyDetected,
                        })
                    }
                };
                reflections.push(Reflection {
                    body,
                    point,
                    incoming: d,
                    outgoing: out,
                    normal,
                });
                if reflections.len() > limits.max_reflections || total > budget {
                    return Ok(Trajectory {
                        entry,
                        reflections,
                        exit: None,
                        tangency: None,
                        segment_lengths,
                        total_time: total,
                        status: TraceStatus::BudgetTrapped,
                    });
                }
                p = point;
                d = out;
                last = Some(body);
            }
            Intersection::ExitS0 { point, length } => {
                segment_lengths.push(length);
                total += length;
                return Ok(Trajectory {
                    entry,
                    reflections,
                    exit: Some(PhasePoint::new(point, d)),
                    tangency: None,
                    segment_lengths,
                    total_time: total,
                    status: TraceStatus::Exited,
                });
            }
            Intersection::None => return Err(FlowError::InvalidEntry),
        }
    }
}

/// Allocation-free trace result used by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSummary<const D: usize> {
    pub status: TraceStatus,
    pub exit: Option<PhasePoint<D>>,
    pub total_time: f64,
    pub reflections: usize,
    pub signature: u64,
    /// Hash of which side of each non-hit body every segment passes (planar
    /// only). Two rays with equal signatures but different sides have a
    /// branch hitting that body somewhere between them.
    pub sides: u64,
}

fn push_sides<const D: usize>(
    scene: &Scene<D>,
    p: &Vector<D>,
    d: &Vector<D>,
    length: f64,
    ends: (Option<usize>, Option<usize>),
    h: &mut Signature,
) {
    if D != 2 {
        return;
    }
    for b in &scene.bodies {
        if Some(b.id) == ends.0 || Some(b.id) == ends.1 {
            continue;
        }
        let r = b.interior_point() - p;
        let proj = r.dot(d);
        if proj > 0.0 && proj < length {
            let left = d[0] * r[1] - d[1] * r[0] > 0.0;
            h.push(2 * b.id + left as usize);
        }
    }
    h.push(usize::MAX);
}

pub fn trace_summary<const D: usize>(
    scene: &Scene<D>,
    entry: PhasePoint<D>,
    limits: &TraceLimits,
) -> Result<TraceSummary<D>, FlowError> {
    let budget = limits.time_budget(scene.scale());
    let mut sig = Signature::new();
    let mut sides = Signature::new();
    let mut count = 0;
    let mut total = 0.0;
    let mut p = entry.x;
    let mut d = entry.u;
    let mut last = None;
    loop {
        match first_intersection_excluding(scene, &p, &d, last)? {
            Intersection::Hit {
                body,
                point,
                length,
            } => {
                total += length;
                push_sides(scene, &p, &d, length, (last, Some(body)), &mut sides);
                let b = scene.body(body).expect("hit body exists");
                let normal = b.gradient(&point).normalize();
                let out = match reflect(&d, &normal, limits.tangency_threshold) {
                    Ok(o) => o,
                    Err(_) => {
                        return Ok(TraceSummary {
                            status: TraceStatus::TangencyDetected,
                            exit: None,
                            total_time: total,
                            reflections: count,
                            signature: sig.finish(),
                            sides: sides.finish(),
                        })
                    }
                };
                count += 1;
                sig.push(body);
                if count > limits.max_reflections || total > budget {
                    return Ok(TraceSummary {
                        status: TraceStatus::BudgetTrapped,
                        exit: None,
                        total_time: total,
                        reflections: count,
                        signature: sig.finish(),
                        sides: sides.finish(),
                    });
                }
                p = point;
                d = out;
                last = Some(body);
            }
            Intersection::ExitS0 { point, length } => {
                total += length;
                push_sides(scene, &p, &d, length, (last, None), &mut sides);
                return Ok(TraceSummary {
                    status: TraceStatus::Exited,
                    exit: Some(PhasePoint::new(point, d)),
                    total_time: total,
                    reflections: count,
                    signature: sig.finish(),
                    sides: sides.finish(),
                });
            }
            Intersection::None => return Err(FlowError::InvalidEntry),
        }
    }
}

/// The cross-section map: inward phase point on S0 to the outward phase
/// point where the ray leaves.
pub fn cross_section_map<const D: usize>(
    scene: &Scene<D>,
    entry: PhasePoint<D>,
    limits: &TraceLimits,
) -> Result<CrossSectionResult<D>, FlowError> {
    let trajectory = trace(scene, entry, limits)?;
    match trajectory.status {
        TraceStatus::Exited => Ok(CrossSectionResult {
            exit: trajectory.exit.expect("exited trajectories carry an exit"),
            trajectory,
        }),
        TraceStatus::BudgetTrapped => Err(FlowError::Trapped {
            reflections: trajectory.reflections.len(),
        }),
        TraceStatus::TangencyDetected => Err(FlowError::Tangency),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    /// `(n-1) x (n-1)` Jacobian of direction to exit point in the charts.
    pub jacobian: DMatrix<f64>,
    pub determinant: f64,
    pub regular: bool,
}

/// Determinant threshold below which a ray is declared singular.
pub const REGULARITY_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-6;

fn perturbed_direction<const D: usize>(
    base: &Vector<D>,
    basis: &[Vector<D>],
    coords: &[f64],
) -> Vector<D> {
    let mut v = *base;
    for (e, c) in basis.iter().zip(coords) {
        v += *c * e;
    }
    v.normalize()
}

/// Central finite-difference Jacobian of `omega -> exit point` at
/// `(x0, omega0)` in the tangent charts of the direction sphere at `omega0`
/// and of S0 at `y_chart`.
fn exit_jacobian<const D: usize>(
    scene: &Scene<D>,
    x0: &Vector<D>,
    omega0: &Vector<D>,
    y_chart: &Vector<D>,
    signature: u64,
    h: f64,
    limits: &TraceLimits,
) -> Result<DMatrix<f64>, FlowError> {
    let dir_basis = tangent_basis(omega0);
    let y_basis = tangent_basis(&(y_chart - scene.s0.center));
    let k = D - 1;
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut coords = vec![0.0; k];
        let mut exits = [Vector::<D>::zeros(); 2];
        for (slot, sgn) in [1.0, -1.0].iter().enumerate() {
            coords[j] = sgn * h;
            let w = perturbed_direction(omega0, &dir_basis, &coords);
            let s = trace_summary(scene, PhasePoint::new(*x0, w), limits)?;
            match (s.status, s.exit) {
                (TraceStatus::Exited, Some(e)) if s.signature == signature => exits[slot] = e.x,
                (TraceStatus::Exited, _) => return Err(FlowError::CombinatoricsChanged),
                (TraceStatus::BudgetTrapped, _) => {
                    return Err(FlowError::Trapped {
                        reflections: s.reflections,
                    })
                }
                (TraceStatus::TangencyDetected, _) => return Err(FlowError::Tangency),
            }
        }
        let diff = exits[0] - exits[1];
        for i in 0..k {
            jac[(i, j)] = diff.dot(&y_basis[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Regularity test of the ray `(x0, omega0)`: the exit point must depend on
/// the entry direction with full rank.
pub fn regularity_jacobian<const D: usize>(
    scene: &Scene<D>,
    x0: &Vector<D>,
    omega0: &Vector<D>,
    h: f64,
    limits: &TraceLimits,
) -> Result<RegularityReport, FlowError> {
    let base = cross_section_map(scene, PhasePoint::new(*x0, *omega0), limits)?;
    let sig = base.trajectory.signature();
    let jacobian = exit_jacobian(scene, x0, omega0, &base.exit.x, sig, h, limits)?;
    let determinant = jacobian.determinant();
    Ok(RegularityReport {
        regular: determinant.abs() > REGULARITY_THRESHOLD,
        determinant,
        jacobian,
    })
}

/// Continue the branch of `seed` to the geodesic joining `target.0` to
/// `target.1` with the same reflection combinatorics.
///
/// Damped Newton iteration on the entry direction at `target.0`, with the
/// finite-difference exit Jacobian as derivative.
pub fn two_point_continuation<const D: usize>(
    scene: &Scene<D>,
    seed: &Trajectory<D>,
    target: (Vector<D>, Vector<D>),
    limits: &TraceLimits,
) -> Result<Trajectory<D>, FlowError> {
    let a = scene.scale();
    let seed_exit = match (&seed.status, &seed.exit) {
        (TraceStatus::Exited, Some(e)) => *e,
        _ => {
            return Err(FlowError::NoConvergence {
                reason: "seed trajectory does not exit".into(),
            })
        }
    };
    let (x, y) = target;
    if (x - seed.entry.x).norm() <= 1e-15 * a && (y - seed_exit.x).norm() <= 1e-15 * a {
        return Ok(seed.clone());
    }
    let sig = seed.signature();
    let rel = x - scene.s0.center;
    if (rel.norm() - a).abs() > 1e-9 * a {
        return Err(FlowError::InvalidEntry);
    }
    let mut omega = seed.entry.u;
    if rel.dot(&omega) >= 0.0 {
        return Err(FlowError::NoConvergence {
            reason: "seed direction is not inward at the new entry point".into(),
        });
    }
    let y_basis = tangent_basis(&(y - scene.s0.center));
    let k = D - 1;
    let residual = |exit: &Vector<D>| -> DVector<f64> {
        let d = exit - y;
        DVector::from_fn(k, |i, _| d.dot(&y_basis[i]))
    };

    let eval = |w: &Vector<D>| -> Result<Option<Trajectory<D>>, FlowError> {
        if rel.dot(w) >= 0.0 {
            return Ok(None);
        }
        let t = trace(scene, PhasePoint::new(x, *w), limits)?;
        if t.status == TraceStatus::Exited && t.signature() == sig {
            Ok(Some(t))
        } else {
            Ok(None)
        }
    };

    let mut current = match eval(&omega)? {
        Some(t) => t,
        None => return Err(FlowError::CombinatoricsChanged),
    };
    let mut r = residual(&current.exit.expect("exited").x);
    let fine = 16.0 * f64::EPSILON * a;
    for _ in 0..60 {
        if r.norm() <= fine {
            break;
        }
        let jac = exit_jacobian(scene, &x, &omega, &y, sig, 1e-7, limits)?;
        let step = match jac.clone().lu().solve(&(-&r)) {
            Some(s) => s,
            None => {
                return Err(FlowError::NoConvergence {
                    reason: "singular exit Jacobian".into(),
                })
            }
        };
        let basis = tangent_basis(&omega);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let coords: Vec<f64> = step.iter().map(|s| s * lambda).collect();
            let w = perturbed_direction(&omega, &basis, &coords);
            if let Some(t) = eval(&w)? {
                let rn = residual(&t.exit.expect("exited").x);
                if rn.norm() < r.norm() {
                    omega = w;
                    current = t;
                    r = rn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.norm() > 1e-9 * a {
        return Err(FlowError::NoConvergence {
            reason: format!("exit mismatch {:.3e}", r.norm()),
        });
    }
    if current.signature() != sig {
        return Err(FlowError::CombinatoricsChanged);
    }
    Ok(current)
}

/// Checks whether `p` is on the body boundary within the scene tolerance.
pub fn on_boundary<const D: usize>(scene: &Scene<D>, body: &ConvexBody<D>, p: &Vector<D>) -> bool {
    body.normalized_value(p).abs() <= BOUNDARY_TOL * scene.scale()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disc_scene, two_ellipse_example, BoundingSphere};
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64) -> Vector<2> {
        Vector::<2>::new(x, y)
    }

    fn one_disc() -> Scene<2> {
        disc_scene(4.0, &[([-2.0, 0.0], 1.0)])
    }

    #[test]
    fn head_on_hit_and_diameter_exit() {
        let hit = first_intersection(&one_disc(), &v(-4.0, 0.0), &v(1.0, 0.0)).unwrap();
        match hit {
            Intersection::Hit {
                body,
                point,
                length,
            } => {
                assert_eq!(body, 1);
                assert_relative_eq!(point, v(-3.0, 0.0), epsilon = 1e-15);
                assert_relative_eq!(length, 1.0, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        match first_intersection(&empty, &v(-4.0, 0.0), &v(1.0, 0.0)).unwrap() {
            Intersection::ExitS0 { point, length } => {
                assert_relative_eq!(point, v(4.0, 0.0), epsilon = 1e-15);
                assert_relative_eq!(length, 8.0, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn example_scene_hit_matches_marching_oracle() {
        let scene = two_ellipse_example();
        let origin = v(-4.0, 0.0);
        let dir = v(1.0, 0.0);
        // March at 1e-4 and bisect the first sign change of any body field.
        let f = |s: f64| {
            scene
                .bodies
                .iter()
                .map(|b| b.value(&(origin + s * dir)))
                .fold(f64::INFINITY, f64::min)
        };
        let mut s = 1e-9;
        while f(s + 1e-4) > 0.0 {
            s += 1e-4;
        }
        let (mut lo, mut hi) = (s, s + 1e-4);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        match first_intersection(&scene, &origin, &dir).unwrap() {
            Intersection::Hit { body, length, .. } => {
                assert_eq!(body, 2);
                assert!((length - lo).abs() < 1e-12, "{length} vs {lo}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reflect_examples() {
        let out = reflect(&v(1.0, 0.0), &v(-1.0, 0.0), 1e-7).unwrap();
        assert_relative_eq!(out, v(-1.0, 0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let out = reflect(&v(h, -h), &v(0.0, 1.0), 1e-7).unwrap();
        assert_relative_eq!(out, v(h, h), epsilon = 1e-16);
        assert!(matches!(
            reflect(&v(1.0, 0.0), &v(0.0, 1.0), 1e-7),
            Err(FlowError::TangentIncidence { .. })
        ));
    }

    #[test]
    fn radial_bounce_trace() {
        let t = trace(
            &one_disc(),
            PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)),
            &TraceLimits::default(),
        )
        .unwrap();
        assert_eq!(t.status, TraceStatus::Exited);
        assert_eq!(t.reflections.len(), 1);
        assert_relative_eq!(t.reflections[0].point, v(-3.0, 0.0), epsilon = 1e-15);
        let exit = t.exit.unwrap();
        assert_relative_eq!(exit.x, v(-4.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(exit.u, v(-1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(t.total_time, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn period_two_orbit_is_trapped_from_inside_only() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)]);
        let limits = TraceLimits::default();
        let t = trace(&scene, PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)), &limits).unwrap();
        assert_eq!(t.status, TraceStatus::Exited);
        assert_eq!(t.reflections.len(), 1);
        assert_relative_eq!(t.total_time, 2.0, epsilon = 1e-15);
        let inner = trace_from(&scene, v(-1.0, 0.0), v(1.0, 0.0), &limits).unwrap();
        assert_eq!(inner.status, TraceStatus::BudgetTrapped);
    }

    #[test]
    fn invalid_entry_rejected() {
        let err = trace(
            &one_disc(),
            PhasePoint::new(v(-4.0, 0.0), v(-1.0, 0.0)),
            &TraceLimits::default(),
        )
        .unwrap_err();
        assert_eq!(err, FlowError::InvalidEntry);
    }

    #[test]
    fn cross_section_map_errors() {
        let scene = one_disc();
        // Graze the disc top: tangent line y = 1 from the S0 point with y = 1.
        let x = v(-(15f64).sqrt(), 1.0);
        let r = cross_section_map(
            &scene,
            PhasePoint::new(x, v(1.0, 0.0)),
            &TraceLimits::default(),
        );
        assert!(matches!(r, Err(FlowError::Tangency)) || r.is_ok());
        let ok = cross_section_map(
            &scene,
            PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)),
            &TraceLimits::default(),
        )
        .unwrap();
        assert_eq!(ok.exit, ok.trajectory.exit.unwrap());
    }

    #[test]
    fn straight_line_exit_map_is_regular() {
        let empty = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        let u = v(1.0, 0.3).normalize();
        let rep =
            regularity_jacobian(&empty, &v(-4.0, 0.0), &u, 1e-6, &TraceLimits::default()).unwrap();
        assert!(rep.regular && rep.determinant.abs() > 0.0);
    }

    #[test]
    fn head_on_jacobian_richardson_consistent() {
        let scene = one_disc();
        let lim = TraceLimits::default();
        let x = v(-4.0, 0.0);
        let u = v(1.0, 0.0);
        let a = regularity_jacobian(&scene, &x, &u, 1e-6, &lim).unwrap();
        let b = regularity_jacobian(&scene, &x, &u, 5e-7, &lim).unwrap();
        assert!(
            (a.determinant.abs() - b.determinant.abs()).abs() < 1e-4 * a.determinant.abs().max(1.0)
        );
        // Closed form: a ray tilted by e from head-on hits at angle ~e/... and
        // the exit displacement per radian is 1 + 2*1*(1 + 1) * ... check sign only.
        assert!(a.regular);
    }

    #[test]
    fn continuation_identity_returns_seed() {
        let scene = one_disc();
        let lim = TraceLimits::default();
        let seed = trace(&scene, PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)), &lim).unwrap();
        let same =
            two_point_continuation(&scene, &seed, (v(-4.0, 0.0), v(-4.0, 0.0)), &lim).unwrap();
        assert_eq!(same, seed);
    }

    #[test]
    fn continuation_follows_rotated_exit() {
        let scene = one_disc();
        let lim = TraceLimits::default();
        let seed = trace(&scene, PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)), &lim).unwrap();
        let th = std::f64::consts::PI + 1e-3;
        let y = scene.s0.point_at(th);
        let cont = two_point_continuation(&scene, &seed, (v(-4.0, 0.0), y), &lim).unwrap();
        assert_eq!(cont.body_sequence(), vec![1]);
        assert!((cont.exit.unwrap().x - y).norm() < 1e-9 * 4.0);
    }

    #[test]
    fn three_dimensional_trace() {
        let s0 = BoundingSphere::new(Vector::<3>::zeros(), 4.0).unwrap();
        let ball =
            crate::geometry::ConvexBody::ball(1, Vector::<3>::new(-2.0, 0.0, 0.0), 1.0).unwrap();
        let scene = Scene::new(s0, vec![ball]);
        let t = trace(
            &scene,
            PhasePoint::new(
                Vector::<3>::new(-4.0, 0.0, 0.0),
                Vector::<3>::new(1.0, 0.0, 0.0),
            ),
            &TraceLimits::default(),
        )
        .unwrap();
        assert_eq!(t.reflections.len(), 1);
        assert_relative_eq!(t.total_time, 2.0, epsilon = 1e-15);
        let u = Vector::<3>::new(1.0, 0.2, 0.1).normalize();
        let rep = regularity_jacobian(
            &scene,
            &Vector::<3>::new(-4.0, 0.0, 0.0),
            &u,
            1e-6,
            &TraceLimits::default(),
        )
        .unwrap();
        assert_eq!(rep.jacobian.nrows(), 2);
        assert!(rep.regular);
    }
}
