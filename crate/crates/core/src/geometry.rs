//! Bounding sphere, strictly convex bodies and the pointwise geometric
//! queries the tracer and the reconstruction need.
//!
//! Every body is the sublevel set `F <= 0` of a smooth field. The built-in
//! kinds (ball/disc and rotated ellipse/ellipsoid) are quadrics
//! `F(p) = (p - c)^T M (p - c) - 1` with `M` symmetric positive definite,
//! so value, gradient and Hessian are all closed form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::error::GeometryError;

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

/// Relative tolerance for "on the boundary" (scaled by the S0 radius).
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Relative clearance required between bodies and between bodies and S0.
pub const CLEARANCE_TOL: f64 = 1e-6;
const GRADIENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingSphere<const D: usize> {
    pub center: Vector<D>,
    pub radius: f64,
}

impl<const D: usize> BoundingSphere<D> {
    pub fn new(center: Vector<D>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// Unit inward normal at a point of the sphere.
    pub fn inward_normal(&self, x: &Vector<D>) -> Vector<D> {
        (self.center - x).normalize()
    }

    pub fn contains(&self, p: &Vector<D>) -> bool {
        (p - self.center).norm() < self.radius
    }
}

impl BoundingSphere<2> {
    /// Point of the circle at polar angle `theta` about the center.
    pub fn point_at(&self, theta: f64) -> Vector<2> {
        self.center + self.radius * Vector::<2>::new(theta.cos(), theta.sin())
    }

    /// Polar angle of `p` about the center, in `(-pi, pi]`.
    pub fn angle_of(&self, p: &Vector<2>) -> f64 {
        let d = p - self.center;
        d.y.atan2(d.x)
    }

    /// Counterclockwise unit tangent at polar angle `theta`.
    pub fn tangent_at(&self, theta: f64) -> Vector<2> {
        Vector::<2>::new(-theta.sin(), theta.cos())
    }
}

/// A user supplied smooth field whose sublevel set `F <= 0` is a strictly
/// convex body.
pub trait ImplicitField<const D: usize>: Send + Sync {
    fn value(&self, p: &Vector<D>) -> f64;
    fn gradient(&self, p: &Vector<D>) -> Vector<D>;
    fn hessian(&self, p: &Vector<D>) -> Matrix<D>;
    /// Any point strictly inside the body.
    fn interior_point(&self) -> Vector<D>;
}

#[derive(Clone)]
pub enum Shape<const D: usize> {
    Ball {
        center: Vector<D>,
        radius: f64,
    },
    /// `axes` holds the unit principal axes as columns, `semi_axes` the
    /// matching semi-axis lengths.
    Ellipsoid {
        center: Vector<D>,
        semi_axes: Vector<D>,
        axes: Matrix<D>,
    },
    Implicit(Arc<dyn ImplicitField<D>>),
}

impl<const D: usize> fmt::Debug for Shape<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", &center.as_slice())
                .field("radius", radius)
                .finish(),
            Shape::Ellipsoid {
                center, semi_axes, ..
            } => f
                .debug_struct("Ellipsoid")
                .field("center", &center.as_slice())
                .field("semi_axes", &semi_axes.as_slice())
                .finish(),
            Shape::Implicit(_) => f.write_str("Implicit(..)"),
        }
    }
}

/// Quadric form `(p - c)^T m (p - c) - 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Quadric<const D: usize> {
    pub center: Vector<D>,
    pub m: Matrix<D>,
}

#[derive(Debug, Clone)]
pub struct ConvexBody<const D: usize> {
    pub id: usize,
    pub shape: Shape<D>,
    quadric: Option<Quadric<D>>,
}

impl<const D: usize> ConvexBody<D> {
    pub fn ball(id: usize, center: Vector<D>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        let m = Matrix::<D>::identity() / (radius * radius);
        Ok(Self {
            id,
            shape: Shape::Ball { center, radius },
            quadric: Some(Quadric { center, m }),
        })
    }

    /// `axes` columns must be orthonormal.
    pub fn ellipsoid(
        id: usize,
        center: Vector<D>,
        semi_axes: Vector<D>,
        axes: Matrix<D>,
    ) -> Result<Self, GeometryError> {
        if semi_axes.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(GeometryError::InvalidSemiAxes(
                semi_axes.as_slice().to_vec(),
            ));
        }
        let ortho = (axes.transpose() * axes - Matrix::<D>::identity()).norm();
        if ortho > 1e-9 {
            return Err(GeometryError::NonOrthonormalAxes);
        }
        let inv_sq = Vector::<D>::from_fn(|i, _| 1.0 / (semi_axes[i] * semi_axes[i]));
        let m = axes * Matrix::<D>::from_diagonal(&inv_sq) * axes.transpose();
        Ok(Self {
            id,
            shape: Shape::Ellipsoid {
                center,
                semi_axes,
                axes,
            },
            quadric: Some(Quadric { center, m }),
        })
    }

    pub fn implicit(id: usize, field: Arc<dyn ImplicitField<D>>) -> Self {
        Self {
            id,
            shape: Shape::Implicit(field),
            quadric: None,
        }
    }

    pub(crate) fn quadric(&self) -> Option<&Quadric<D>> {
        self.quadric.as_ref()
    }

    /// A point strictly inside the body.
    pub fn interior_point(&self) -> Vector<D> {
        match &self.shape {
            Shape::Ball { center, .. } | Shape::Ellipsoid { center, .. } => *center,
            Shape::Implicit(f) => f.interior_point(),
        }
    }

    pub fn value(&self, p: &Vector<D>) -> f64 {
        match &self.quadric {
            Some(q) => {
                let d = p - q.center;
                d.dot(&(q.m * d)) - 1.0
            }
            None => match &self.shape {
                Shape::Implicit(f) => f.value(p),
                _ => unreachable!("quadric shapes carry their form"),
            },
        }
    }

    pub fn gradient(&self, p: &Vector<D>) -> Vector<D> {
        match &self.quadric {
            Some(q) => 2.0 * (q.m * (p - q.center)),
            None => match &self.shape {
                Shape::Implicit(f) => f.gradient(p),
                _ => unreachable!("quadric shapes carry their form"),
            },
        }
    }

    pub fn hessian(&self, p: &Vector<D>) -> Matrix<D> {
        match &self.quadric {
            Some(q) => 2.0 * q.m,
            None => match &self.shape {
                Shape::Implicit(f) => f.hessian(p),
                _ => unreachable!("quadric shapes carry their form"),
            },
        }
    }

    /// `F / |grad F|`, a first-order signed distance to the boundary.
    pub fn normalized_value(&self, p: &Vector<D>) -> f64 {
        let g = self.gradient(p).norm();
        if g > GRADIENT_TOL {
            self.value(p) / g
        } else {
            self.value(p)
        }
    }

    /// Boundary point on the ray from the interior point in direction `dir`.
    pub fn radial_boundary_point(&self, dir: &Vector<D>) -> Vector<D> {
        let c = self.interior_point();
        let dir = dir.normalize();
        if let Some(q) = &self.quadric {
            // (c - qc + s d)^T M (c - qc + s d) = 1 with c == qc
            let s = 1.0 / dir.dot(&(q.m * dir)).sqrt();
            return c + s * dir;
        }
        let mut hi = 1.0;
        while self.value(&(c + hi * dir)) <= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(&(c + mid * dir)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c + 0.5 * (lo + hi) * dir
    }

    /// Boundary sample used for validation and plotting. In 2D the samples
    /// are ordered counterclockwise.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vector<D>> {
        sphere_directions::<D>(count)
            .iter()
            .map(|d| self.radial_boundary_point(d))
            .collect()
    }

    /// Nearest boundary point to `q`.
    pub fn nearest_boundary_point(&self, q: &Vector<D>) -> Vector<D> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d = q - center;
                let n = d.norm();
                if n < 1e-300 {
                    let mut e = Vector::<D>::zeros();
                    e[0] = 1.0;
                    center + *radius * e
                } else {
                    center + d * (*radius / n)
                }
            }
            Shape::Ellipsoid {
                center,
                semi_axes,
                axes,
            } => {
                let local = axes.transpose() * (q - center);
                let foot = nearest_on_ellipsoid(semi_axes, &local);
                center + axes * foot
            }
            Shape::Implicit(_) => self.nearest_boundary_point_iterative(q),
        }
    }

    fn nearest_boundary_point_iterative(&self, q: &Vector<D>) -> Vector<D> {
        let c = self.interior_point();
        let start = if (q - c).norm() > 0.0 {
            q - c
        } else {
            Vector::<D>::from_element(1.0)
        };
        let mut p = self.radial_boundary_point(&start);
        for _ in 0..200 {
            let n = self.gradient(&p).normalize();
            let along = (q - p).dot(&n);
            let target = q - along * n;
            let next = self.project_along_gradient(&target);
            let moved = (next - p).norm();
            p = next;
            if moved < 1e-15 * (1.0 + p.norm()) {
                break;
            }
        }
        p
    }

    fn project_along_gradient(&self, p: &Vector<D>) -> Vector<D> {
        let mut x = *p;
        for _ in 0..100 {
            let g = self.gradient(&x);
            let gg = g.norm_squared();
            if gg < GRADIENT_TOL * GRADIENT_TOL {
                break;
            }
            let v = self.value(&x);
            let step = v / gg * g;
            x -= step;
            if step.norm() < 1e-16 * (1.0 + x.norm()) {
                break;
            }
        }
        x
    }

    /// Signed Euclidean distance (negative inside).
    pub fn signed_distance(&self, q: &Vector<D>) -> f64 {
        let foot = self.nearest_boundary_point(q);
        let d = (q - foot).norm();
        if self.value(q) < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Projection onto the solid body.
    fn project_solid(&self, q: &Vector<D>) -> Vector<D> {
        if self.value(q) <= 0.0 {
            *q
        } else {
            self.nearest_boundary_point(q)
        }
    }
}

/// Nearest point on the axis-aligned ellipsoid `sum (y_i/s_i)^2 = 1` to `z`.
///
/// Solves the Lagrange condition `y_i = s_i^2 z_i / (s_i^2 + lambda)` for the
/// unique root `lambda > -min s_i^2` of the secular equation by safeguarded
/// bisection on a bracket.
fn nearest_on_ellipsoid<const D: usize>(s: &Vector<D>, z: &Vector<D>) -> Vector<D> {
    // Work in the positive orthant and restore signs at the end.
    let sign = z.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
    let za = z.abs();
    let smin2 = s.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let secular = |lam: f64| -> f64 {
        (0..D)
            .map(|i| {
                let r = s[i] * za[i] / (s[i] * s[i] + lam);
                r * r
            })
            .sum::<f64>()
            - 1.0
    };
    // Degenerate interior case: the components along the smallest axes
    // vanish and the nearest point may sit off the coordinate plane.
    let all_nonzero = za.iter().all(|v| *v > 1e-300);
    if !all_nonzero {
        // Fall back to the general iterative scheme on the explicit field.
        return nearest_on_ellipsoid_generic(s, z);
    }
    let mut lo = -smin2 * (1.0 - 1e-15);
    if secular(lo) < 0.0 {
        return nearest_on_ellipsoid_generic(s, z);
    }
    // Each term is at most (z_i/|z|)^2 here, so the secular value is <= 0.
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let mut hi = smax * za.norm();
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if secular(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    let y = Vector::<D>::from_fn(|i, _| s[i] * s[i] * za[i] / (s[i] * s[i] + lam));
    // Snap onto the surface radially to remove residual bracket error.
    let f: f64 = (0..D).map(|i| (y[i] / s[i]).powi(2)).sum();
    let y = y / f.sqrt();
    y.component_mul(&sign)
}

fn nearest_on_ellipsoid_generic<const D: usize>(s: &Vector<D>, z: &Vector<D>) -> Vector<D> {
    let body = ConvexBody::ellipsoid(0, Vector::<D>::zeros(), *s, Matrix::<D>::identity())
        .expect("positive semi-axes");
    // Perturb off the degenerate plane; the nearest point is continuous.
    let nudged = z.map(|v| if v.abs() < 1e-300 { 1e-12 } else { v });
    body.nearest_boundary_point_iterative(&nudged)
}

/// Deterministic, roughly uniform unit directions.
pub fn sphere_directions<const D: usize>(count: usize) -> Vec<Vector<D>> {
    let count = count.max(1);
    match D {
        2 => (0..count)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / count as f64;
                Vector::<D>::from_fn(|k, _| if k == 0 { th.cos() } else { th.sin() })
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    let v = [r * phi.cos(), r * phi.sin(), z];
                    Vector::<D>::from_fn(|k, _| v[k])
                })
                .collect()
        }
        _ => (0..count)
            .map(|i| {
                let mut v = Vector::<D>::zeros();
                v[i % D] = if (i / D).is_multiple_of(2) { 1.0 } else { -1.0 };
                v
            })
            .collect(),
    }
}

/// Orthonormal basis of the tangent space orthogonal to `normal`.
///
/// Built from the coordinate axes ordered by increasing `|normal_i|`
/// followed by Gram-Schmidt, so the chart is a deterministic function of
/// `normal`.
pub fn tangent_basis<const D: usize>(normal: &Vector<D>) -> Vec<Vector<D>> {
    let n = normal.normalize();
    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&a, &b| {
        n[a].abs()
            .partial_cmp(&n[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut basis: Vec<Vector<D>> = Vec::with_capacity(D - 1);
    for &axis in order.iter() {
        if basis.len() == D - 1 {
            break;
        }
        let mut v = Vector::<D>::zeros();
        v[axis] = 1.0;
        v -= v.dot(&n) * n;
        for b in &basis {
            v -= v.dot(b) * b;
        }
        let len = v.norm();
        if len > 1e-8 {
            basis.push(v / len);
        }
    }
    basis
}

/// Value and gradient of the body's field at `p`.
pub fn implicit_eval<const D: usize>(body: &ConvexBody<D>, p: &Vector<D>) -> (f64, Vector<D>) {
    (body.value(p), body.gradient(p))
}

pub fn outward_normal<const D: usize>(
    body: &ConvexBody<D>,
    p: &Vector<D>,
) -> Result<Vector<D>, GeometryError> {
    let g = body.gradient(p);
    let n = g.norm();
    if n < GRADIENT_TOL {
        return Err(GeometryError::DegenerateGradient { norm: n });
    }
    Ok(g / n)
}

/// Boundary curvature at `p`. In 2D this is the signed curvature with
/// respect to the outward normal; in higher dimension the smallest
/// principal curvature.
pub fn boundary_curvature<const D: usize>(
    body: &ConvexBody<D>,
    p: &Vector<D>,
) -> Result<f64, GeometryError> {
    let g = body.gradient(p);
    let gn = g.norm();
    if gn < GRADIENT_TOL {
        return Err(GeometryError::DegenerateGradient { norm: gn });
    }
    let h = body.hessian(p);
    let basis = tangent_basis(&g);
    let k = basis.len();
    let mut shape = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            shape[(i, j)] = basis[i].dot(&(h * basis[j])) / gn;
        }
    }
    let kappa = if k == 1 {
        shape[(0, 0)]
    } else {
        shape
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    if kappa <= 0.0 {
        return Err(GeometryError::NonConvexPoint { curvature: kappa });
    }
    Ok(kappa)
}

#[derive(Debug, Clone)]
pub struct Scene<const D: usize> {
    pub s0: BoundingSphere<D>,
    pub bodies: Vec<ConvexBody<D>>,
}

impl<const D: usize> Scene<D> {
    pub fn new(s0: BoundingSphere<D>, bodies: Vec<ConvexBody<D>>) -> Self {
        Self { s0, bodies }
    }

    pub fn empty(s0: BoundingSphere<D>) -> Self {
        Self {
            s0,
            bodies: Vec::new(),
        }
    }

    /// Scene scale `a`, the S0 radius.
    pub fn scale(&self) -> f64 {
        self.s0.radius
    }

    pub fn body(&self, id: usize) -> Option<&ConvexBody<D>> {
        self.bodies.iter().find(|b| b.id == id)
    }

    /// True when `p` lies outside every body (closure of the exterior).
    pub fn in_exterior(&self, p: &Vector<D>) -> bool {
        self.bodies.iter().all(|b| b.value(p) >= 0.0)
    }

    /// Keep only the listed body ids.
    pub fn restricted_to(&self, ids: &[usize]) -> Self {
        Self {
            s0: self.s0,
            bodies: self
                .bodies
                .iter()
                .filter(|b| ids.contains(&b.id))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneViolation {
    Overlap {
        a: usize,
        b: usize,
        distance: f64,
    },
    NotContained {
        body: usize,
        clearance: f64,
    },
    NonConvex {
        body: usize,
        point: Vec<f64>,
        curvature: f64,
    },
    DuplicateId {
        id: usize,
    },
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneViolation::Overlap { a, b, distance } => {
                write!(
                    f,
                    "bodies {a} and {b} overlap or touch (distance {distance:.3e})"
                )
            }
            SceneViolation::NotContained { body, clearance } => {
                write!(
                    f,
                    "body {body} is not strictly inside S0 (clearance {clearance:.3e})"
                )
            }
            SceneViolation::NonConvex {
                body, curvature, ..
            } => write!(
                f,
                "body {body} is not strictly convex (curvature {curvature:.3e})"
            ),
            SceneViolation::DuplicateId { id } => write!(f, "duplicate body id {id}"),
        }
    }
}

/// Minimum distance between two convex bodies and the closest pair, by
/// alternating projections. Returns distance 0 when they intersect.
pub fn body_distance<const D: usize>(
    a: &ConvexBody<D>,
    b: &ConvexBody<D>,
) -> (f64, Vector<D>, Vector<D>) {
    let mut pa = a.interior_point();
    let mut pb = b.project_solid(&pa);
    for _ in 0..20_000 {
        let na = a.project_solid(&pb);
        let nb = b.project_solid(&na);
        let moved = (na - pa).norm() + (nb - pb).norm();
        pa = na;
        pb = nb;
        if moved < 1e-15 {
            break;
        }
    }
    if b.value(&pa) <= 0.0 || a.value(&pb) <= 0.0 {
        return (0.0, pa, pb);
    }
    ((pa - pb).norm(), pa, pb)
}

pub fn validate_scene<const D: usize>(scene: &Scene<D>) -> Vec<SceneViolation> {
    let mut out = Vec::new();
    let a = scene.scale();
    let clearance = CLEARANCE_TOL * a;
    let samples_per_body = if D == 2 { 720 } else { 2048 };

    for (i, bi) in scene.bodies.iter().enumerate() {
        if scene.bodies[..i].iter().any(|bj| bj.id == bi.id) {
            out.push(SceneViolation::DuplicateId { id: bi.id });
        }
    }

    let samples: Vec<Vec<Vector<D>>> = scene
        .bodies
        .iter()
        .map(|b| b.boundary_samples(samples_per_body))
        .collect();

    for (b, pts) in scene.bodies.iter().zip(&samples) {
        let far = pts
            .iter()
            .map(|p| (p - scene.s0.center).norm())
            .fold(0.0, f64::max);
        let gap = a - far;
        if gap <= clearance {
            out.push(SceneViolation::NotContained {
                body: b.id,
                clearance: gap,
            });
        }
        for p in pts {
            match boundary_curvature(b, p) {
                Ok(k) if k > 0.0 => {}
                Ok(k) => {
                    out.push(SceneViolation::NonConvex {
                        body: b.id,
                        point: p.as_slice().to_vec(),
                        curvature: k,
                    });
                    break;
                }
                Err(GeometryError::NonConvexPoint { curvature }) => {
                    out.push(SceneViolation::NonConvex {
                        body: b.id,
                        point: p.as_slice().to_vec(),
                        curvature,
                    });
                    break;
                }
                Err(_) => {
                    out.push(SceneViolation::NonConvex {
                        body: b.id,
                        point: p.as_slice().to_vec(),
                        curvature: 0.0,
                    });
                    break;
                }
            }
        }
    }

    for i in 0..scene.bodies.len() {
        for j in (i + 1)..scene.bodies.len() {
            let (bi, bj) = (&scene.bodies[i], &scene.bodies[j]);
            let sampled_overlap = samples[i].iter().any(|p| bj.value(p) <= 0.0)
                || samples[j].iter().any(|p| bi.value(p) <= 0.0)
                || bj.value(&bi.interior_point()) <= 0.0
                || bi.value(&bj.interior_point()) <= 0.0;
            let (dist, _, _) = body_distance(bi, bj);
            let dist = if sampled_overlap { 0.0 } else { dist };
            if dist <= clearance {
                out.push(SceneViolation::Overlap {
                    a: bi.id,
                    b: bj.id,
                    distance: dist,
                });
            }
        }
    }
    out
}

/// 2D rotation by `deg` degrees, as a matrix whose columns are the rotated
/// coordinate axes.
pub fn rotation_2d(deg: f64) -> Matrix<2> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix::<2>::new(c, -s, s, c)
}

/// 3D rotation from extrinsic x-y-z angles in degrees.
pub fn rotation_3d(deg: [f64; 3]) -> Matrix<3> {
    let r = nalgebra::Rotation3::from_euler_angles(
        deg[0].to_radians(),
        deg[1].to_radians(),
        deg[2].to_radians(),
    );
    *r.matrix()
}

/// Two-ellipse test scene: S0 of radius 4 about the
/// origin, body 1 `4(x+6/5)^2/9 + 4(y+13/10)^2 = 1`, body 2
/// `(x-y)^2/8 + (x+y-1)^2/2 = 1`.
pub fn two_ellipse_example() -> Scene<2> {
    let s0 = BoundingSphere::new(Vector::<2>::zeros(), 4.0).expect("positive radius");
    let b1 = ConvexBody::ellipsoid(
        1,
        Vector::<2>::new(-1.2, -1.3),
        Vector::<2>::new(1.5, 0.5),
        Matrix::<2>::identity(),
    )
    .expect("valid ellipse");
    let b2 = ConvexBody::ellipsoid(
        2,
        Vector::<2>::new(0.5, 0.5),
        Vector::<2>::new(2.0, 1.0),
        rotation_2d(-45.0),
    )
    .expect("valid ellipse");
    Scene::new(s0, vec![b1, b2])
}

/// Circle scene helper: S0 radius `a` about the origin and discs given as
/// `(center, radius)`, numbered from 1.
pub fn disc_scene(a: f64, discs: &[([f64; 2], f64)]) -> Scene<2> {
    let s0 = BoundingSphere::new(Vector::<2>::zeros(), a).expect("positive radius");
    let bodies = discs
        .iter()
        .enumerate()
        .map(|(i, (c, r))| {
            ConvexBody::ball(i + 1, Vector::<2>::new(c[0], c[1]), *r).expect("positive radius")
        })
        .collect();
    Scene::new(s0, bodies)
}
