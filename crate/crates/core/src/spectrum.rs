//! Travelling-time spectrum sampling for planar scenes: direction sweeps,
//! two-point geodesics by bisection on the exit offset, the diagonal
//! spectrum and the echograph.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flow::{trace_summary, PhasePoint, TraceLimits, TraceStatus, TraceSummary};
use crate::geometry::{BoundingSphere, Scene, Shape, Vector};

/// Default number of inward directions in a root-finding sweep; the angular
/// resolution is `pi / 2048 = 2 pi / 4096`.
pub const DEFAULT_SWEEP: usize = 2048;
/// Default angular stencil step for travelling-time derivatives.
pub const DEFAULT_STENCIL: f64 = 1e-4;
/// Exit-offset residual above which a bisection result is rejected.
const ROOT_RESIDUAL: f64 = 1e-9;
/// Diagonal times closer than this are the same echo.
const SAME_TIME: f64 = 1e-10;
/// Reflexivity threshold on `|u + v|` for oracle directions.
pub const REFLEXIVE_TOL: f64 = 1e-6;
/// Second-difference bound for the time-only reflexivity test.
const STENCIL_CURVATURE_TOL: f64 = 1e-5;

/// Wrap an angle into `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wrap an angle difference into `(-pi, pi]`.
pub fn wrap_diff(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Uniform grid of polar angles `2 pi (i + phase) / count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub count: usize,
    pub phase: f64,
}

impl AngularGrid {
    pub fn new(count: usize) -> Self {
        Self { count, phase: 0.0 }
    }

    pub fn with_phase(count: usize, phase: f64) -> Self {
        Self { count, phase }
    }

    pub fn step(&self) -> f64 {
        TAU / self.count as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        (i as f64 + self.phase) * self.step()
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.angle(i)).collect()
    }

    /// Index of the nearest grid angle, with wrap-around.
    pub fn nearest(&self, theta: f64) -> usize {
        let f = wrap_angle(theta) / self.step() - self.phase;
        (f.round() as i64).rem_euclid(self.count as i64) as usize
    }
}

/// Inward direction offsets `phi_j = -pi/2 + j pi / count`, `0 < j < count`,
/// measured from the inward normal.
pub fn direction_offsets(count: usize) -> Vec<f64> {
    (1..count)
        .map(|j| -FRAC_PI_2 + j as f64 * PI / count as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetMode {
    Oracle,
    Measured,
}

impl DatasetMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetMode::Oracle => "oracle",
            DatasetMode::Measured => "measured",
        }
    }
}

/// One triple `(x, y, t)`. Reflection count, branch id and directions are
/// oracle fields and are absent in measured data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    pub x_angle: f64,
    pub y_angle: f64,
    pub x: Vector<2>,
    pub y: Vector<2>,
    pub t: f64,
    pub k: Option<usize>,
    pub branch_id: Option<u64>,
    pub entry_dir: Option<Vector<2>>,
    pub exit_dir: Option<Vector<2>>,
}

impl SpectrumSample {
    pub fn strip(&self) -> Self {
        Self {
            k: None,
            branch_id: None,
            entry_dir: None,
            exit_dir: None,
            ..*self
        }
    }

    /// The reversed triple `(y, x, t)`.
    pub fn reversed(&self) -> Self {
        Self {
            x_angle: self.y_angle,
            y_angle: self.x_angle,
            x: self.y,
            y: self.x,
            t: self.t,
            k: self.k,
            branch_id: self.branch_id,
            entry_dir: self.exit_dir.map(|v| -v),
            exit_dir: self.entry_dir.map(|u| -u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridDescription {
    /// Full direction sweep from every grid point.
    Sweep { x: AngularGrid, directions: usize },
    /// Two-point geodesics on a product grid of entry and exit angles.
    Pairs {
        x: AngularGrid,
        y: AngularGrid,
        sweep: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDataset {
    pub scene_hash: String,
    pub grid: GridDescription,
    pub mode: DatasetMode,
    pub samples: Vec<SpectrumSample>,
    /// Rays dropped because they were trapped or tangential.
    pub skipped: usize,
}

impl SpectrumDataset {
    pub fn measured(&self) -> Self {
        Self {
            mode: DatasetMode::Measured,
            samples: self.samples.iter().map(|s| s.strip()).collect(),
            ..self.clone()
        }
    }
}

/// SHA-256 of a canonical text form of the scene.
pub fn scene_hash<const D: usize>(scene: &Scene<D>) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "s0 {:?} {:?};",
        scene.s0.center.as_slice(),
        scene.s0.radius
    );
    for b in &scene.bodies {
        match &b.shape {
            Shape::Ball { center, radius } => {
                let _ = write!(s, "ball {} {:?} {:?};", b.id, center.as_slice(), radius);
            }
            Shape::Ellipsoid {
                center,
                semi_axes,
                axes,
            } => {
                let _ = write!(
                    s,
                    "ellipsoid {} {:?} {:?} {:?};",
                    b.id,
                    center.as_slice(),
                    semi_axes.as_slice(),
                    axes.as_slice()
                );
            }
            Shape::Implicit(_) => {
                let _ = write!(s, "implicit {};", b.id);
            }
        }
    }
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn exit_angle(scene: &Scene<2>, p: &Vector<2>) -> f64 {
    wrap_angle(scene.s0.angle_of(p))
}

/// Sweep every direction of the fan from every grid point and keep one
/// sample per exiting ray.
pub fn sample_spectrum(
    scene: &Scene<2>,
    x_grid: &AngularGrid,
    directions: usize,
    limits: &TraceLimits,
) -> SpectrumDataset {
    let offsets = direction_offsets(directions);
    let rows: Vec<(Vec<SpectrumSample>, usize)> = (0..x_grid.count)
        .into_par_iter()
        .map(|i| {
            let theta = x_grid.angle(i);
            let mut out = Vec::with_capacity(offsets.len());
            let mut skipped = 0;
            for &phi in &offsets {
                let entry = PhasePoint::planar_entry(scene, theta, phi);
                match trace_summary(scene, entry, limits) {
                    Ok(TraceSummary {
                        status: TraceStatus::Exited,
                        exit: Some(e),
                        total_time,
                        reflections,
                        signature,
                        ..
                    }) => {
                        let (x_angle, y_angle) = (wrap_angle(theta), exit_angle(scene, &e.x));
                        out.push(SpectrumSample {
                            x_angle,
                            y_angle,
                            x: scene.s0.point_at(x_angle),
                            y: scene.s0.point_at(y_angle),
                            t: total_time,
                            k: Some(reflections),
                            branch_id: Some(signature),
                            entry_dir: Some(entry.u),
                            exit_dir: Some(e.u),
                        })
                    }
                    _ => skipped += 1,
                }
            }
            (out, skipped)
        })
        .collect();
    let skipped = rows.iter().map(|r| r.1).sum();
    SpectrumDataset {
        scene_hash: scene_hash(scene),
        grid: GridDescription::Sweep {
            x: *x_grid,
            directions,
        },
        mode: DatasetMode::Oracle,
        samples: rows.into_iter().flat_map(|r| r.0).collect(),
        skipped,
    }
}

/// An `(x, y)`-geodesic found by the root finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geodesic {
    /// Entry offset from the inward normal at `x`.
    pub phi: f64,
    pub entry_dir: Vector<2>,
    pub exit_dir: Vector<2>,
    /// Travelling time, corrected to the exact target to first order.
    pub t: f64,
    pub k: usize,
    pub signature: u64,
    /// Remaining exit-angle mismatch.
    pub residual: f64,
}

#[derive(Clone, Copy)]
struct Shot {
    phi: f64,
    summary: TraceSummary<2>,
    exit_theta: f64,
}

fn shoot(scene: &Scene<2>, theta: f64, phi: f64, limits: &TraceLimits) -> Option<Shot> {
    let entry = PhasePoint::planar_entry(scene, theta, phi);
    let s = trace_summary(scene, entry, limits).ok()?;
    if s.status != TraceStatus::Exited {
        return None;
    }
    let e = s.exit?;
    Some(Shot {
        phi,
        summary: s,
        exit_theta: scene.s0.angle_of(&e.x),
    })
}

/// Bisection on the exit offset between two shots of one branch. Runs to
/// machine precision in the entry angle; gives up if the bracket leaves
/// the branch.
fn bisect_root(
    scene: &Scene<2>,
    theta: f64,
    target: f64,
    lo: &Shot,
    hi: &Shot,
    limits: &TraceLimits,
) -> Option<Geodesic> {
    let sig = lo.summary.signature;
    let g = |s: &Shot| wrap_diff(s.exit_theta - target);
    let mut a = *lo;
    let mut b = *hi;
    let mut ga = g(&a);
    for _ in 0..80 {
        let mid = 0.5 * (a.phi + b.phi);
        if mid <= a.phi.min(b.phi) || mid >= a.phi.max(b.phi) {
            break;
        }
        let m = shoot(scene, theta, mid, limits)?;
        if m.summary.signature != sig {
            return None;
        }
        let gm = g(&m);
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let best = if g(&a).abs() <= g(&b).abs() { a } else { b };
    finish_root(scene, target, &best)
}

fn finish_root(scene: &Scene<2>, target: f64, s: &Shot) -> Option<Geodesic> {
    let res = wrap_diff(s.exit_theta - target);
    if res.abs() > ROOT_RESIDUAL {
        return None;
    }
    let exit = s.summary.exit.expect("exited shot");
    let tangent = scene.s0.tangent_at(s.exit_theta);
    let t = s.summary.total_time - scene.s0.radius * exit.u.dot(&tangent) * res;
    Some(Geodesic {
        phi: s.phi,
        entry_dir: Vector::<2>::zeros(),
        exit_dir: exit.u,
        t,
        k: s.summary.reflections,
        signature: s.summary.signature,
        residual: res,
    })
}

/// Narrowest entry-angle interval the sweep refinement will split.
const MIN_BRACKET: f64 = 1e-10;
/// Exit-angle jump that forces a split even inside one branch.
const MAX_EXIT_JUMP: f64 = 0.25;

fn needs_split(a: &Option<Shot>, b: &Option<Shot>) -> bool {
    match (a, b) {
        (None, None) => false,
        (Some(a), Some(b)) => {
            a.summary.signature != b.summary.signature
                || a.summary.sides != b.summary.sides
                || wrap_diff(a.exit_theta - b.exit_theta).abs() > MAX_EXIT_JUMP
        }
        _ => true,
    }
}

/// Uniform sweep of entry offsets, refined by bisection wherever two
/// neighbours disagree on branch, on the side they pass a body, or on exit
/// point by a large jump. Narrow high-order branches hide between coarse
/// samples otherwise.
fn refined_sweep(
    scene: &Scene<2>,
    theta: f64,
    sweep: usize,
    limits: &TraceLimits,
) -> Vec<Option<Shot>> {
    let phis = direction_offsets(sweep);
    let base: Vec<(f64, Option<Shot>)> = phis
        .iter()
        .map(|&phi| (phi, shoot(scene, theta, phi, limits)))
        .collect();
    let mut budget = 32 * sweep;
    let mut out = Vec::with_capacity(base.len() * 2);
    for w in base.windows(2) {
        out.push(w[0].1);
        let mut stack = vec![(w[0], w[1])];
        // Depth-first, right half pushed first, so `out` stays sorted.
        while let Some(((pa, a), (pb, b))) = stack.pop() {
            if pb - pa <= MIN_BRACKET || budget == 0 || !needs_split(&a, &b) {
                if pa != w[0].0 {
                    out.push(a);
                }
                continue;
            }
            budget -= 1;
            let pm = 0.5 * (pa + pb);
            let m = shoot(scene, theta, pm, limits);
            stack.push(((pm, m), (pb, b)));
            stack.push(((pa, a), (pm, m)));
        }
    }
    if let Some(last) = base.last() {
        out.push(last.1);
    }
    out
}

/// All `(x, y)`-geodesics from the point at angle `theta` to each target
/// angle, found from a single direction sweep of `sweep` rays.
pub fn geodesics_from(
    scene: &Scene<2>,
    theta: f64,
    targets: &[f64],
    sweep: usize,
    limits: &TraceLimits,
) -> Vec<Vec<Geodesic>> {
    let shots = refined_sweep(scene, theta, sweep, limits);
    targets
        .iter()
        .map(|&target| {
            let mut found = Vec::new();
            for (j, s) in shots.iter().enumerate() {
                let Some(a) = s else { continue };
                let ga = wrap_diff(a.exit_theta - target);
                if ga == 0.0 {
                    if let Some(r) = finish_root(scene, target, a) {
                        found.push(r);
                    }
                    continue;
                }
                let Some(Some(b)) = shots.get(j + 1) else {
                    continue;
                };
                if a.summary.signature != b.summary.signature {
                    continue;
                }
                let gb = wrap_diff(b.exit_theta - target);
                if gb == 0.0 || (ga < 0.0) == (gb < 0.0) || (ga - gb).abs() >= PI {
                    continue;
                }
                if let Some(r) = bisect_root(scene, theta, target, a, b, limits) {
                    found.push(r);
                }
            }
            for r in &mut found {
                r.entry_dir = PhasePoint::planar_entry(scene, theta, r.phi).u;
            }
            found
        })
        .collect()
}

fn geodesic_sample(scene: &Scene<2>, x_angle: f64, y_angle: f64, g: &Geodesic) -> SpectrumSample {
    // Points follow from the stored angles so that a reloaded dataset is identical.
    let (x_angle, y_angle) = (wrap_angle(x_angle), wrap_angle(y_angle));
    SpectrumSample {
        x_angle,
        y_angle,
        x: scene.s0.point_at(x_angle),
        y: scene.s0.point_at(y_angle),
        t: g.t,
        k: Some(g.k),
        branch_id: Some(g.signature),
        entry_dir: Some(g.entry_dir),
        exit_dir: Some(g.exit_dir),
    }
}

/// Two-point spectrum on the product grid `x_grid x y_grid`.
pub fn pair_spectrum(
    scene: &Scene<2>,
    x_grid: &AngularGrid,
    y_grid: &AngularGrid,
    sweep: usize,
    limits: &TraceLimits,
) -> SpectrumDataset {
    let ys = y_grid.angles();
    let rows: Vec<Vec<SpectrumSample>> = (0..x_grid.count)
        .into_par_iter()
        .map(|i| {
            let theta = x_grid.angle(i);
            let found = geodesics_from(scene, theta, &ys, sweep, limits);
            let mut out = Vec::new();
            for (y, gs) in ys.iter().zip(&found) {
                for g in gs {
                    out.push(geodesic_sample(scene, theta, *y, g));
                }
            }
            out
        })
        .collect();
    SpectrumDataset {
        scene_hash: scene_hash(scene),
        grid: GridDescription::Pairs {
            x: *x_grid,
            y: *y_grid,
            sweep,
        },
        mode: DatasetMode::Oracle,
        samples: rows.into_iter().flatten().collect(),
        skipped: 0,
    }
}

/// Samples at one diagonal grid point: `(x, x)` and the stencil pairs
/// `(x, x + h)`, `(x, x - h)` along S0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagColumn {
    pub theta: f64,
    pub x: Vector<2>,
    pub center: Vec<SpectrumSample>,
    pub plus: Vec<SpectrumSample>,
    pub minus: Vec<SpectrumSample>,
}

impl DiagColumn {
    fn strip(&self) -> Self {
        let s = |v: &Vec<SpectrumSample>| v.iter().map(|x| x.strip()).collect();
        Self {
            theta: self.theta,
            x: self.x,
            center: s(&self.center),
            plus: s(&self.plus),
            minus: s(&self.minus),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalDataset {
    pub scene_hash: String,
    pub grid: AngularGrid,
    pub stencil: f64,
    pub sweep: usize,
    pub mode: DatasetMode,
    pub columns: Vec<DiagColumn>,
}

impl DiagonalDataset {
    pub fn measured(&self) -> Self {
        Self {
            mode: DatasetMode::Measured,
            columns: self.columns.iter().map(|c| c.strip()).collect(),
            ..self.clone()
        }
    }

    /// Flat list of all stored triples.
    pub fn samples(&self) -> impl Iterator<Item = &SpectrumSample> {
        self.columns
            .iter()
            .flat_map(|c| c.center.iter().chain(&c.plus).chain(&c.minus))
    }
}

/// The diagonal spectrum `T(x, x)` on a grid, with the stencil samples
/// needed for tangential derivatives.
pub fn diag_spectrum(
    scene: &Scene<2>,
    grid: &AngularGrid,
    stencil: f64,
    sweep: usize,
    limits: &TraceLimits,
) -> DiagonalDataset {
    let columns = (0..grid.count)
        .into_par_iter()
        .map(|i| {
            let theta = grid.angle(i);
            let targets = [theta, theta + stencil, theta - stencil];
            let found = geodesics_from(scene, theta, &targets, sweep, limits);
            let mk = |y: f64, gs: &Vec<Geodesic>| -> Vec<SpectrumSample> {
                gs.iter()
                    .map(|g| geodesic_sample(scene, theta, y, g))
                    .collect()
            };
            DiagColumn {
                theta: wrap_angle(theta),
                x: scene.s0.point_at(wrap_angle(theta)),
                center: mk(targets[0], &found[0]),
                plus: mk(targets[1], &found[1]),
                minus: mk(targets[2], &found[2]),
            }
        })
        .collect();
    DiagonalDataset {
        scene_hash: scene_hash(scene),
        grid: *grid,
        stencil,
        sweep,
        mode: DatasetMode::Oracle,
        columns,
    }
}

/// A point of the echograph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoPoint {
    pub x_angle: f64,
    pub x: [f64; 2],
    /// Round-trip time.
    pub t: f64,
    /// `x + (t/2) nu0(x)`, `nu0` the inward normal of S0.
    pub w: [f64; 2],
    pub reflexive: bool,
    pub order: Option<usize>,
    /// `dS/dtheta` of the diagonal branch, from the stencil (reflexive only).
    pub slope: Option<f64>,
}

impl EchoPoint {
    pub fn x_vec(&self) -> Vector<2> {
        Vector::<2>::new(self.x[0], self.x[1])
    }

    pub fn w_vec(&self) -> Vector<2> {
        Vector::<2>::new(self.w[0], self.w[1])
    }
}

/// Echograph point of a diagonal triple.
pub fn echo_point(s0: &BoundingSphere<2>, x_angle: f64, t: f64) -> Vector<2> {
    let x = s0.point_at(x_angle);
    x + 0.5 * t * s0.inward_normal(&x)
}

/// Stencil pairs `(t', t'')` compatible with a diagonal time `t`: both
/// within Lipschitz reach of `t` and with a small second difference.
fn stencil_pairs(
    t: f64,
    plus: &[SpectrumSample],
    minus: &[SpectrumSample],
    h: f64,
    a: f64,
) -> Vec<(usize, usize)> {
    let reach = 1.05 * h * a;
    let mut out = Vec::new();
    for (i, p) in plus.iter().enumerate() {
        if (p.t - t).abs() > reach {
            continue;
        }
        for (j, m) in minus.iter().enumerate() {
            if (m.t - t).abs() > reach {
                continue;
            }
            if (p.t + m.t - 2.0 * t).abs() <= STENCIL_CURVATURE_TOL {
                out.push((i, j));
            }
        }
    }
    out
}

/// Mismatch between two diagonal samples `(t, dS/dtheta)` spaced `delta`
/// apart and the trapezoid rule. Of order `delta^3` along one smooth
/// reflexive branch.
pub fn hermite_residual(t_i: f64, s_i: f64, t_j: f64, s_j: f64, delta: f64) -> f64 {
    (t_j - t_i - 0.5 * delta * (s_i + s_j)).abs()
}

/// Tolerance for [`hermite_residual`] at grid step `delta`.
pub fn hermite_tolerance(delta: f64, a: f64) -> f64 {
    (5.0 * delta.powi(3) * a).max(1e-9 * a)
}

/// Drop reflexive candidates that continue to no reflexive candidate in a
/// neighbouring column. Time-only data cannot tell a lone return whose
/// reverse was missed by the sweep from a reflexive one; the slope of
/// `S` along the diagonal can.
fn prune_isolated(points: &mut [EchoPoint], delta: f64, a: f64) {
    let tol = hermite_tolerance(delta, a);
    let mut cols: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match cols.last_mut() {
            Some(c) if c.0 == p.x_angle => c.1.push(i),
            _ => cols.push((p.x_angle, vec![i])),
        }
    }
    let n = cols.len();
    let mut keep = vec![false; points.len()];
    for c in 0..n {
        for &i in &cols[c].1 {
            let Some(si) = points[i].slope else { continue };
            let mut ok = false;
            for (nb, sign) in [((c + 1) % n, 1.0), ((c + n - 1) % n, -1.0)] {
                let d = wrap_diff(cols[nb].0 - cols[c].0);
                if (d.abs() - delta).abs() > 1e-9 || d.signum() != sign {
                    continue;
                }
                ok |= cols[nb].1.iter().any(|&j| {
                    points[j].reflexive
                        && points[j].slope.is_some_and(|sj| {
                            hermite_residual(points[i].t, si, points[j].t, sj, d) <= tol
                        })
                });
            }
            keep[i] = ok;
        }
    }
    for (p, k) in points.iter_mut().zip(keep) {
        if p.reflexive && !k {
            p.reflexive = false;
            p.slope = None;
        }
    }
}

/// Echograph of a diagonal dataset. Reflexivity comes from the oracle
/// directions when present, otherwise from the time-only stencil test: a
/// reflexive return is its own reverse, so exactly one stencil pair fits it,
/// while a non-reflexive return and its reverse share the time and give two.
pub fn echograph(s0: &BoundingSphere<2>, data: &DiagonalDataset) -> Vec<EchoPoint> {
    let a = s0.radius;
    let h = data.stencil;
    let mut out = Vec::new();
    for col in &data.columns {
        let mut center: Vec<&SpectrumSample> = col.center.iter().collect();
        center.sort_by(|p, q| p.t.total_cmp(&q.t));
        let mut groups: Vec<Vec<&SpectrumSample>> = Vec::new();
        for s in center {
            match groups.last_mut() {
                Some(g) if (s.t - g[0].t).abs() <= SAME_TIME => g.push(s),
                _ => groups.push(vec![s]),
            }
        }
        for g in groups {
            let t = g[0].t;
            let pairs = stencil_pairs(t, &col.plus, &col.minus, h, a);
            let oracle = g.iter().find_map(|s| match (s.entry_dir, s.exit_dir) {
                (Some(u), Some(v)) => Some(((u + v).norm() < REFLEXIVE_TOL, s.k)),
                _ => None,
            });
            let (reflexive, order) = match oracle {
                Some((r, k)) => (r, if r { k.map(|k| k.div_ceil(2)) } else { None }),
                None => (pairs.len() == 1 && g.len() == 1, None),
            };
            let slope = if reflexive {
                let ids: Vec<Option<u64>> = g.iter().map(|s| s.branch_id).collect();
                pairs
                    .iter()
                    .filter(|(i, j)| {
                        ids.contains(&col.plus[*i].branch_id)
                            && col.plus[*i].branch_id == col.minus[*j].branch_id
                    })
                    .min_by(|p, q| {
                        let e = |(i, j): &(usize, usize)| {
                            (col.plus[*i].t + col.minus[*j].t - 2.0 * t).abs()
                        };
                        e(p).total_cmp(&e(q))
                    })
                    .map(|(i, j)| (col.plus[*i].t - col.minus[*j].t) / h)
            } else {
                None
            };
            let w = echo_point(s0, col.theta, t);
            out.push(EchoPoint {
                x_angle: col.theta,
                x: [col.x.x, col.x.y],
                t,
                w: [w.x, w.y],
                reflexive,
                order,
                slope,
            });
        }
    }
    if data.mode == DatasetMode::Measured {
        prune_isolated(&mut out, data.grid.step(), a);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessReport {
    pub cells: usize,
    pub coincident_cells: usize,
    pub coincident_pairs: usize,
    pub fraction: f64,
    pub tolerance: f64,
}

/// Count cells holding two distinct branches with travelling times closer
/// than `tol`.
pub fn distinct_times_check(data: &SpectrumDataset, tol: f64) -> DistinctnessReport {
    let mut cells: Vec<(u64, u64, Vec<&SpectrumSample>)> = Vec::new();
    let key = |s: &SpectrumSample| (s.x_angle.to_bits(), s.y_angle.to_bits());
    let mut sorted: Vec<&SpectrumSample> = data.samples.iter().collect();
    sorted.sort_by_key(|p| key(p));
    for s in sorted {
        let (kx, ky) = key(s);
        match cells.last_mut() {
            Some(c) if c.0 == kx && c.1 == ky => c.2.push(s),
            _ => cells.push((kx, ky, vec![s])),
        }
    }
    let n_cells = match &data.grid {
        GridDescription::Pairs { x, y, .. } => x.count * y.count,
        GridDescription::Sweep { .. } => cells.len(),
    };
    let mut coincident_cells = 0;
    let mut coincident_pairs = 0;
    for (_, _, c) in &cells {
        let mut found = 0;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                if c[i].branch_id != c[j].branch_id && (c[i].t - c[j].t).abs() < tol {
                    found += 1;
                }
            }
        }
        if found > 0 {
            coincident_cells += 1;
            coincident_pairs += found;
        }
    }
    DistinctnessReport {
        cells: n_cells,
        coincident_cells,
        coincident_pairs,
        fraction: if n_cells == 0 {
            0.0
        } else {
            coincident_cells as f64 / n_cells as f64
        },
        tolerance: tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disc_scene, BoundingSphere};
    use approx::assert_relative_eq;

    fn one_disc() -> Scene<2> {
        disc_scene(4.0, &[([-2.0, 0.0], 1.0)])
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_angle(-0.5), TAU - 0.5);
        assert_relative_eq!(wrap_diff(TAU - 0.1), -0.1, epsilon = 1e-15);
        assert_relative_eq!(wrap_diff(0.1 - TAU), 0.1, epsilon = 1e-15);
        assert_eq!(AngularGrid::new(8).nearest(TAU - 0.01), 0);
    }

    #[test]
    fn empty_scene_chord_law() {
        let scene = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        let d = sample_spectrum(&scene, &AngularGrid::new(16), 32, &TraceLimits::default());
        assert_eq!(d.samples.len(), 16 * 31);
        for s in &d.samples {
            assert_eq!(s.k, Some(0));
            assert!((s.t - (s.x - s.y).norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn head_on_sample_present() {
        let d = sample_spectrum(
            &one_disc(),
            &AngularGrid::new(4),
            16,
            &TraceLimits::default(),
        );
        let hit = d.samples.iter().find(|s| {
            (s.x - Vector::<2>::new(-4.0, 0.0)).norm() < 1e-12
                && (s.y - Vector::<2>::new(-4.0, 0.0)).norm() < 1e-12
        });
        let s = hit.expect("head-on sample");
        assert_eq!(s.k, Some(1));
        assert_relative_eq!(s.t, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_of_disc_has_radial_echo() {
        let scene = one_disc();
        let grid = AngularGrid::new(4);
        let data = diag_spectrum(
            &scene,
            &grid,
            DEFAULT_STENCIL,
            DEFAULT_SWEEP,
            &TraceLimits::default(),
        );
        let echo = echograph(&scene.s0, &data);
        let p = echo
            .iter()
            .find(|e| (e.x_angle - PI).abs() < 1e-12 && e.reflexive)
            .expect("reflexive echo at (-4, 0)");
        assert_relative_eq!(p.t, 2.0, epsilon = 1e-12);
        assert_eq!(p.order, Some(1));
        assert_relative_eq!(p.w_vec(), Vector::<2>::new(-3.0, 0.0), epsilon = 1e-12);
        assert!(p.slope.unwrap().abs() < 1e-8);
        // Same classification without directions.
        let m = echograph(&scene.s0, &data.measured());
        let q = m
            .iter()
            .find(|e| (e.x_angle - PI).abs() < 1e-12 && (e.t - 2.0).abs() < 1e-9)
            .unwrap();
        assert!(q.reflexive);
        assert_eq!(q.order, None);
    }

    #[test]
    fn echograph_points() {
        let scene = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        assert_relative_eq!(
            echo_point(&scene.s0, PI, 2.0),
            Vector::<2>::new(-3.0, 0.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            echo_point(&scene.s0, FRAC_PI_2, 8.0),
            Vector::<2>::zeros(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn empty_scene_has_no_coincidences() {
        let scene = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        let d = pair_spectrum(
            &scene,
            &AngularGrid::new(8),
            &AngularGrid::with_phase(8, 0.5),
            256,
            &TraceLimits::default(),
        );
        assert_eq!(d.samples.len(), 64);
        for s in &d.samples {
            assert!((s.t - (s.x - s.y).norm()).abs() < 1e-12);
        }
        assert_eq!(distinct_times_check(&d, 1e-9).coincident_cells, 0);
    }

    #[test]
    fn scene_hash_is_stable_and_sensitive() {
        let a = scene_hash(&one_disc());
        assert_eq!(a, scene_hash(&one_disc()));
        assert_ne!(a, scene_hash(&disc_scene(4.0, &[([-2.0, 0.0], 1.01)])));
        assert_eq!(a.len(), 64);
    }
}
