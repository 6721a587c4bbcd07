//! Boundary reconstruction of a planar two-body obstacle from diagonal
//! travelling times: seeds from diagonal minima, segmentation of the
//! echograph into arcs, and backward ray tracing off already determined
//! parts of the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ReconstructionError;
use crate::geometry::{BoundingSphere, Vector};
use crate::recovery::{recover_reflexive_direction, SeparatingLine};
use crate::spectrum::{
    echograph, hermite_residual, hermite_tolerance, AngularGrid, DiagonalDataset, EchoPoint,
};

/// Two grid-separated diagonal minima closer than this are a tie.
const TIE_TOL: f64 = 1e-9;

fn v2(p: [f64; 2]) -> Vector<2> {
    Vector::<2>::new(p[0], p[1])
}

fn arr(p: Vector<2>) -> [f64; 2] {
    [p.x, p.y]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub rho: f64,
    pub x_k_angle: f64,
    pub x_k: [f64; 2],
    pub z_k: [f64; 2],
    pub tau2: f64,
    pub x2_angle: f64,
    pub x2: [f64; 2],
    pub z2: [f64; 2],
    pub separating: SeparatingLine,
}

/// Smallest diagonal time per grid column.
fn column_minima(data: &DiagonalDataset) -> Vec<Option<f64>> {
    let mut out = vec![None; data.grid.count];
    for c in &data.columns {
        let i = data.grid.nearest(c.theta);
        let m = c.center.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            out[i] = Some(m);
        }
    }
    out
}

/// Minimum over the allowed columns, refined by the parabola through the
/// minimizing column and its neighbours. With `strict`, a second local
/// minimum at the same height is an error; otherwise the lowest column wins.
fn refined_minimum(
    grid: &AngularGrid,
    minima: &[Option<f64>],
    allowed: &dyn Fn(usize) -> bool,
    strict: bool,
) -> Result<(f64, f64), ReconstructionError> {
    let n = minima.len();
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in minima.iter().enumerate() {
        if let (Some(m), true) = (m, allowed(i)) {
            if best.is_none_or(|b| *m < b.1) {
                best = Some((i, *m));
            }
        }
    }
    let (i0, m0) = best.ok_or(ReconstructionError::BranchLost("empty diagonal".into()))?;
    // A second local minimum, not adjacent to the first, at the same height.
    for (i, m) in minima.iter().enumerate() {
        let Some(m) = m else { continue };
        let d = (i as i64 - i0 as i64).rem_euclid(n as i64);
        if !strict || d <= 1 || d >= n as i64 - 1 || !allowed(i) {
            continue;
        }
        let l = minima[(i + n - 1) % n].unwrap_or(f64::INFINITY);
        let r = minima[(i + 1) % n].unwrap_or(f64::INFINITY);
        if *m <= l && *m <= r && (m - m0).abs() <= TIE_TOL {
            return Err(ReconstructionError::NonUniqueMinimum {
                first: m0,
                first_angle: grid.angle(i0),
                second: *m,
                second_angle: grid.angle(i),
            });
        }
    }
    let (il, ir) = ((i0 + n - 1) % n, (i0 + 1) % n);
    let mut theta = grid.angle(i0);
    let mut rho = m0;
    if let (Some(l), Some(r), true, true) = (minima[il], minima[ir], allowed(il), allowed(ir)) {
        let curv = l - 2.0 * m0 + r;
        if curv > 0.0 {
            let delta = 0.5 * (l - r) / curv;
            if delta.abs() <= 1.0 {
                theta += delta * grid.step();
                rho = m0 - 0.25 * (l - r) * delta;
            }
        }
    }
    Ok((rho, theta))
}

/// `rho_K`, `x_K` and `z_K = x_K + (rho_K / 2) nu0(x_K)`.
pub fn seed_first_body(
    s0: &BoundingSphere<2>,
    data: &DiagonalDataset,
) -> Result<(f64, f64, Vector<2>), ReconstructionError> {
    let minima = column_minima(data);
    let (rho, theta) = refined_minimum(&data.grid, &minima, &|_| true, true)?;
    let x = s0.point_at(theta);
    Ok((rho, theta, x + 0.5 * rho * s0.inward_normal(&x)))
}

/// Seeds of both bodies; the second minimum is taken over the part of S0
/// beyond the separating line, away from `z_K`. A tie there is broken by
/// the lowest grid column: only the first seed has to be unique.
pub fn seed_second_body(
    s0: &BoundingSphere<2>,
    data: &DiagonalDataset,
    separating: Option<&SeparatingLine>,
) -> Result<Seeds, ReconstructionError> {
    let line = separating.ok_or(ReconstructionError::NoSeparatingLine)?;
    let (rho, tk, zk) = seed_first_body(s0, data)?;
    let side_k = line.side(&zk).signum();
    let minima = column_minima(data);
    let grid = data.grid;
    let allowed = |i: usize| line.side(&s0.point_at(grid.angle(i))) * side_k <= 0.0;
    let (tau2, t2) = refined_minimum(&grid, &minima, &allowed, false)?;
    let x2 = s0.point_at(t2);
    let z2 = x2 + 0.5 * tau2 * s0.inward_normal(&x2);
    let xk = s0.point_at(tk);
    Ok(Seeds {
        rho,
        x_k_angle: tk,
        x_k: arr(xk),
        z_k: arr(zk),
        tau2,
        x2_angle: t2,
        x2: arr(x2),
        z2: arr(z2),
        separating: line.clone(),
    })
}

/// A maximal run of echo points along one smooth reflexive branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoArc {
    /// Indices into the echograph, ordered by increasing grid column.
    pub points: Vec<usize>,
    pub columns: Vec<usize>,
    pub level: Option<usize>,
    pub body: Option<usize>,
    pub chain: Option<usize>,
    pub consumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcEnd {
    First,
    Last,
}

impl EchoArc {
    fn end(&self, e: ArcEnd) -> (usize, usize) {
        match e {
            ArcEnd::First => (self.points[0], self.columns[0]),
            ArcEnd::Last => (*self.points.last().unwrap(), *self.columns.last().unwrap()),
        }
    }
}

/// Thresholds of the echograph segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// Largest column gap bridged between fragments.
    pub max_gap_columns: usize,
    /// Largest column offset between the two ends of a cusp.
    pub max_cusp_columns: usize,
    /// Largest Hermite step across a cusp, relative to the S0 radius.
    pub cusp_tolerance: f64,
    /// Arcs with fewer points are dropped.
    pub min_points: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            max_gap_columns: 3,
            max_cusp_columns: 16,
            cusp_tolerance: 1e-4,
            min_points: 3,
        }
    }
}

/// Mutual-best matching between two columns under the Hermite criterion.
fn match_columns(
    echo: &[EchoPoint],
    left: &[usize],
    right: &[usize],
    delta: f64,
    tol: f64,
) -> Vec<(usize, usize)> {
    let score = |i: usize, j: usize| {
        let (p, q) = (&echo[i], &echo[j]);
        hermite_residual(p.t, p.slope.unwrap(), q.t, q.slope.unwrap(), delta)
    };
    let best_right = |i: usize| {
        right
            .iter()
            .map(|&j| (score(i, j), j))
            .filter(|r| r.0 <= tol)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|r| r.1)
    };
    let best_left = |j: usize| {
        left.iter()
            .map(|&i| (score(i, j), i))
            .filter(|r| r.0 <= tol)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|r| r.1)
    };
    left.iter()
        .filter_map(|&i| {
            let j = best_right(i)?;
            (best_left(j) == Some(i)).then_some((i, j))
        })
        .collect()
}

/// Split the reflexive part of the echograph into smooth arcs.
pub fn segment_echograph(
    echo: &[EchoPoint],
    grid: &AngularGrid,
    a: f64,
    params: &SegmentationParams,
) -> Vec<EchoArc> {
    let n = grid.count;
    let delta = grid.step();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, p) in echo.iter().enumerate() {
        if p.reflexive && p.slope.is_some() {
            cols[grid.nearest(p.x_angle)].push(i);
        }
    }
    let col_of = |i: usize| grid.nearest(echo[i].x_angle);
    let mut next = vec![None; echo.len()];
    let mut prev = vec![None; echo.len()];
    let tol = hermite_tolerance(delta, a);
    for c in 0..n {
        for (i, j) in match_columns(echo, &cols[c], &cols[(c + 1) % n], delta, tol) {
            next[i] = Some(j);
            prev[j] = Some(i);
        }
    }
    // Bridge short gaps between fragment ends.
    for g in 2..=params.max_gap_columns {
        let gd = g as f64 * delta;
        let gtol = hermite_tolerance(gd, a);
        for c in 0..n {
            let tails: Vec<usize> = cols[c]
                .iter()
                .copied()
                .filter(|&i| next[i].is_none())
                .collect();
            let heads: Vec<usize> = cols[(c + g) % n]
                .iter()
                .copied()
                .filter(|&j| prev[j].is_none())
                .collect();
            for (i, j) in match_columns(echo, &tails, &heads, gd, gtol) {
                next[i] = Some(j);
                prev[j] = Some(i);
            }
        }
    }
    let mut seen = vec![false; echo.len()];
    let mut arcs = Vec::new();
    let mut order: Vec<usize> = cols.iter().flatten().copied().collect();
    // Open chains first, then whatever is left lies on closed loops.
    order.sort_by_key(|&i| (prev[i].is_some(), col_of(i)));
    for &start in &order {
        if seen[start] {
            continue;
        }
        let mut pts = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            if seen[i] {
                break;
            }
            seen[i] = true;
            pts.push(i);
            cur = next[i];
        }
        if pts.len() >= params.min_points {
            let columns = pts.iter().map(|&i| col_of(i)).collect();
            arcs.push(EchoArc {
                points: pts,
                columns,
                level: None,
                body: None,
                chain: None,
                consumed: false,
            });
        }
    }
    arcs
}

/// Arc ends meeting the given end of `arc` in a cusp. Both arcs leave the
/// cusp towards the same side and join tangentially in the `(x, t)` graph,
/// so the Hermite step between the two ends is small.
fn cusp_candidates(
    echo: &[EchoPoint],
    arcs: &[EchoArc],
    arc: usize,
    end: ArcEnd,
    grid: &AngularGrid,
    params: &SegmentationParams,
    a: f64,
) -> Vec<(usize, ArcEnd, f64)> {
    let n = grid.count as i64;
    let (p, c) = arcs[arc].end(end);
    let mut out = Vec::new();
    for (k, other) in arcs.iter().enumerate() {
        if k == arc || other.level.is_some() {
            continue;
        }
        let (q, cq) = other.end(end);
        let mut dc = (cq as i64 - c as i64).rem_euclid(n);
        if dc > n / 2 {
            dc -= n;
        }
        if dc.unsigned_abs() as usize > params.max_cusp_columns {
            continue;
        }
        let r = hermite_residual(
            echo[p].t,
            echo[p].slope.unwrap(),
            echo[q].t,
            echo[q].slope.unwrap(),
            dc as f64 * grid.step(),
        );
        if r <= params.cusp_tolerance * a {
            out.push((k, end, r));
        }
    }
    out
}

fn other_end(e: ArcEnd) -> ArcEnd {
    match e {
        ArcEnd::First => ArcEnd::Last,
        ArcEnd::Last => ArcEnd::First,
    }
}

/// Follow cusp adjacency from one end of a level-1 arc, labelling arcs of
/// levels `2..=k_max`. Returns the arc ids in level order.
#[allow(clippy::too_many_arguments)]
fn follow_chain(
    echo: &[EchoPoint],
    arcs: &mut [EchoArc],
    start: usize,
    end: ArcEnd,
    body: usize,
    chain: usize,
    k_max: usize,
    grid: &AngularGrid,
    params: &SegmentationParams,
    a: f64,
) -> Result<Vec<(usize, ArcEnd)>, ReconstructionError> {
    let mut out = Vec::new();
    let (mut arc, mut e) = (start, end);
    for level in 2..=k_max {
        let cands = cusp_candidates(echo, arcs, arc, e, grid, params, a);
        match cands.len() {
            0 => break,
            1 => {
                let (k, ke, _) = cands[0];
                arcs[k].level = Some(level);
                arcs[k].body = Some(body);
                arcs[k].chain = Some(chain);
                out.push((k, ke));
                arc = k;
                e = other_end(ke);
            }
            _ => {
                let (p, _) = arcs[arc].end(e);
                return Err(ReconstructionError::AmbiguousAdjacency(format!(
                    "{} candidate arcs at x = {:.6} rad, t = {:.6} for level {level}",
                    cands.len(),
                    echo[p].x_angle,
                    echo[p].t
                )));
            }
        }
    }
    Ok(out)
}

/// Which side of the axis through the two bodies an arc lies on. Level-1
/// arcs belong to both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Both,
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Both => "LR",
            Side::Left => "L",
            Side::Right => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub z: [f64; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
    /// Source point in the echograph.
    pub echo: usize,
}

impl BoundaryPoint {
    pub fn z_vec(&self) -> Vector<2> {
        v2(self.z)
    }

    pub fn normal_vec(&self) -> Vector<2> {
        v2(self.normal)
    }

    pub fn tangent(&self) -> Vector<2> {
        Vector::<2>::new(-self.normal[1], self.normal[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    /// 1 for the body of the first seed, 2 for the second.
    pub body: usize,
    pub side: Side,
    pub level: usize,
    /// Ordered as the echo arc they come from.
    pub points: Vec<BoundaryPoint>,
    pub echo_arc: usize,
    /// Cusp chain the arc was reached through; none at level 1.
    pub chain: Option<usize>,
}

/// Level-1 boundary point from a reflexive echo point.
fn order_one_point(
    s0: &BoundingSphere<2>,
    echo: &[EchoPoint],
    i: usize,
) -> Result<BoundaryPoint, ReconstructionError> {
    let p = &echo[i];
    let u = recover_reflexive_direction(s0, p.x_angle, p.slope.unwrap_or(0.0))?;
    let z = p.x_vec() - 0.5 * p.t * u;
    Ok(BoundaryPoint {
        z: arr(z),
        normal: arr(u),
        echo: i,
    })
}

/// Echo arc through the reflexive point of smallest time at the column
/// nearest `theta`.
fn arc_at(
    echo: &[EchoPoint],
    arcs: &[EchoArc],
    grid: &AngularGrid,
    theta: f64,
) -> Result<usize, ReconstructionError> {
    let n = grid.count;
    let c0 = grid.nearest(theta);
    // The minimum may sit in a column dropped by the reflexivity filter.
    for off in 0..=4usize {
        for c in [(c0 + off) % n, (c0 + n - off) % n] {
            let best = arcs
                .iter()
                .enumerate()
                .flat_map(|(k, a)| {
                    a.columns
                        .iter()
                        .zip(&a.points)
                        .filter(move |(cc, _)| **cc == c)
                        .map(move |(_, &i)| (k, i))
                })
                .min_by(|x, y| echo[x.1].t.total_cmp(&echo[y.1].t));
            if let Some((k, _)) = best {
                return Ok(k);
            }
        }
    }
    Err(ReconstructionError::BranchLost(format!(
        "no reflexive arc near x = {theta:.6} rad"
    )))
}

/// The two level-1 boundary arcs, continued along the echo arcs through
/// the seeds. Returns the arcs and their echo arc ids.
pub fn trace_z1_arcs(
    s0: &BoundingSphere<2>,
    echo: &[EchoPoint],
    arcs: &[EchoArc],
    grid: &AngularGrid,
    seeds: &Seeds,
) -> Result<[BoundaryArc; 2], ReconstructionError> {
    let k1 = arc_at(echo, arcs, grid, seeds.x_k_angle)?;
    let k2 = arc_at(echo, arcs, grid, seeds.x2_angle)?;
    if k1 == k2 {
        return Err(ReconstructionError::BranchLost(
            "both seeds lie on one echograph arc".into(),
        ));
    }
    let build = |k: usize, body: usize| -> Result<BoundaryArc, ReconstructionError> {
        let points = arcs[k]
            .points
            .iter()
            .map(|&i| order_one_point(s0, echo, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BoundaryArc {
            body,
            side: Side::Both,
            level: 1,
            points,
            echo_arc: k,
            chain: None,
        })
    };
    Ok([build(k1, 1)?, build(k2, 2)?])
}

/// Local fit of a boundary arc around a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub foot: Vector<2>,
    pub tangent: Vector<2>,
    /// Outward unit normal.
    pub normal: Vector<2>,
    pub curvature: f64,
    /// Set when the fitted curvature is not strictly positive.
    pub non_convex: bool,
    origin: Vector<2>,
    frame_t: Vector<2>,
    frame_n: Vector<2>,
    coef: [f64; 4],
}

/// Fewest points a local fit accepts.
pub const MIN_FIT_POINTS: usize = 5;
/// Curvature at or below this (in 1/length) marks a fit non-convex.
const CONVEX_TOL: f64 = 1e-6;

impl LocalFit {
    fn height(&self, s: f64) -> (f64, f64) {
        let c = &self.coef;
        (
            c[0] + s * (c[1] + s * (c[2] + s * c[3])),
            c[1] + s * (2.0 * c[2] + 3.0 * s * c[3]),
        )
    }

    /// Point and outward normal of the fitted curve at frame abscissa `s`.
    fn at(&self, s: f64) -> (Vector<2>, Vector<2>) {
        let (h, dh) = self.height(s);
        let p = self.origin + s * self.frame_t + h * self.frame_n;
        let n = (self.frame_n - dh * self.frame_t).normalize();
        (p, n)
    }

    /// First crossing of the ray `o + l d` with the fitted curve near the
    /// frame origin, by Newton iteration from `l0`.
    fn ray_hit(
        &self,
        o: &Vector<2>,
        d: &Vector<2>,
        l0: f64,
    ) -> Option<(f64, Vector<2>, Vector<2>)> {
        let r = o - self.origin;
        let (s0, h0) = (r.dot(&self.frame_t), r.dot(&self.frame_n));
        let (ds, dh) = (d.dot(&self.frame_t), d.dot(&self.frame_n));
        let mut l = l0;
        for _ in 0..50 {
            let s = s0 + l * ds;
            let (h, slope) = self.height(s);
            let f = h0 + l * dh - h;
            let df = dh - slope * ds;
            if df.abs() < 1e-14 {
                return None;
            }
            let step = f / df;
            l -= step;
            if step.abs() <= 1e-15 * (1.0 + l.abs()) {
                break;
            }
        }
        let (p, n) = self.at(s0 + l * ds);
        l.is_finite().then_some((l, p, n))
    }

    /// Point of the fitted curve nearest to `q`, by Newton iteration on the
    /// frame abscissa.
    fn closest(&self, q: &Vector<2>) -> Vector<2> {
        let mut s = (q - self.origin).dot(&self.frame_t);
        for _ in 0..50 {
            let (h, dh) = self.height(s);
            let d2h = 2.0 * self.coef[2] + 6.0 * self.coef[3] * s;
            let r = self.origin + s * self.frame_t + h * self.frame_n - q;
            let d1 = self.frame_t + dh * self.frame_n;
            let f = r.dot(&d1);
            let df = d1.dot(&d1) + d2h * r.dot(&self.frame_n);
            if df <= 0.0 {
                break;
            }
            let step = f / df;
            s -= step;
            if step.abs() <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        self.at(s).0
    }
}

/// Moving least squares cubic through nearby arc points, matching both
/// positions and the slopes given by the stored normals. Weights taper as
/// `(1 - (d/R)^3)^3` over `radius`.
pub fn fit_local_curve(
    points: &[(Vector<2>, Vector<2>)],
    query: &Vector<2>,
    radius: f64,
) -> Result<LocalFit, ReconstructionError> {
    let near: Vec<(Vector<2>, Vector<2>, f64)> = points
        .iter()
        .filter_map(|(z, n)| {
            let d = (z - query).norm() / radius;
            (d < 1.0).then(|| (*z, *n, (1.0 - d * d * d).powi(3)))
        })
        .collect();
    if near.len() < MIN_FIT_POINTS {
        return Err(ReconstructionError::InsufficientSupport {
            needed: MIN_FIT_POINTS,
        });
    }
    let mut n0 = near
        .iter()
        .fold(Vector::<2>::zeros(), |acc, (_, n, w)| acc + *w * n);
    if n0.norm() == 0.0 {
        return Err(ReconstructionError::InsufficientSupport {
            needed: MIN_FIT_POINTS,
        });
    }
    n0.normalize_mut();
    let t0 = Vector::<2>::new(-n0.y, n0.x);
    let mut ata = nalgebra::Matrix4::<f64>::zeros();
    let mut atb = nalgebra::Vector4::<f64>::zeros();
    let mut add = |row: nalgebra::Vector4<f64>, rhs: f64, w: f64| {
        ata += w * row * row.transpose();
        atb += w * rhs * row;
    };
    for (z, n, w) in &near {
        let r = z - query;
        let (s, h) = (r.dot(&t0) / radius, r.dot(&n0) / radius);
        add(nalgebra::Vector4::new(1.0, s, s * s, s * s * s), h, *w);
        let nn = n.dot(&n0);
        if nn > 0.1 {
            let slope = -n.dot(&t0) / nn;
            add(
                nalgebra::Vector4::new(0.0, 1.0, 2.0 * s, 3.0 * s * s),
                slope,
                *w,
            );
        }
    }
    let c = ata.cholesky().map(|ch| ch.solve(&atb)).ok_or(
        ReconstructionError::InsufficientSupport {
            needed: MIN_FIT_POINTS,
        },
    )?;
    // Back to unscaled frame coordinates.
    let coef = [c[0] * radius, c[1], c[2] / radius, c[3] / (radius * radius)];
    let fit0 = LocalFit {
        foot: *query,
        tangent: t0,
        normal: n0,
        curvature: 0.0,
        non_convex: false,
        origin: *query,
        frame_t: t0,
        frame_n: n0,
        coef,
    };
    let (foot, normal) = fit0.at(0.0);
    let (_, dh) = fit0.height(0.0);
    let curvature = -2.0 * coef[2] / (1.0 + dh * dh).powf(1.5);
    Ok(LocalFit {
        foot,
        tangent: Vector::<2>::new(-normal.y, normal.x),
        normal,
        curvature,
        non_convex: curvature <= CONVEX_TOL,
        ..fit0
    })
}

/// Median distance between consecutive points.
fn median_spacing(pts: &[Vector<2>]) -> f64 {
    let mut d: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(|p, q| p.total_cmp(q));
    d[d.len() / 2]
}

/// Already determined boundary of one body: known points ordered by polar
/// angle about their centroid. Consecutive points closer than `gap` are
/// joined by a chord; a longer step leaves a stretch of unknown boundary,
/// which for a convex body lies inside the cap cut off by the chord and
/// the tangent lines at its two ends.
#[derive(Debug, Clone)]
struct KnownBody {
    body: usize,
    z: Vec<Vector<2>>,
    n: Vec<Vector<2>>,
    level: Vec<usize>,
    /// Outer boundary of each cap, from the start of its chord to the end.
    caps: Vec<(usize, Vec<Vector<2>>)>,
    centroid: Vector<2>,
    reach: f64,
    gap: f64,
    fit_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    Known { l: f64, edge: usize },
    Cap { l: f64, cap: usize },
}

impl Crossing {
    fn length(&self) -> f64 {
        match *self {
            Crossing::Known { l, .. } | Crossing::Cap { l, .. } => l,
        }
    }
}

/// Ray parameter where `o + l d` crosses the segment `p q`.
fn segment_hit(o: &Vector<2>, d: &Vector<2>, p: &Vector<2>, q: &Vector<2>) -> Option<f64> {
    let e = q - p;
    let den = cross(d, &e);
    if den.abs() < 1e-300 {
        return None;
    }
    let w = p - o;
    let l = cross(&w, &e) / den;
    let s = cross(&w, d) / den;
    (0.0..=1.0).contains(&s).then_some(l)
}

fn inside_polygon(p: &Vector<2>, poly: &[Vector<2>]) -> bool {
    let m = poly.len();
    let mut inside = false;
    for i in 0..m {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl KnownBody {
    fn new(body: usize, arcs: &[BoundaryArc], max_level: usize, gap: f64) -> Option<Self> {
        let mut pts: Vec<(Vector<2>, Vector<2>, usize)> = arcs
            .iter()
            .filter(|a| a.body == body && a.level <= max_level)
            .flat_map(|a| {
                a.points
                    .iter()
                    .map(move |p| (p.z_vec(), p.normal_vec(), a.level))
            })
            .collect();
        if pts.len() < MIN_FIT_POINTS {
            return None;
        }
        let centroid = pts.iter().fold(Vector::<2>::zeros(), |s, p| s + p.0) / pts.len() as f64;
        let ang = |p: &Vector<2>| (p.y - centroid.y).atan2(p.x - centroid.x);
        pts.sort_by(|p, q| ang(&p.0).total_cmp(&ang(&q.0)));
        let z: Vec<Vector<2>> = pts.iter().map(|p| p.0).collect();
        let n: Vec<Vector<2>> = pts.iter().map(|p| p.1).collect();
        let reach = z.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
        let m = z.len();
        let mut caps = Vec::new();
        for i in 0..m {
            let j = (i + 1) % m;
            if (z[j] - z[i]).norm() <= gap {
                continue;
            }
            // Tangents at the chord ends, pointing into the unknown stretch.
            let ta = Vector::<2>::new(-n[i].y, n[i].x);
            let ta = if ta.dot(&(z[i] - z[(i + m - 1) % m])) < 0.0 {
                -ta
            } else {
                ta
            };
            let tb = Vector::<2>::new(-n[j].y, n[j].x);
            let tb = if tb.dot(&(z[j] - z[(j + 1) % m])) < 0.0 {
                -tb
            } else {
                tb
            };
            let far = 2.0 * reach + (z[j] - z[i]).norm();
            let den = cross(&ta, &tb);
            let apex = (den.abs() > 1e-12).then(|| {
                let w = z[j] - z[i];
                (cross(&w, &tb) / den, cross(&w, &ta) / den)
            });
            let outline = match apex {
                Some((alpha, beta)) if alpha > 0.0 && beta > 0.0 && alpha < far && beta < far => {
                    vec![z[i], z[i] + alpha * ta, z[j]]
                }
                _ => vec![z[i], z[i] + far * ta, z[j] + far * tb, z[j]],
            };
            caps.push((i, outline));
        }
        let spacing = median_spacing(&z);
        Some(Self {
            body,
            n,
            level: pts.iter().map(|p| p.2).collect(),
            z,
            caps,
            centroid,
            reach,
            gap,
            fit_radius: 10.0 * spacing,
        })
    }

    /// First crossing of the ray with a known chord or a cap outline.
    fn crossing(&self, o: &Vector<2>, d: &Vector<2>, min_len: f64) -> Option<Crossing> {
        let r = self.centroid - o;
        let along = r.dot(d);
        let off = (r - along * d).norm();
        let bound = 4.0 * self.reach;
        if off > bound || along + bound < min_len {
            return None;
        }
        let m = self.z.len();
        let mut best: Option<Crossing> = None;
        let mut take = |c: Crossing| {
            if c.length() > min_len && best.is_none_or(|b| c.length() < b.length()) {
                best = Some(c);
            }
        };
        for i in 0..m {
            let j = (i + 1) % m;
            if (self.z[j] - self.z[i]).norm() > self.gap {
                continue;
            }
            if let Some(l) = segment_hit(o, d, &self.z[i], &self.z[j]) {
                take(Crossing::Known { l, edge: i });
            }
        }
        for (c, (_, outline)) in self.caps.iter().enumerate() {
            for w in outline.windows(2) {
                if let Some(l) = segment_hit(o, d, &w[0], &w[1]) {
                    take(Crossing::Cap { l, cap: c });
                }
            }
        }
        best
    }

    /// Whether `p` lies in the cap, between its outline and its chord.
    fn in_cap(&self, cap: usize, p: &Vector<2>) -> bool {
        inside_polygon(p, &self.caps[cap].1)
    }

    fn edge_level(&self, i: usize) -> usize {
        self.level[i].max(self.level[(i + 1) % self.z.len()])
    }

    fn fit(&self, q: &Vector<2>) -> Result<LocalFit, ReconstructionError> {
        let pts: Vec<(Vector<2>, Vector<2>)> = self
            .z
            .iter()
            .zip(&self.n)
            .filter(|(z, _)| (*z - q).norm() < self.fit_radius)
            .map(|(z, n)| (*z, *n))
            .collect();
        fit_local_curve(&pts, q, self.fit_radius)
    }
}

/// One reflection of a backtraced ray off the determined boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// Level and body of the point being reconstructed.
    pub level: usize,
    pub body: usize,
    pub echo: usize,
    pub hit_body: usize,
    /// Level of the determined arc that was hit.
    pub hit_level: usize,
    pub point: [f64; 2],
}

/// An echo point whose backtrace was abandoned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub level: usize,
    pub body: usize,
    pub echo: usize,
    pub reason: String,
}

/// `(body, level, point)` of each reflection off the known boundary.
type Hits = Vec<(usize, usize, Vector<2>)>;

/// Reversed ray from the echo point's source back to the boundary point of
/// its reflexive geodesic, reflecting off the known boundary.
fn backtrace_point(
    s0: &BoundingSphere<2>,
    known: &[KnownBody],
    p: &EchoPoint,
    body: usize,
    level: usize,
) -> Result<(BoundaryPoint, Hits), ReconstructionError> {
    let a = s0.radius;
    let u = recover_reflexive_direction(s0, p.x_angle, p.slope.unwrap_or(0.0))?;
    let mut pos = p.x_vec();
    let mut dir = -u;
    let mut remaining = 0.5 * p.t;
    let mut hits = Vec::new();
    let min_len = 1e-9 * a;
    loop {
        let crossing = known
            .iter()
            .filter_map(|k| k.crossing(&pos, &dir, min_len).map(|c| (c, k)))
            .min_by(|x, y| x.0.length().total_cmp(&y.0.length()));
        let Some((c, kb)) = crossing.filter(|c| c.0.length() < remaining) else {
            break;
        };
        let (l, edge) = match c {
            Crossing::Known { l, edge } => (l, edge),
            Crossing::Cap { cap, .. } => {
                // Either the ray ends on the unknown stretch of its own body,
                // or it meets boundary that is not determined yet.
                if kb.body == body && kb.in_cap(cap, &(pos + remaining * dir)) {
                    break;
                }
                return Err(ReconstructionError::BacktraceHitUnknownRegion);
            }
        };
        let guess = pos + l * dir;
        let mut fit = kb.fit(&guess)?;
        let mut hit = fit.ray_hit(&pos, &dir, l);
        // One moving step: refit at the first estimate of the hit.
        if let Some((_, q, _)) = hit {
            fit = kb.fit(&q)?;
            hit = fit.ray_hit(&pos, &dir, l);
        }
        let (l, q, n) = hit.ok_or(ReconstructionError::BacktraceHitUnknownRegion)?;
        if l >= remaining {
            break;
        }
        if l <= 0.0 {
            return Err(ReconstructionError::NegativeResidualLength(l));
        }
        if dir.dot(&n) >= 0.0 {
            return Err(ReconstructionError::BacktraceHitUnknownRegion);
        }
        hits.push((kb.body, kb.edge_level(edge), q));
        remaining -= l;
        pos = q;
        dir = dir - 2.0 * dir.dot(&n) * n;
        if hits.len() >= level {
            return Err(ReconstructionError::ReflectionCountMismatch {
                expected: level - 1,
                found: hits.len(),
            });
        }
    }
    let z = pos + remaining * dir;
    Ok((
        BoundaryPoint {
            z: arr(z),
            normal: arr(-dir),
            echo: 0,
        },
        hits,
    ))
}

/// Settings of the full reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub k_max: usize,
    pub segmentation: SegmentationParams,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            k_max: 6,
            segmentation: SegmentationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionState {
    pub seeds: Seeds,
    pub arcs: Vec<BoundaryArc>,
    pub echo_arcs: Vec<EchoArc>,
    /// Mutual nearest points of the two reconstructed bodies.
    pub z_inf: [[f64; 2]; 2],
    pub k_max: usize,
    /// Deepest level with at least one reconstructed arc.
    pub depth: usize,
    pub audit: Vec<AuditRecord>,
    pub skipped: Vec<SkipRecord>,
}

impl ReconstructionState {
    /// All reconstructed points of one body.
    pub fn body_points(&self, body: usize) -> Vec<Vector<2>> {
        self.arcs
            .iter()
            .filter(|a| a.body == body)
            .flat_map(|a| a.points.iter().map(|p| p.z_vec()))
            .collect()
    }

    /// Reflections that did not land on a strictly lower level.
    pub fn audit_violations(&self) -> usize {
        self.audit.iter().filter(|r| r.hit_level >= r.level).count()
    }
}

fn closest_pair(p: &[Vector<2>], q: &[Vector<2>]) -> Option<(Vector<2>, Vector<2>)> {
    let mut best: Option<(f64, Vector<2>, Vector<2>)> = None;
    for a in p {
        for b in q {
            let d = (a - b).norm_squared();
            if best.is_none_or(|x| d < x.0) {
                best = Some((d, *a, *b));
            }
        }
    }
    best.map(|b| (b.1, b.2))
}

fn cross(a: &Vector<2>, b: &Vector<2>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Echo arcs, chains and boundary arcs of the whole induction.
pub fn reconstruct_all(
    s0: &BoundingSphere<2>,
    data: &DiagonalDataset,
    separating: Option<&SeparatingLine>,
    config: &ReconstructionConfig,
) -> Result<ReconstructionState, ReconstructionError> {
    let a = s0.radius;
    let grid = data.grid;
    let seeds = seed_second_body(s0, data, separating)?;
    let echo = echograph(s0, data);
    let params = config.segmentation;
    let mut echo_arcs = segment_echograph(&echo, &grid, a, &params);
    let z1 = trace_z1_arcs(s0, &echo, &echo_arcs, &grid, &seeds)?;
    for arc in &z1 {
        let e = &mut echo_arcs[arc.echo_arc];
        e.level = Some(1);
        e.body = Some(arc.body);
        e.consumed = true;
    }
    // Chains of higher levels from both ends of each level-1 arc.
    let mut chains = Vec::new();
    for arc in &z1 {
        for (end, pt) in [
            (ArcEnd::First, arc.points.first()),
            (ArcEnd::Last, arc.points.last()),
        ] {
            let Some(pt) = pt else { continue };
            let id = chains.len();
            let links = follow_chain(
                &echo,
                &mut echo_arcs,
                arc.echo_arc,
                end,
                arc.body,
                id,
                config.k_max,
                &grid,
                &params,
                a,
            )?;
            chains.push((arc.body, pt.z_vec(), links));
        }
    }
    let mut arcs: Vec<BoundaryArc> = z1.to_vec();
    let mut audit = Vec::new();
    let mut skipped = Vec::new();
    let gap = (4.0 * a * grid.step()).max(1e-9 * a);
    // Every point of a chained arc waits until its reversed ray meets only
    // determined boundary; the level it is placed at can exceed its order.
    let mut pending: Vec<(usize, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, (_, _, links))| links.iter().map(move |&(k, _)| (c, k)))
        .flat_map(|(c, k)| echo_arcs[k].points.iter().map(move |&i| (c, k, i)))
        .collect();
    let mut last_error = vec![None; pending.len()];
    for level in 2..=config.k_max {
        let known: Vec<KnownBody> = [1, 2]
            .iter()
            .filter_map(|&b| KnownBody::new(b, &arcs, level - 1, gap))
            .collect();
        let results: Vec<_> = pending
            .par_iter()
            .map(|&(c, _, i)| backtrace_point(s0, &known, &echo[i], chains[c].0, level))
            .collect();
        let mut placed: Vec<BoundaryArc> = Vec::new();
        let mut still = Vec::new();
        let mut still_err = Vec::new();
        for ((c, k, i), r) in pending.iter().copied().zip(results) {
            let body = chains[c].0;
            match r {
                Ok((mut bp, hits)) => {
                    bp.echo = i;
                    for (hb, hl, q) in hits {
                        audit.push(AuditRecord {
                            level,
                            body,
                            echo: i,
                            hit_body: hb,
                            hit_level: hl,
                            point: arr(q),
                        });
                    }
                    match placed.last_mut() {
                        Some(arc) if arc.echo_arc == k => arc.points.push(bp),
                        _ => placed.push(BoundaryArc {
                            body,
                            side: Side::Both,
                            level,
                            points: vec![bp],
                            echo_arc: k,
                            chain: Some(c),
                        }),
                    }
                    echo_arcs[k].consumed = true;
                }
                Err(ReconstructionError::BacktraceHitUnknownRegion) => {
                    still.push((c, k, i));
                    still_err.push(Some(
                        ReconstructionError::BacktraceHitUnknownRegion.to_string(),
                    ));
                }
                Err(e) => skipped.push(SkipRecord {
                    level,
                    body,
                    echo: i,
                    reason: e.to_string(),
                }),
            }
        }
        arcs.extend(placed);
        pending = still;
        last_error = still_err;
    }
    for ((c, _, i), e) in pending.iter().zip(last_error) {
        skipped.push(SkipRecord {
            level: config.k_max + 1,
            body: chains[*c].0,
            echo: *i,
            reason: e.unwrap_or_else(|| "level budget exhausted".into()),
        });
    }
    let p1 = state_points(&arcs, 1);
    let p2 = state_points(&arcs, 2);
    let (zi1, zi2) = closest_pair(&p1, &p2).unwrap_or((v2(seeds.z_k), v2(seeds.z2)));
    let (zi1, zi2) = bridge_z_inf(&arcs, zi1, zi2).unwrap_or((zi1, zi2));
    // Sides from the axis through the mutual nearest points: a chain lies on
    // the side of the level-1 end it starts from.
    let axis = zi2 - zi1;
    for arc in &mut arcs {
        if let Some(c) = arc.chain {
            let (body, start, _) = &chains[c];
            let centre = if *body == 1 { zi1 } else { zi2 };
            arc.side = if cross(&axis, &(start - centre)) > 0.0 {
                Side::Left
            } else {
                Side::Right
            };
        }
    }
    let depth = arcs.iter().map(|x| x.level).max().unwrap_or(0);
    Ok(ReconstructionState {
        seeds,
        arcs,
        echo_arcs,
        z_inf: [arr(zi1), arr(zi2)],
        k_max: config.k_max,
        depth,
        audit,
        skipped,
    })
}

/// Local fit across the unreconstructed gap next to the closest point `p`
/// of one body. `None` when there is no gap to bridge.
fn gap_fit(points: &[(Vector<2>, Vector<2>)], p: &Vector<2>) -> Option<LocalFit> {
    let (_, np) = points
        .iter()
        .min_by(|a, b| (a.0 - p).norm().total_cmp(&(b.0 - p).norm()))?;
    let t = Vector::<2>::new(-np.y, np.x);
    let spacing = median_spacing(&points.iter().map(|x| x.0).collect::<Vec<_>>());
    let mut s: Vec<f64> = points
        .iter()
        .filter(|(z, n)| n.dot(np) > 0.5 && (z - p).norm() < 1e3 * spacing)
        .map(|(z, _)| (z - p).dot(&t))
        .collect();
    s.sort_by(f64::total_cmp);
    let i = s.iter().position(|x| x.abs() <= 1e-12 * (1.0 + p.norm()))?;
    let right = s.get(i + 1).map(|x| x - s[i]).unwrap_or(f64::INFINITY);
    let left = if i > 0 {
        s[i] - s[i - 1]
    } else {
        f64::INFINITY
    };
    let (gap, dir) = if right >= left {
        (right, 1.0)
    } else {
        (left, -1.0)
    };
    if !gap.is_finite() || gap < 3.0 * spacing {
        return None;
    }
    let query = p + dir * 0.5 * gap * t;
    fit_local_curve(points, &query, 0.5 * gap + 20.0 * spacing).ok()
}

/// Mutual nearest points of curves fitted across the gaps around the
/// closest pair of the two point clouds.
fn bridge_z_inf(
    arcs: &[BoundaryArc],
    p: Vector<2>,
    q: Vector<2>,
) -> Option<(Vector<2>, Vector<2>)> {
    let cloud = |b: usize| -> Vec<(Vector<2>, Vector<2>)> {
        arcs.iter()
            .filter(|a| a.body == b)
            .flat_map(|a| a.points.iter().map(|x| (x.z_vec(), x.normal_vec())))
            .collect()
    };
    let (c1, c2) = (cloud(1), cloud(2));
    let (f1, f2) = (gap_fit(&c1, &p), gap_fit(&c2, &q));
    if f1.is_none() && f2.is_none() {
        return None;
    }
    let (mut a, mut b) = (p, q);
    for _ in 0..100 {
        let na = f1.as_ref().map_or(a, |f| f.closest(&b));
        let nb = f2.as_ref().map_or(b, |f| f.closest(&na));
        let moved = (na - a).norm() + (nb - b).norm();
        a = na;
        b = nb;
        if moved <= 1e-14 {
            break;
        }
    }
    let bound = (p - q).norm();
    ((a - p).norm() <= bound
        && (b - q).norm() <= bound
        && a.iter().chain(b.iter()).all(|x| x.is_finite()))
    .then_some((a, b))
}

fn state_points(arcs: &[BoundaryArc], body: usize) -> Vec<Vector<2>> {
    arcs.iter()
        .filter(|a| a.body == body)
        .flat_map(|a| a.points.iter().map(|p| p.z_vec()))
        .collect()
}

/// Distance to the estimated `z_inf` of the closest point of each (chain,
/// level) group. Deeper levels should come closer.
pub fn level_approach(state: &ReconstructionState) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    for arc in &state.arcs {
        let Some(c) = arc.chain else { continue };
        let zi = v2(state.z_inf[arc.body - 1]);
        let d = arc
            .points
            .iter()
            .map(|p| (p.z_vec() - zi).norm())
            .fold(f64::INFINITY, f64::min);
        match out.iter_mut().find(|e| e.0 == c && e.1 == arc.level) {
            Some(e) => e.2 = e.2.min(d),
            None => out.push((c, arc.level, d)),
        }
    }
    out.sort_by_key(|p| (p.0, p.1));
    out
}

/// Whether, along every chain, each level reaches at least as close to
/// `z_inf` as the one before, up to `tol`.
pub fn levels_monotone(state: &ReconstructionState, tol: f64) -> bool {
    level_approach(state)
        .windows(2)
        .all(|w| w[0].0 != w[1].0 || w[1].2 <= w[0].2 + tol)
}

/// Replay of the diagonal times through the reconstructed boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub checked: usize,
    /// Points whose forward ray entered a still unknown stretch.
    pub unresolved: usize,
    /// Largest `|2 L - t|` over checked points.
    pub max_time_error: f64,
    /// Largest distance between the replayed exit point and the source.
    pub max_exit_error: f64,
}

/// Trace each reconstructed point forward along its normal, reflecting off
/// fitted pieces of the reconstruction, and compare the arrival on S0 and
/// twice the path length with the echo point it came from.
pub fn self_consistency(
    s0: &BoundingSphere<2>,
    data: &DiagonalDataset,
    state: &ReconstructionState,
) -> ConsistencyReport {
    let echo = echograph(s0, data);
    let a = s0.radius;
    let gap = (4.0 * a * data.grid.step()).max(1e-9 * a);
    let known: Vec<KnownBody> = [1, 2]
        .iter()
        .filter_map(|&b| KnownBody::new(b, &state.arcs, usize::MAX, gap))
        .collect();
    let jobs: Vec<(usize, BoundaryPoint)> = state
        .arcs
        .iter()
        .flat_map(|arc| arc.points.iter().map(move |p| (arc.level, *p)))
        .collect();
    let results: Vec<Option<(f64, f64)>> = jobs
        .par_iter()
        .map(|(level, p)| {
            let e = echo.get(p.echo)?;
            let (exit, len) = forward_trace(s0, &known, p, *level)?;
            Some(((2.0 * len - e.t).abs(), (exit - e.x_vec()).norm()))
        })
        .collect();
    let mut rep = ConsistencyReport {
        checked: 0,
        unresolved: 0,
        max_time_error: 0.0,
        max_exit_error: 0.0,
    };
    for r in results {
        match r {
            Some((dt, dx)) => {
                rep.checked += 1;
                rep.max_time_error = rep.max_time_error.max(dt);
                rep.max_exit_error = rep.max_exit_error.max(dx);
            }
            None => rep.unresolved += 1,
        }
    }
    rep
}

fn forward_trace(
    s0: &BoundingSphere<2>,
    known: &[KnownBody],
    p: &BoundaryPoint,
    level: usize,
) -> Option<(Vector<2>, f64)> {
    let a = s0.radius;
    let mut pos = p.z_vec();
    let mut dir = p.normal_vec();
    let mut len = 0.0;
    // Leave the starting body before looking for crossings.
    let min_len = 1e-7 * a;
    for _ in 0..level {
        let crossing = known
            .iter()
            .filter_map(|k| k.crossing(&pos, &dir, min_len).map(|c| (c, k)))
            .min_by(|x, y| x.0.length().total_cmp(&y.0.length()));
        let exit = sphere_exit(s0, &pos, &dir);
        match crossing {
            Some((Crossing::Known { l, .. }, kb)) if l < exit => {
                let fit = kb.fit(&(pos + l * dir)).ok()?;
                let (l, q, n) = fit.ray_hit(&pos, &dir, l)?;
                let fit = kb.fit(&q).ok()?;
                let (l, q, n) = fit.ray_hit(&pos, &dir, l).unwrap_or((l, q, n));
                len += l;
                pos = q;
                dir = dir - 2.0 * dir.dot(&n) * n;
            }
            Some((Crossing::Cap { l, .. }, _)) if l < exit => return None,
            _ => return Some((pos + exit * dir, len + exit)),
        }
    }
    None
}

/// Distance along `d` from a point inside S0 to S0.
fn sphere_exit(s0: &BoundingSphere<2>, o: &Vector<2>, d: &Vector<2>) -> f64 {
    let r = o - s0.center;
    let b = r.dot(d);
    let c = r.norm_squared() - s0.radius * s0.radius;
    -b + (b * b - c).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TraceLimits;
    use crate::geometry::disc_scene;
    use crate::spectrum::{diag_spectrum, DEFAULT_STENCIL};

    fn circle_points(spacing: f64, around: f64, count: usize) -> Vec<(Vector<2>, Vector<2>)> {
        (0..count)
            .map(|i| {
                let phi = around + (i as f64 - (count / 2) as f64) * spacing;
                let n = Vector::<2>::new(phi.cos(), phi.sin());
                (n, n)
            })
            .collect()
    }

    #[test]
    fn circle_fit_recovers_curvature_and_normal() {
        let pts = circle_points(1e-3, 0.7, 41);
        let q = Vector::<2>::new(0.7f64.cos(), 0.7f64.sin());
        let fit = fit_local_curve(&pts, &q, 10.0 * 1e-3).unwrap();
        assert!(
            (fit.curvature - 1.0).abs() < 1e-3,
            "curvature {}",
            fit.curvature
        );
        let ang = fit.normal.dot(&q).clamp(-1.0, 1.0).acos();
        assert!(ang < 1e-4, "normal error {ang}");
        assert!((fit.foot - q).norm() < 1e-9);
        assert!(!fit.non_convex);
    }

    #[test]
    fn collinear_points_are_flagged() {
        let n = Vector::<2>::new(0.0, 1.0);
        let pts: Vec<_> = (0..21)
            .map(|i| (Vector::<2>::new(i as f64 * 1e-3, 0.0), n))
            .collect();
        let fit = fit_local_curve(&pts, &Vector::<2>::new(0.01, 0.0), 0.01).unwrap();
        assert!(fit.curvature.abs() < 1e-6);
        assert!(fit.non_convex);
    }

    #[test]
    fn sparse_support_is_an_error() {
        let pts = circle_points(1e-3, 0.0, 4);
        let err = fit_local_curve(&pts, &Vector::<2>::new(1.0, 0.0), 0.01).unwrap_err();
        assert_eq!(
            err,
            ReconstructionError::InsufficientSupport {
                needed: MIN_FIT_POINTS
            }
        );
    }

    #[test]
    fn closest_point_on_fit() {
        let pts = circle_points(1e-3, 0.0, 41);
        let fit = fit_local_curve(&pts, &Vector::<2>::new(1.0, 0.0), 0.01).unwrap();
        let p = fit.closest(&Vector::<2>::new(2.0, 0.005));
        assert!((p.norm() - 1.0).abs() < 1e-9);
        assert!((p.y / p.x - 0.0025).abs() < 1e-6);
    }

    fn diag(scene: &crate::geometry::Scene<2>, n: usize) -> DiagonalDataset {
        diag_spectrum(
            scene,
            &AngularGrid::new(n),
            DEFAULT_STENCIL,
            512,
            &TraceLimits::default(),
        )
        .measured()
    }

    #[test]
    fn off_center_disc_seed() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0)]);
        let (rho, theta, z) = seed_first_body(&scene.s0, &diag(&scene, 256)).unwrap();
        assert!((rho - 2.0).abs() < 1e-9);
        assert!((crate::spectrum::wrap_diff(theta - std::f64::consts::PI)).abs() < 1e-9);
        assert!((z - Vector::<2>::new(-3.0, 0.0)).norm() < 1e-9);
        // z_K - x_K is along the inward normal with length rho / 2.
        let x = scene.s0.point_at(theta);
        let d = z - x;
        assert!((d.norm() - rho / 2.0).abs() < 1e-12);
        assert!(cross(&d, &scene.s0.inward_normal(&x)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_discs_tie() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)]);
        let err = seed_first_body(&scene.s0, &diag(&scene, 256)).unwrap_err();
        assert!(
            matches!(err, ReconstructionError::NonUniqueMinimum { .. }),
            "{err}"
        );
    }

    #[test]
    fn second_seed_beyond_the_line() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 0.9)]);
        let line = SeparatingLine {
            point: [0.0, 0.0],
            normal: [1.0, 0.0],
        };
        let s = seed_second_body(&scene.s0, &diag(&scene, 256), Some(&line)).unwrap();
        assert!((v2(s.z_k) - Vector::<2>::new(-3.0, 0.0)).norm() < 1e-9);
        assert!((s.tau2 - 2.2).abs() < 1e-9);
        assert!((v2(s.z2) - Vector::<2>::new(2.9, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn one_body_has_no_separating_line() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0)]);
        let err = reconstruct_all(
            &scene.s0,
            &diag(&scene, 256),
            None,
            &ReconstructionConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, ReconstructionError::NoSeparatingLine);
    }

    #[test]
    fn sides_render_as_labels() {
        assert_eq!(Side::Both.as_str(), "LR");
        assert_eq!(Side::Left.as_str(), "L");
        assert_eq!(Side::Right.as_str(), "R");
    }
}
