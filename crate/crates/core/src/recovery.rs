//! Ray directions from derivatives of travelling times, the single-body
//! reconstruction from diagonal minima, vacuous lines and the convex hull.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RecoveryError;
use crate::flow::{
    trace, trace_summary, two_point_continuation, PhasePoint, TraceLimits, TraceStatus, Trajectory,
};
use crate::geometry::{BoundingSphere, Scene, Vector};
use crate::spectrum::{
    echograph, wrap_angle, wrap_diff, DiagonalDataset, GridDescription, SpectrumDataset,
};

/// Tangential components closer to 1 than this leave the normal sign
/// undetermined.
const NEAR_NORMAL: f64 = 1e-8;

/// Travelling times of one branch on the angular stencil around `(x0, y0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPatch {
    pub x_angle: f64,
    pub y_angle: f64,
    pub h: f64,
    pub t: f64,
    /// `T(x0 + h, y0)` and `T(x0 - h, y0)`.
    pub x_plus: f64,
    pub x_minus: f64,
    /// `T(x0, y0 + h)` and `T(x0, y0 - h)`.
    pub y_plus: f64,
    pub y_minus: f64,
    pub branch_id: Option<u64>,
}

impl BranchPatch {
    /// `dT/dtheta_x` and `dT/dtheta_y` by central differences.
    pub fn gradient(&self) -> (f64, f64) {
        (
            (self.x_plus - self.x_minus) / (2.0 * self.h),
            (self.y_plus - self.y_minus) / (2.0 * self.h),
        )
    }

    /// Time-Lipschitz check that all stencil samples can lie on one branch.
    pub fn validate(&self, a: f64) -> Result<(), RecoveryError> {
        let bound = 5.0 * self.h * a;
        for (name, v) in [
            ("x+", self.x_plus),
            ("x-", self.x_minus),
            ("y+", self.y_plus),
            ("y-", self.y_minus),
        ] {
            if (v - self.t).abs() > bound {
                return Err(RecoveryError::BranchBroken {
                    reason: format!(
                        "{name} jump {:.3e} exceeds {:.3e}",
                        (v - self.t).abs(),
                        bound
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Time of `traj` corrected to first order to end exactly at `y`.
fn time_to(traj: &Trajectory<2>, y: &Vector<2>) -> f64 {
    let e = traj.exit.expect("exited trajectory");
    traj.total_time + e.u.dot(&(y - e.x))
}

/// Build a patch from simulated data by continuing the branch of `seed`
/// to every stencil point.
pub fn oracle_patch(
    scene: &Scene<2>,
    seed: &Trajectory<2>,
    h: f64,
    limits: &TraceLimits,
) -> Result<BranchPatch, RecoveryError> {
    let exit = seed.exit.ok_or(RecoveryError::BranchBroken {
        reason: "seed does not exit".into(),
    })?;
    let s0 = &scene.s0;
    let tx = wrap_angle(s0.angle_of(&seed.entry.x));
    let ty = wrap_angle(s0.angle_of(&exit.x));
    let at = |dx: f64, dy: f64| -> Result<f64, RecoveryError> {
        let x = s0.point_at(tx + dx);
        let y = s0.point_at(ty + dy);
        let c = two_point_continuation(scene, seed, (x, y), limits)?;
        Ok(time_to(&c, &y))
    };
    let patch = BranchPatch {
        x_angle: tx,
        y_angle: ty,
        h,
        t: seed.total_time,
        x_plus: at(h, 0.0)?,
        x_minus: at(-h, 0.0)?,
        y_plus: at(0.0, h)?,
        y_minus: at(0.0, -h)?,
        branch_id: Some(seed.signature()),
    };
    patch.validate(s0.radius)?;
    Ok(patch)
}

/// Build a patch from time-only samples: at each stencil point the
/// candidate time nearest to `t` is taken.
pub fn measured_patch(
    s0: &BoundingSphere<2>,
    x_angle: f64,
    y_angle: f64,
    t: f64,
    h: f64,
    stencil: [&[f64]; 4],
) -> Result<BranchPatch, RecoveryError> {
    let pick = |c: &[f64]| -> Result<f64, RecoveryError> {
        c.iter()
            .copied()
            .min_by(|p, q| (p - t).abs().total_cmp(&(q - t).abs()))
            .ok_or(RecoveryError::BranchBroken {
                reason: "empty stencil cell".into(),
            })
    };
    let patch = BranchPatch {
        x_angle,
        y_angle,
        h,
        t,
        x_plus: pick(stencil[0])?,
        x_minus: pick(stencil[1])?,
        y_plus: pick(stencil[2])?,
        y_minus: pick(stencil[3])?,
        branch_id: None,
    };
    patch.validate(s0.radius)?;
    Ok(patch)
}

fn complete(
    tangential: f64,
    tangent: Vector<2>,
    normal: Vector<2>,
) -> Result<Vector<2>, RecoveryError> {
    if tangential.abs() > 1.0 - NEAR_NORMAL {
        return Err(RecoveryError::NearNormalAmbiguity {
            norm: tangential.abs(),
        });
    }
    Ok(tangential * tangent + (1.0 - tangential * tangential).sqrt() * normal)
}

/// Travel directions `u` at `x0` (into the ball) and `v` at `y0` (out of
/// the ball) of the branch, from `dT = <v, b> - <u, a>`.
pub fn recover_directions(
    s0: &BoundingSphere<2>,
    patch: &BranchPatch,
) -> Result<(Vector<2>, Vector<2>), RecoveryError> {
    let a = s0.radius;
    let (gx, gy) = patch.gradient();
    let x = s0.point_at(patch.x_angle);
    let y = s0.point_at(patch.y_angle);
    let u = complete(-gx / a, s0.tangent_at(patch.x_angle), s0.inward_normal(&x))?;
    let v = complete(gy / a, s0.tangent_at(patch.y_angle), -s0.inward_normal(&y))?;
    Ok((u, v))
}

/// Unit vector from the middle reflection point toward `x0` for a reflexive
/// diagonal branch with `dS/dtheta = slope`.
pub fn recover_reflexive_direction(
    s0: &BoundingSphere<2>,
    x_angle: f64,
    slope: f64,
) -> Result<Vector<2>, RecoveryError> {
    let x = s0.point_at(x_angle);
    complete(
        slope / (2.0 * s0.radius),
        s0.tangent_at(x_angle),
        -s0.inward_normal(&x),
    )
}

/// Boundary point of a single convex body seen from every grid point:
/// `z = x - (f/2) u` with `f` the smallest diagonal time.
pub fn single_convex_reconstruct(
    s0: &BoundingSphere<2>,
    data: &DiagonalDataset,
) -> Result<Vec<Vector<2>>, RecoveryError> {
    let echo = echograph(s0, data);
    if echo.is_empty() {
        return Err(RecoveryError::EmptyDiagonal);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < echo.len() {
        let mut j = i;
        while j < echo.len() && echo[j].x_angle == echo[i].x_angle {
            j += 1;
        }
        let first = echo[i..j]
            .iter()
            .min_by(|p, q| p.t.total_cmp(&q.t))
            .expect("nonempty column");
        if let (true, Some(slope)) = (first.reflexive, first.slope) {
            if let Ok(u) = recover_reflexive_direction(s0, first.x_angle, slope) {
                out.push(first.x_vec() - 0.5 * first.t * u);
            }
        }
        i = j;
    }
    if out.is_empty() {
        return Err(RecoveryError::EmptyDiagonal);
    }
    Ok(out)
}

/// Source of the measurement "does `T(x, y)` contain `|x - y|`".
pub trait ChordMeasurement: Sync {
    fn sphere(&self) -> &BoundingSphere<2>;
    fn chord_is_vacuous(&self, x_angle: f64, y_angle: f64, tol: f64)
        -> Result<bool, RecoveryError>;
}

/// Vacuity answered from a stored dataset by nearest-cell lookup.
pub struct DatasetChords<'a> {
    pub s0: BoundingSphere<2>,
    pub data: &'a SpectrumDataset,
    x_index: Vec<(f64, std::ops::Range<usize>)>,
}

impl<'a> DatasetChords<'a> {
    pub fn new(s0: BoundingSphere<2>, data: &'a SpectrumDataset) -> Self {
        let mut x_index: Vec<(f64, std::ops::Range<usize>)> = Vec::new();
        for (i, s) in data.samples.iter().enumerate() {
            match x_index.last_mut() {
                Some((xa, r)) if *xa == s.x_angle => r.end = i + 1,
                _ => x_index.push((s.x_angle, i..i + 1)),
            }
        }
        Self { s0, data, x_index }
    }

    fn snaps(&self) -> (f64, f64) {
        match &self.data.grid {
            GridDescription::Sweep { x, directions } => (0.5 * x.step(), TAU / *directions as f64),
            GridDescription::Pairs { x, y, .. } => (0.5 * x.step(), 0.5 * y.step()),
        }
    }
}

impl ChordMeasurement for DatasetChords<'_> {
    fn sphere(&self) -> &BoundingSphere<2> {
        &self.s0
    }

    fn chord_is_vacuous(
        &self,
        x_angle: f64,
        y_angle: f64,
        tol: f64,
    ) -> Result<bool, RecoveryError> {
        let (sx, sy) = self.snaps();
        let mut seen = false;
        for (xa, range) in &self.x_index {
            if wrap_diff(xa - x_angle).abs() > sx + 1e-12 {
                continue;
            }
            seen = true;
            for s in &self.data.samples[range.clone()] {
                if wrap_diff(s.y_angle - y_angle).abs() > sy + 1e-12 {
                    continue;
                }
                if (s.t - (s.x - s.y).norm()).abs() <= tol {
                    return Ok(true);
                }
            }
        }
        if seen {
            Ok(false)
        } else {
            Err(RecoveryError::MissingCell)
        }
    }
}

/// Vacuity answered by a fresh straight-ray measurement in the scene.
pub struct LiveChords<'a> {
    pub scene: &'a Scene<2>,
    pub limits: TraceLimits,
}

impl ChordMeasurement for LiveChords<'_> {
    fn sphere(&self) -> &BoundingSphere<2> {
        &self.scene.s0
    }

    fn chord_is_vacuous(
        &self,
        x_angle: f64,
        y_angle: f64,
        tol: f64,
    ) -> Result<bool, RecoveryError> {
        let s0 = &self.scene.s0;
        let x = s0.point_at(x_angle);
        let y = s0.point_at(y_angle);
        let d = y - x;
        if d.norm() <= tol {
            return Ok(true);
        }
        let s = trace_summary(self.scene, PhasePoint::new(x, d.normalize()), &self.limits)?;
        Ok(s.status == TraceStatus::Exited
            && s.reflections == 0
            && (s.total_time - d.norm()).abs() <= tol)
    }
}

/// Whether the chord from `x` to `y` is vacuous (default `tol = 1e-6 a`).
pub fn vacuous_line_test<M: ChordMeasurement>(
    m: &M,
    x_angle: f64,
    y_angle: f64,
    tol: Option<f64>,
) -> Result<bool, RecoveryError> {
    let tol = tol.unwrap_or(1e-6 * m.sphere().radius);
    m.chord_is_vacuous(x_angle, y_angle, tol)
}

/// Endpoint angles of the line `<p - c, omega> = s`, `omega = e_theta`.
fn line_chord(s0: &BoundingSphere<2>, theta: f64, s: f64) -> (f64, f64) {
    let half = (s / s0.radius).clamp(-1.0, 1.0).acos();
    (theta - half, theta + half)
}

fn line_is_vacuous<M: ChordMeasurement>(
    m: &M,
    theta: f64,
    s: f64,
    tol: f64,
) -> Result<bool, RecoveryError> {
    let (x, y) = line_chord(m.sphere(), theta, s);
    m.chord_is_vacuous(x, y, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingLine {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

impl SeparatingLine {
    pub fn point_vec(&self) -> Vector<2> {
        Vector::<2>::new(self.point[0], self.point[1])
    }

    pub fn normal_vec(&self) -> Vector<2> {
        Vector::<2>::new(self.normal[0], self.normal[1])
    }

    /// Signed distance of `p` from the line along the normal.
    pub fn side(&self, p: &Vector<2>) -> f64 {
        (p - self.point_vec()).dot(&self.normal_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuousComponent {
    pub label: usize,
    pub cells: usize,
    /// Contains the lines that only graze S0.
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuousReport {
    pub components: Vec<VacuousComponent>,
    pub separating_line: Option<SeparatingLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullResult {
    /// Direction angles of the support lines.
    pub angles: Vec<f64>,
    /// Support function values about the S0 center.
    pub support: Vec<f64>,
    /// Vertices of the circumscribed polygon.
    pub polyline: Vec<Vector<2>>,
    pub report: VacuousReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullGrid {
    pub directions: usize,
    /// Offsets are swept at resolution `a / offsets_per_radius`.
    pub offsets_per_radius: usize,
}

impl Default for HullGrid {
    fn default() -> Self {
        Self {
            directions: 360,
            offsets_per_radius: 2048,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Support function of the obstacle from vacuous lines, the circumscribed
/// polygon, and the path components of the set of vacuous lines.
pub fn convex_hull_recover<M: ChordMeasurement>(
    m: &M,
    grid: &HullGrid,
) -> Result<HullResult, RecoveryError> {
    let s0 = *m.sphere();
    let a = s0.radius;
    let tol = 1e-6 * a;
    let nd = grid.directions;
    let ns = 2 * grid.offsets_per_radius;
    let ds = 2.0 * a / ns as f64;
    let angles: Vec<f64> = (0..nd).map(|i| TAU * i as f64 / nd as f64).collect();
    let offset = |j: usize| -a + (j as f64 + 0.5) * ds;

    let rows: Vec<Vec<bool>> = angles
        .par_iter()
        .map(|&th| {
            (0..ns)
                .map(|j| line_is_vacuous(m, th, offset(j), tol))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let support: Vec<f64> = angles
        .par_iter()
        .zip(&rows)
        .map(|(&th, row)| {
            // Scan inward from the far edge to the first non-vacuous line.
            let Some(j) = (0..ns).rev().find(|&j| !row[j]) else {
                return Ok(f64::NAN);
            };
            if j + 1 == ns {
                return Ok(offset(j));
            }
            let (mut lo, mut hi) = (offset(j), offset(j + 1));
            while hi - lo > 1e-12 * a {
                let mid = 0.5 * (lo + hi);
                if line_is_vacuous(m, th, mid, tol)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect::<Result<_, RecoveryError>>()?;

    let mut polyline = Vec::new();
    for i in 0..nd {
        let k = (i + 1) % nd;
        let (w1, w2) = (
            Vector::<2>::new(angles[i].cos(), angles[i].sin()),
            Vector::<2>::new(angles[k].cos(), angles[k].sin()),
        );
        let det = w1.x * w2.y - w1.y * w2.x;
        if det.abs() < 1e-14 || !support[i].is_finite() || !support[k].is_finite() {
            continue;
        }
        let (h1, h2) = (support[i], support[k]);
        let p = Vector::<2>::new((h1 * w2.y - h2 * w1.y) / det, (w1.x * h2 - w2.x * h1) / det);
        polyline.push(s0.center + p);
    }

    // Components over (direction, offset), with (theta, s) ~ (theta + pi, -s).
    let idx = |i: usize, j: usize| i * ns + j;
    let mut parent: Vec<usize> = (0..nd * ns).collect();
    let half = if nd.is_multiple_of(2) {
        Some(nd / 2)
    } else {
        None
    };
    for i in 0..nd {
        for j in 0..ns {
            if !rows[i][j] {
                continue;
            }
            if j + 1 < ns && rows[i][j + 1] {
                union(&mut parent, idx(i, j), idx(i, j + 1));
            }
            let ni = (i + 1) % nd;
            if rows[ni][j] {
                union(&mut parent, idx(i, j), idx(ni, j));
            }
            if let Some(hf) = half {
                let mi = (i + hf) % nd;
                let mj = ns - 1 - j;
                if rows[mi][mj] {
                    union(&mut parent, idx(i, j), idx(mi, mj));
                }
            }
        }
    }
    let mut labels: Vec<(usize, usize, bool)> = Vec::new();
    let mut best: Option<(usize, usize, usize, usize)> = None; // (root, run, i, j)
    for (i, row) in rows.iter().enumerate().take(nd) {
        let mut j = 0;
        while j < ns {
            if !row[j] {
                j += 1;
                continue;
            }
            let start = j;
            while j < ns && row[j] {
                j += 1;
            }
            let root = find(&mut parent, idx(i, start));
            let edge = start == 0 || j == ns;
            match labels.iter_mut().find(|l| l.0 == root) {
                Some(l) => {
                    l.1 += j - start;
                    l.2 |= edge;
                }
                None => labels.push((root, j - start, edge)),
            }
            if !edge && best.is_none_or(|b| j - start > b.1) {
                best = Some((root, j - start, i, (start + j) / 2));
            }
        }
    }
    let trivial_roots: Vec<usize> = labels.iter().filter(|l| l.2).map(|l| l.0).collect();
    let components = labels
        .iter()
        .enumerate()
        .map(|(k, l)| VacuousComponent {
            label: k,
            cells: l.1,
            trivial: l.2,
        })
        .collect();
    let separating_line = best
        .filter(|b| !trivial_roots.contains(&b.0))
        .map(|(_, _, i, j)| {
            let w = Vector::<2>::new(angles[i].cos(), angles[i].sin());
            let p = s0.center + offset(j) * w;
            SeparatingLine {
                point: [p.x, p.y],
                normal: [w.x, w.y],
            }
        });
    Ok(HullResult {
        angles,
        support,
        polyline,
        report: VacuousReport {
            components,
            separating_line,
        },
    })
}

/// Oracle direction check for a random branch: the recovered directions
/// against the simulated ones, as angles in radians.
pub fn direction_errors(
    scene: &Scene<2>,
    entry: PhasePoint<2>,
    h: f64,
    limits: &TraceLimits,
) -> Result<(f64, f64), RecoveryError> {
    let seed = trace(scene, entry, limits)?;
    if seed.status != TraceStatus::Exited {
        return Err(RecoveryError::BranchBroken {
            reason: "ray does not exit".into(),
        });
    }
    let patch = oracle_patch(scene, &seed, h, limits)?;
    let (u, v) = recover_directions(&scene.s0, &patch)?;
    let ang = |p: Vector<2>, q: Vector<2>| {
        let c = p.dot(&q).clamp(-1.0, 1.0);
        let s = p.x * q.y - p.y * q.x;
        s.atan2(c).abs().min(PI)
    };
    Ok((ang(u, seed.entry.u), ang(v, seed.exit.unwrap().u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disc_scene, two_ellipse_example};
    use crate::spectrum::{diag_spectrum, sample_spectrum, AngularGrid, DEFAULT_STENCIL};
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64) -> Vector<2> {
        Vector::<2>::new(x, y)
    }

    #[test]
    fn straight_chord_directions() {
        let scene = Scene::empty(BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap());
        let seed = trace(
            &scene,
            PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)),
            &TraceLimits::default(),
        )
        .unwrap();
        let patch = oracle_patch(&scene, &seed, 1e-4, &TraceLimits::default()).unwrap();
        let (u, w) = recover_directions(&scene.s0, &patch).unwrap();
        assert_relative_eq!(u, v(1.0, 0.0), epsilon = 1e-7);
        assert_relative_eq!(w, v(1.0, 0.0), epsilon = 1e-7);
    }

    #[test]
    fn head_on_branch_directions() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0)]);
        let lim = TraceLimits::default();
        let seed = trace(&scene, PhasePoint::new(v(-4.0, 0.0), v(1.0, 0.0)), &lim).unwrap();
        let patch = oracle_patch(&scene, &seed, 1e-4, &lim).unwrap();
        let (u, w) = recover_directions(&scene.s0, &patch).unwrap();
        assert_relative_eq!(u, v(1.0, 0.0), epsilon = 1e-7);
        assert_relative_eq!(w, v(-1.0, 0.0), epsilon = 1e-7);
        assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reflexive_direction_is_radial_for_centered_disc() {
        let s0 = BoundingSphere::new(Vector::<2>::zeros(), 4.0).unwrap();
        let u = recover_reflexive_direction(&s0, PI, 0.0).unwrap();
        assert_relative_eq!(u, v(-1.0, 0.0), epsilon = 1e-15);
        assert!(matches!(
            recover_reflexive_direction(&s0, PI, 8.0),
            Err(RecoveryError::NearNormalAmbiguity { .. })
        ));
    }

    #[test]
    fn lipschitz_filter_rejects_jumps() {
        let p = BranchPatch {
            x_angle: 0.0,
            y_angle: 0.0,
            h: 1e-4,
            t: 2.0,
            x_plus: 2.0,
            x_minus: 2.0,
            y_plus: 2.5,
            y_minus: 2.0,
            branch_id: None,
        };
        assert!(matches!(
            p.validate(4.0),
            Err(RecoveryError::BranchBroken { .. })
        ));
    }

    #[test]
    fn centered_disc_single_body_reconstruction() {
        let scene = disc_scene(4.0, &[([0.0, 0.0], 1.0)]);
        let data = diag_spectrum(
            &scene,
            &AngularGrid::new(64),
            DEFAULT_STENCIL,
            256,
            &TraceLimits::default(),
        );
        let cloud = single_convex_reconstruct(&scene.s0, &data.measured()).unwrap();
        assert_eq!(cloud.len(), 64);
        for z in cloud {
            assert!((z.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_diagonal_is_an_error() {
        let scene = disc_scene(4.0, &[([0.0, 0.0], 1.0)]);
        let mut data = diag_spectrum(
            &scene,
            &AngularGrid::new(4),
            DEFAULT_STENCIL,
            64,
            &TraceLimits::default(),
        );
        for c in &mut data.columns {
            c.center.clear();
        }
        assert_eq!(
            single_convex_reconstruct(&scene.s0, &data),
            Err(RecoveryError::EmptyDiagonal)
        );
    }

    #[test]
    fn vacuous_chords_two_discs() {
        let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)]);
        let live = LiveChords {
            scene: &scene,
            limits: TraceLimits::default(),
        };
        assert!(vacuous_line_test(&live, PI / 2.0, 3.0 * PI / 2.0, None).unwrap());
        assert!(!vacuous_line_test(&live, PI, 0.0, None).unwrap());
        let data =
            sample_spectrum(&scene, &AngularGrid::new(64), 64, &TraceLimits::default()).measured();
        let table = DatasetChords::new(scene.s0, &data);
        assert!(vacuous_line_test(&table, PI / 2.0, 3.0 * PI / 2.0, None).unwrap());
        assert!(!vacuous_line_test(&table, PI, 0.0, None).unwrap());
    }

    #[test]
    fn centered_disc_hull() {
        let scene = disc_scene(4.0, &[([0.0, 0.0], 1.0)]);
        let live = LiveChords {
            scene: &scene,
            limits: TraceLimits::default(),
        };
        let grid = HullGrid {
            directions: 36,
            offsets_per_radius: 256,
        };
        let hull = convex_hull_recover(&live, &grid).unwrap();
        for h in &hull.support {
            assert!((h - 1.0).abs() < 1e-9);
        }
        assert!(hull.report.separating_line.is_none());
        assert_eq!(hull.report.components.len(), 1);
    }

    #[test]
    fn example_scene_has_separating_line() {
        let scene = two_ellipse_example();
        let live = LiveChords {
            scene: &scene,
            limits: TraceLimits::default(),
        };
        let grid = HullGrid {
            directions: 72,
            offsets_per_radius: 256,
        };
        let hull = convex_hull_recover(&live, &grid).unwrap();
        let line = hull.report.separating_line.expect("separating line");
        let s1: Vec<f64> = scene.bodies[0]
            .boundary_samples(360)
            .iter()
            .map(|p| line.side(p))
            .collect();
        let s2: Vec<f64> = scene.bodies[1]
            .boundary_samples(360)
            .iter()
            .map(|p| line.side(p))
            .collect();
        let (lo1, hi1) = (
            s1.iter().cloned().fold(f64::MAX, f64::min),
            s1.iter().cloned().fold(f64::MIN, f64::max),
        );
        let (lo2, hi2) = (
            s2.iter().cloned().fold(f64::MAX, f64::min),
            s2.iter().cloned().fold(f64::MIN, f64::max),
        );
        assert!((hi1 < 0.0 && lo2 > 0.0) || (hi2 < 0.0 && lo1 > 0.0));
        assert!(hull.report.components.iter().any(|c| !c.trivial));
    }
}
