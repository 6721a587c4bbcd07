//! Scene files, CSV tables and JSON manifests.
//!
//! Numbers are written in the shortest decimal form that reads back to the
//! same `f64`. Every file is written to a temporary sibling first and then
//! renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IoError;
use crate::flow::Trajectory;
use crate::geometry::{rotation_2d, rotation_3d, BoundingSphere, ConvexBody, Scene, Shape, Vector};
use crate::reconstruct::ReconstructionState;
use crate::recovery::HullResult;
use crate::spectrum::{
    AngularGrid, DatasetMode, DiagColumn, DiagonalDataset, EchoPoint, GridDescription,
    SpectrumDataset, SpectrumSample,
};

fn file_err(path: &Path, cause: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        cause,
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    }
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| file_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| file_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        cause: e,
    })?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// SHA-256 of the compact JSON form of `value`, as hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let s = serde_json::to_string(value).expect("serializable config");
    hex::encode(Sha256::digest(s.as_bytes()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let s = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        cause: e,
    })
}

fn csv_bytes<T: Serialize>(path: &Path, rows: &[T]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, 0, e))?;
    }
    w.into_inner().map_err(|e| IoError::Csv {
        path: path.display().to_string(),
        line: 0,
        reason: e.to_string(),
    })
}

fn csv_err(path: &Path, line: usize, e: csv::Error) -> IoError {
    IoError::Csv {
        path: path.display().to_string(),
        line: e.position().map(|p| p.line() as usize).unwrap_or(line),
        reason: e.to_string(),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    write_atomic(path, &csv_bytes(path, rows)?)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, 0, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| csv_err(path, i + 2, e)))
        .collect()
}

// ---------------------------------------------------------------- scenes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Body entry of a scene file. Planar scenes use `disc` and `ellipse`,
/// spatial ones `ball` and `ellipsoid` (rotation as x-y-z angles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BodySpec {
    Disc {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        #[serde(default)]
        rotation_deg: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        #[serde(default)]
        rotation_deg: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub s0: SphereSpec,
    pub bodies: Vec<BodySpec>,
}

#[derive(Debug, Clone)]
pub enum AnyScene {
    Planar(Scene<2>),
    Spatial(Scene<3>),
}

fn vector<const D: usize>(v: &[f64], what: &str) -> Result<Vector<D>, IoError> {
    if v.len() != D {
        return Err(IoError::Scene(format!(
            "{what} has {} coordinates, expected {D}",
            v.len()
        )));
    }
    Ok(Vector::<D>::from_column_slice(v))
}

fn geometry(e: crate::error::GeometryError) -> IoError {
    IoError::Scene(e.to_string())
}

impl SceneSpec {
    pub fn build(&self) -> Result<AnyScene, IoError> {
        match self.s0.center.len() {
            2 => {
                let s0 =
                    BoundingSphere::new(vector::<2>(&self.s0.center, "s0 center")?, self.s0.radius)
                        .map_err(geometry)?;
                let bodies = self
                    .bodies
                    .iter()
                    .enumerate()
                    .map(|(i, b)| match b {
                        BodySpec::Disc { center, radius } => {
                            ConvexBody::ball(i + 1, vector::<2>(center, "disc center")?, *radius)
                                .map_err(geometry)
                        }
                        BodySpec::Ellipse {
                            center,
                            semi_axes,
                            rotation_deg,
                        } => ConvexBody::ellipsoid(
                            i + 1,
                            vector::<2>(center, "ellipse center")?,
                            vector::<2>(semi_axes, "ellipse semi-axes")?,
                            rotation_2d(*rotation_deg),
                        )
                        .map_err(geometry),
                        _ => Err(IoError::Scene(format!("body {} is not planar", i + 1))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AnyScene::Planar(Scene::new(s0, bodies)))
            }
            3 => {
                let s0 =
                    BoundingSphere::new(vector::<3>(&self.s0.center, "s0 center")?, self.s0.radius)
                        .map_err(geometry)?;
                let bodies = self
                    .bodies
                    .iter()
                    .enumerate()
                    .map(|(i, b)| match b {
                        BodySpec::Ball { center, radius } => {
                            ConvexBody::ball(i + 1, vector::<3>(center, "ball center")?, *radius)
                                .map_err(geometry)
                        }
                        BodySpec::Ellipsoid {
                            center,
                            semi_axes,
                            rotation_deg,
                        } => ConvexBody::ellipsoid(
                            i + 1,
                            vector::<3>(center, "ellipsoid center")?,
                            vector::<3>(semi_axes, "ellipsoid semi-axes")?,
                            rotation_3d(*rotation_deg),
                        )
                        .map_err(geometry),
                        _ => Err(IoError::Scene(format!("body {} is not spatial", i + 1))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AnyScene::Spatial(Scene::new(s0, bodies)))
            }
            n => Err(IoError::Scene(format!("dimension {n} is not supported"))),
        }
    }

    /// Spec of a planar scene; implicit bodies have no file form.
    pub fn from_planar(scene: &Scene<2>) -> Result<Self, IoError> {
        let bodies = scene
            .bodies
            .iter()
            .map(|b| match &b.shape {
                Shape::Ball { center, radius } => Ok(BodySpec::Disc {
                    center: vec![center.x, center.y],
                    radius: *radius,
                }),
                Shape::Ellipsoid {
                    center,
                    semi_axes,
                    axes,
                } => Ok(BodySpec::Ellipse {
                    center: vec![center.x, center.y],
                    semi_axes: vec![semi_axes.x, semi_axes.y],
                    rotation_deg: axes[(1, 0)].atan2(axes[(0, 0)]).to_degrees(),
                }),
                Shape::Implicit(_) => Err(IoError::Scene(format!(
                    "body {} is implicit and cannot be written",
                    b.id
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            s0: SphereSpec {
                center: vec![scene.s0.center.x, scene.s0.center.y],
                radius: scene.s0.radius,
            },
            bodies,
        })
    }
}

pub fn read_scene(path: &Path) -> Result<AnyScene, IoError> {
    read_json::<SceneSpec>(path)?.build()
}

// ----------------------------------------------------------- trajectories

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub ray: usize,
    pub vertex: usize,
    pub x: f64,
    pub y: f64,
    /// Body hit at this vertex; empty at the entry and the exit.
    pub body: Option<usize>,
    /// Path length from the entry to this vertex.
    pub time: f64,
    pub status: String,
}

pub fn trajectory_rows(rays: &[Trajectory<2>]) -> Vec<TrajectoryRow> {
    let mut out = Vec::new();
    for (ray, tr) in rays.iter().enumerate() {
        let status = format!("{:?}", tr.status);
        let mut time = 0.0;
        let mut push = |vertex: usize, p: Vector<2>, body: Option<usize>, time: f64| {
            out.push(TrajectoryRow {
                ray,
                vertex,
                x: p.x,
                y: p.y,
                body,
                time,
                status: status.clone(),
            })
        };
        push(0, tr.entry.x, None, 0.0);
        for (i, r) in tr.reflections.iter().enumerate() {
            time += tr.segment_lengths.get(i).copied().unwrap_or(0.0);
            push(i + 1, r.point, Some(r.body), time);
        }
        let end = tr.exit.map(|e| e.x).or(tr.tangency);
        if let Some(p) = end {
            push(tr.reflections.len() + 1, p, None, tr.total_time);
        }
    }
    out
}

// --------------------------------------------------------------- spectra

/// One spectrum triple. Oracle columns are empty in measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    /// Diagonal grid column, or empty for a general spectrum.
    pub column: Option<usize>,
    /// `center`, `plus` or `minus` for diagonal data, `pair` otherwise.
    pub role: String,
    pub x_angle: f64,
    pub y_angle: f64,
    pub t: f64,
    pub k: Option<usize>,
    pub branch: Option<String>,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
}

fn sample_row(column: Option<usize>, role: &str, s: &SpectrumSample) -> SampleRow {
    SampleRow {
        column,
        role: role.to_string(),
        x_angle: s.x_angle,
        y_angle: s.y_angle,
        t: s.t,
        k: s.k,
        branch: s.branch_id.map(|b| format!("{b:016x}")),
        u1: s.entry_dir.map(|u| u.x),
        u2: s.entry_dir.map(|u| u.y),
        v1: s.exit_dir.map(|v| v.x),
        v2: s.exit_dir.map(|v| v.y),
    }
}

fn row_sample(s0: &BoundingSphere<2>, r: &SampleRow) -> Result<SpectrumSample, String> {
    let pair = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some(Vector::<2>::new(a, b)),
        _ => None,
    };
    let branch = match &r.branch {
        Some(b) => Some(u64::from_str_radix(b, 16).map_err(|e| format!("branch id {b}: {e}"))?),
        None => None,
    };
    Ok(SpectrumSample {
        x_angle: r.x_angle,
        y_angle: r.y_angle,
        x: s0.point_at(r.x_angle),
        y: s0.point_at(r.y_angle),
        t: r.t,
        k: r.k,
        branch_id: branch,
        entry_dir: pair(r.u1, r.u2),
        exit_dir: pair(r.v1, r.v2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalManifest {
    pub scene_hash: String,
    pub grid: AngularGrid,
    pub stencil: f64,
    pub sweep: usize,
    pub mode: DatasetMode,
    pub samples: usize,
}

pub fn diagonal_rows(data: &DiagonalDataset) -> Vec<SampleRow> {
    let mut out = Vec::new();
    for (i, c) in data.columns.iter().enumerate() {
        for (role, list) in [
            ("center", &c.center),
            ("plus", &c.plus),
            ("minus", &c.minus),
        ] {
            out.extend(list.iter().map(|s| sample_row(Some(i), role, s)));
        }
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_diagonal(dir: &Path, stem: &str, data: &DiagonalDataset) -> Result<(), IoError> {
    let rows = diagonal_rows(data);
    write_csv(&dir.join(format!("{stem}.csv")), &rows)?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &DiagonalManifest {
            scene_hash: data.scene_hash.clone(),
            grid: data.grid,
            stencil: data.stencil,
            sweep: data.sweep,
            mode: data.mode,
            samples: rows.len(),
        },
    )
}

pub fn read_diagonal(
    s0: &BoundingSphere<2>,
    dir: &Path,
    stem: &str,
) -> Result<DiagonalDataset, IoError> {
    let man: DiagonalManifest = read_json(&dir.join(format!("{stem}.json")))?;
    let path = dir.join(format!("{stem}.csv"));
    let rows: Vec<SampleRow> = read_csv(&path)?;
    let mut columns: Vec<DiagColumn> = (0..man.grid.count)
        .map(|i| {
            let theta = man.grid.angle(i);
            DiagColumn {
                theta,
                x: s0.point_at(theta),
                center: Vec::new(),
                plus: Vec::new(),
                minus: Vec::new(),
            }
        })
        .collect();
    for (line, r) in rows.iter().enumerate() {
        let bad = |reason: String| IoError::Csv {
            path: path.display().to_string(),
            line: line + 2,
            reason,
        };
        let c = r
            .column
            .filter(|c| *c < columns.len())
            .ok_or_else(|| bad("column index missing or out of range".into()))?;
        let s = row_sample(s0, r).map_err(bad)?;
        match r.role.as_str() {
            "center" => columns[c].center.push(s),
            "plus" => columns[c].plus.push(s),
            "minus" => columns[c].minus.push(s),
            other => return Err(bad(format!("unknown role {other}"))),
        }
    }
    Ok(DiagonalDataset {
        scene_hash: man.scene_hash,
        grid: man.grid,
        stencil: man.stencil,
        sweep: man.sweep,
        mode: man.mode,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumManifest {
    pub scene_hash: String,
    pub grid: GridDescription,
    pub mode: DatasetMode,
    pub samples: usize,
    pub skipped: usize,
}

pub fn write_spectrum(dir: &Path, stem: &str, data: &SpectrumDataset) -> Result<(), IoError> {
    let rows: Vec<SampleRow> = data
        .samples
        .iter()
        .map(|s| sample_row(None, "pair", s))
        .collect();
    write_csv(&dir.join(format!("{stem}.csv")), &rows)?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &SpectrumManifest {
            scene_hash: data.scene_hash.clone(),
            grid: data.grid.clone(),
            mode: data.mode,
            samples: rows.len(),
            skipped: data.skipped,
        },
    )
}

pub fn read_spectrum(
    s0: &BoundingSphere<2>,
    dir: &Path,
    stem: &str,
) -> Result<SpectrumDataset, IoError> {
    let man: SpectrumManifest = read_json(&dir.join(format!("{stem}.json")))?;
    let path = dir.join(format!("{stem}.csv"));
    let rows: Vec<SampleRow> = read_csv(&path)?;
    let samples = rows
        .iter()
        .enumerate()
        .map(|(line, r)| {
            row_sample(s0, r).map_err(|reason| IoError::Csv {
                path: path.display().to_string(),
                line: line + 2,
                reason,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectrumDataset {
        scene_hash: man.scene_hash,
        grid: man.grid,
        mode: man.mode,
        samples,
        skipped: man.skipped,
    })
}

// ------------------------------------------------------------- echograph

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoRow {
    pub x_angle: f64,
    pub t: f64,
    pub w1: f64,
    pub w2: f64,
    pub reflexive: bool,
    pub order: Option<usize>,
    pub slope: Option<f64>,
}

pub fn echo_rows(echo: &[EchoPoint]) -> Vec<EchoRow> {
    echo.iter()
        .map(|e| EchoRow {
            x_angle: e.x_angle,
            t: e.t,
            w1: e.w[0],
            w2: e.w[1],
            reflexive: e.reflexive,
            order: e.order,
            slope: e.slope,
        })
        .collect()
}

// ------------------------------------------------------------------ hull

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRow {
    pub angle: f64,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub x: f64,
    pub y: f64,
}

/// Writes `hull.csv` (polyline), `support.csv` and `vacuous.json`.
pub fn write_hull(dir: &Path, hull: &HullResult) -> Result<(), IoError> {
    let poly: Vec<PointRow> = hull
        .polyline
        .iter()
        .map(|p| PointRow { x: p.x, y: p.y })
        .collect();
    write_csv(&dir.join("hull.csv"), &poly)?;
    let sup: Vec<SupportRow> = hull
        .angles
        .iter()
        .zip(&hull.support)
        .map(|(a, s)| SupportRow {
            angle: *a,
            support: *s,
        })
        .collect();
    write_csv(&dir.join("support.csv"), &sup)?;
    write_json(&dir.join("vacuous.json"), &hull.report)
}

// -------------------------------------------------------- reconstruction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub arc: usize,
    pub level: usize,
    pub side: String,
    pub body: usize,
    pub z1: f64,
    pub z2: f64,
    /// Outward normal; empty when the method gives none.
    pub n1: Option<f64>,
    pub n2: Option<f64>,
}

pub fn boundary_rows(state: &ReconstructionState) -> Vec<BoundaryRow> {
    state
        .arcs
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            a.points.iter().map(move |p| BoundaryRow {
                arc: i,
                level: a.level,
                side: a.side.as_str().to_string(),
                body: a.body,
                z1: p.z[0],
                z2: p.z[1],
                n1: Some(p.normal[0]),
                n2: Some(p.normal[1]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::two_ellipse_example;

    #[test]
    fn scene_spec_round_trip() {
        let scene = two_ellipse_example();
        let spec = SceneSpec::from_planar(&scene).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&json).unwrap();
        let AnyScene::Planar(s) = back.build().unwrap() else {
            panic!("planar scene expected")
        };
        let p = Vector::<2>::new(0.3, -0.2);
        for (a, b) in scene.bodies.iter().zip(&s.bodies) {
            assert!((a.value(&p) - b.value(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn spatial_scene_parses() {
        let json = r#"{"s0": {"center": [0, 0, 0], "radius": 4},
            "bodies": [{"type": "ball", "center": [1, 0, 0], "radius": 0.5},
                       {"type": "ellipsoid", "center": [-1, 0, 0], "semi_axes": [1, 0.5, 0.4], "rotation_deg": [0, 0, 30]}]}"#;
        let spec: SceneSpec = serde_json::from_str(json).unwrap();
        assert!(matches!(spec.build().unwrap(), AnyScene::Spatial(s) if s.bodies.len() == 2));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let json = r#"{"s0": {"center": [0, 0], "radius": 4},
            "bodies": [{"type": "ball", "center": [1, 0, 0], "radius": 0.5}]}"#;
        let spec: SceneSpec = serde_json::from_str(json).unwrap();
        assert!(matches!(spec.build(), Err(IoError::Scene(_))));
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let rows = vec![PointRow {
            x: 0.1 + 0.2,
            y: -1.0e-300,
        }];
        let bytes = csv_bytes(Path::new("mem"), &rows).unwrap();
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let back: Vec<PointRow> = r.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = std::env::temp_dir().join(format!("echotomo-io-{}", std::process::id()));
        let path = dir.join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert!(!dir.join(".a.txt.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
