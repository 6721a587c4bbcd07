use std::path::Path;

use anyhow::anyhow;
use serde::Serialize;

use echotomo::checks::{self, Check};
use echotomo::error::{IoError, ReconstructionError};
use echotomo::flow::{trace, PhasePoint, TraceStatus};
use echotomo::geometry::{validate_scene, Scene, Shape};
use echotomo::io::{self, AnyScene};
use echotomo::reconstruct::{
    levels_monotone, reconstruct_all, self_consistency, ReconstructionState, Seeds,
};
use echotomo::recovery::{
    convex_hull_recover, single_convex_reconstruct, HullGrid, LiveChords, VacuousReport,
};
use echotomo::spectrum::{
    diag_spectrum, distinct_times_check, echograph, pair_spectrum, sample_spectrum, AngularGrid,
    DiagonalDataset,
};
use echotomo::svg;
use echotomo::validate::{validate_reconstruction, ValidationParams};

use crate::config::RunConfig;

pub const EXIT_INVALID_SCENE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_ABORT: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        error: error.into(),
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let code = if matches!(e, IoError::Scene(_)) {
            EXIT_INVALID_SCENE
        } else {
            1
        };
        fail(code, e)
    }
}

fn load_scene(cfg: &RunConfig) -> Result<Scene<2>, Failure> {
    let scene = match io::read_scene(&cfg.scene) {
        Ok(AnyScene::Planar(s)) => s,
        Ok(AnyScene::Spatial(_)) => {
            return Err(fail(
                EXIT_INVALID_SCENE,
                anyhow!(
                    "{} is a spatial scene; only planar scenes are supported here",
                    cfg.scene.display()
                ),
            ))
        }
        Err(e @ IoError::File { .. }) | Err(e @ IoError::Json { .. }) => {
            return Err(fail(EXIT_INVALID_SCENE, e))
        }
        Err(e) => return Err(e.into()),
    };
    let violations = validate_scene(&scene);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(fail(
            EXIT_INVALID_SCENE,
            anyhow!("invalid scene: {}", msg.join("; ")),
        ));
    }
    Ok(scene)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    io::write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

fn read_diag(cfg: &RunConfig, scene: &Scene<2>) -> Result<DiagonalDataset, Failure> {
    let data = io::read_diagonal(&scene.s0, &cfg.out, "diag")?;
    let hash = echotomo::spectrum::scene_hash(scene);
    if data.scene_hash != hash {
        return Err(fail(
            1,
            anyhow!("diag.json was computed for a different scene"),
        ));
    }
    Ok(data)
}

/// Name of an error variant, for reports.
fn kind<E: std::fmt::Debug>(e: &E) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let scene = load_scene(cfg)?;
    let limits = cfg.limits();
    let n = cfg.rays;
    let mut rays = Vec::with_capacity(n);
    for i in 0..n {
        let phi = cfg.fan_half_angle * (2.0 * i as f64 / n as f64 - 1.0);
        let entry = PhasePoint::planar_entry(&scene, cfg.entry_angle, phi);
        let tr = trace(&scene, entry, &limits).map_err(|e| fail(EXIT_NUMERICAL, e))?;
        rays.push(tr);
    }
    io::write_csv(
        &cfg.out.join("trajectories.csv"),
        &io::trajectory_rows(&rays),
    )?;
    write_text(
        &cfg.out.join("rays.svg"),
        &svg::scene_svg(&scene, &rays, &cfg.hash()),
    )?;
    let trapped = rays
        .iter()
        .filter(|r| r.status == TraceStatus::BudgetTrapped)
        .count();
    println!("{} rays traced, {trapped} trapped", rays.len());
    Ok(())
}

pub fn spectrum(cfg: &RunConfig) -> Outcome {
    let scene = load_scene(cfg)?;
    let limits = cfg.limits();
    let diag = diag_spectrum(
        &scene,
        &AngularGrid::new(cfg.diag_grid),
        cfg.stencil,
        cfg.sweep,
        &limits,
    );
    let diag = if cfg.oracle { diag } else { diag.measured() };
    io::write_diagonal(&cfg.out, "diag", &diag)?;
    let sweep = sample_spectrum(&scene, &AngularGrid::new(cfg.x_grid), cfg.dir_grid, &limits);
    let sweep = if cfg.oracle { sweep } else { sweep.measured() };
    io::write_spectrum(&cfg.out, "spectrum", &sweep)?;
    let hull = convex_hull_recover(
        &LiveChords {
            scene: &scene,
            limits,
        },
        &HullGrid {
            directions: cfg.hull_directions,
            offsets_per_radius: cfg.hull_offsets,
        },
    )
    .map_err(|e| fail(EXIT_NUMERICAL, e))?;
    io::write_hull(&cfg.out, &hull)?;
    io::write_json(&cfg.out.join("run.json"), cfg)?;
    println!(
        "diagonal samples {}, sweep samples {}, separating line {}",
        diag.samples().count(),
        sweep.samples.len(),
        if hull.report.separating_line.is_some() {
            "found"
        } else {
            "none"
        }
    );
    Ok(())
}

pub fn echograph_cmd(cfg: &RunConfig) -> Outcome {
    let scene = load_scene(cfg)?;
    let data = read_diag(cfg, &scene)?;
    let echo = echograph(&scene.s0, &data);
    io::write_csv(&cfg.out.join("echograph.csv"), &io::echo_rows(&echo))?;
    write_text(
        &cfg.out.join("echograph.svg"),
        &svg::echograph_svg(&scene, &echo, None, cfg.oracle, &cfg.hash()),
    )?;
    println!("{} echo points", echo.len());
    Ok(())
}

#[derive(Serialize)]
struct ReconstructionSummary {
    status: &'static str,
    error: Option<String>,
    message: Option<String>,
    seeds: Option<Seeds>,
    z_inf: Option<[[f64; 2]; 2]>,
    depth: usize,
    arcs: usize,
    points: usize,
    audit_records: usize,
    audit_violations: usize,
    skipped: usize,
}

impl ReconstructionSummary {
    fn empty(status: &'static str) -> Self {
        Self {
            status,
            error: None,
            message: None,
            seeds: None,
            z_inf: None,
            depth: 0,
            arcs: 0,
            points: 0,
            audit_records: 0,
            audit_violations: 0,
            skipped: 0,
        }
    }

    fn aborted(e: &ReconstructionError) -> Self {
        Self {
            error: Some(kind(e)),
            message: Some(e.to_string()),
            ..Self::empty("aborted")
        }
    }

    fn from_state(st: &ReconstructionState) -> Self {
        Self {
            status: "ok",
            error: None,
            message: None,
            seeds: Some(st.seeds.clone()),
            z_inf: Some(st.z_inf),
            depth: st.depth,
            arcs: st.arcs.len(),
            points: st.arcs.iter().map(|a| a.points.len()).sum(),
            audit_records: st.audit.len(),
            audit_violations: st.audit_violations(),
            skipped: st.skipped.len(),
        }
    }
}

/// Runs the reconstruction of a two-body scene from stored files.
fn run_reconstruction(
    cfg: &RunConfig,
    scene: &Scene<2>,
    data: &DiagonalDataset,
) -> Result<ReconstructionState, ReconstructionError> {
    let report: VacuousReport = io::read_json(&cfg.out.join("vacuous.json"))
        .map_err(|e| ReconstructionError::BranchLost(format!("vacuous report unavailable: {e}")))?;
    reconstruct_all(
        &scene.s0,
        data,
        report.separating_line.as_ref(),
        &cfg.reconstruction(),
    )
}

pub fn reconstruct(cfg: &RunConfig) -> Outcome {
    let scene = load_scene(cfg)?;
    if !cfg.out.join("echograph.csv").exists() {
        return Err(fail(
            1,
            anyhow!(
                "echograph.csv not found in {}; run `echograph` first",
                cfg.out.display()
            ),
        ));
    }
    let data = read_diag(cfg, &scene)?;
    let summary_path = cfg.out.join("reconstruction.json");
    if scene.bodies.len() == 1 {
        let pts = single_convex_reconstruct(&scene.s0, &data).map_err(|e| fail(EXIT_ABORT, e))?;
        let rows: Vec<io::BoundaryRow> = pts
            .iter()
            .map(|p| io::BoundaryRow {
                arc: 0,
                level: 1,
                side: "LR".into(),
                body: 1,
                z1: p.x,
                z2: p.y,
                n1: None,
                n2: None,
            })
            .collect();
        io::write_csv(&cfg.out.join("boundary.csv"), &rows)?;
        io::write_json(
            &summary_path,
            &ReconstructionSummary {
                depth: 1,
                arcs: 1,
                points: rows.len(),
                ..ReconstructionSummary::empty("ok")
            },
        )?;
        println!("{} boundary points", rows.len());
        return Ok(());
    }
    match run_reconstruction(cfg, &scene, &data) {
        Ok(st) => {
            io::write_csv(&cfg.out.join("boundary.csv"), &io::boundary_rows(&st))?;
            io::write_json(&summary_path, &ReconstructionSummary::from_state(&st))?;
            let echo = echograph(&scene.s0, &data);
            write_text(
                &cfg.out.join("reconstruction.svg"),
                &svg::echograph_svg(&scene, &echo, Some(&st), cfg.oracle, &cfg.hash()),
            )?;
            println!(
                "{} arcs, depth {}, {} audit violations",
                st.arcs.len(),
                st.depth,
                st.audit_violations()
            );
            Ok(())
        }
        Err(e) => {
            io::write_json(&summary_path, &ReconstructionSummary::aborted(&e))?;
            Err(fail(EXIT_ABORT, e))
        }
    }
}

#[derive(Serialize)]
struct VerifyReport {
    config_hash: String,
    scene_hash: String,
    passed: bool,
    checks: Vec<Check>,
}

fn all_closed_form(scene: &Scene<2>) -> bool {
    scene
        .bodies
        .iter()
        .all(|b| !matches!(b.shape, Shape::Implicit(_)))
}

pub fn verify(cfg: &RunConfig) -> Outcome {
    let scene = load_scene(cfg)?;
    let a = scene.s0.radius;
    let limits = cfg.limits();
    let mut out = vec![Check::flag(
        "scene_valid",
        true,
        "no overlap, containment or convexity violations",
    )];

    let rays = checks::ray_suite(&scene, cfg.checks, cfg.seed, &limits);
    let detail = format!(
        "{} exiting rays, {} reflections",
        rays.rays, rays.reflections
    );
    out.push(Check::at_most(
        "specular_law",
        rays.specular,
        1e-12,
        detail.clone(),
    ));
    out.push(Check::at_most(
        "unit_speed",
        rays.speed,
        1e-12,
        detail.clone(),
    ));
    out.push(Check::at_most(
        "time_additivity",
        rays.additivity,
        1e-10 * a,
        detail.clone(),
    ));
    out.push(Check::at_most(
        "time_reversal",
        rays.reversal,
        1e-8 * a,
        detail,
    ));

    if !scene.bodies.is_empty() {
        let d = checks::derivative_suite(
            &scene,
            (cfg.checks / 10).max(1),
            cfg.seed + 1,
            cfg.stencil,
            &limits,
        );
        let detail = format!("{} branches, h = {}", d.branches, cfg.stencil);
        out.push(Check::at_most(
            "first_variation",
            d.max_error,
            1e-5,
            detail.clone(),
        ));
        out.push(Check::at_least(
            "first_variation_decay",
            d.median_decay,
            10.0,
            detail,
        ));
    }
    let trapped = checks::trapped_entries(&scene, cfg.checks, cfg.seed + 2, &limits);
    out.push(Check::at_most(
        "no_trapped_entries",
        trapped as f64,
        0.0,
        format!("{} entries", cfg.checks),
    ));

    let pairs = pair_spectrum(
        &scene,
        &AngularGrid::new(100),
        &AngularGrid::with_phase(100, 0.5),
        cfg.sweep,
        &limits,
    );
    let dist = distinct_times_check(&pairs, 1e-9);
    out.push(Check::at_most(
        "distinct_times",
        dist.fraction,
        0.0,
        format!("{} cells, {} coincident", dist.cells, dist.coincident_cells),
    ));

    // Stored outputs, when present.
    let sweep_path = cfg.out.join("spectrum.csv");
    if sweep_path.exists() {
        let again = sample_spectrum(&scene, &AngularGrid::new(cfg.x_grid), cfg.dir_grid, &limits);
        let again = if cfg.oracle { again } else { again.measured() };
        let tmp = cfg.out.join(".verify");
        io::write_spectrum(&tmp, "spectrum", &again)?;
        let same = std::fs::read(&sweep_path).ok() == std::fs::read(tmp.join("spectrum.csv")).ok();
        let _ = std::fs::remove_dir_all(&tmp);
        out.push(Check::flag(
            "spectrum_deterministic",
            same,
            "recomputed sweep spectrum is byte-identical",
        ));
    }
    let support_path = cfg.out.join("support.csv");
    if support_path.exists() && all_closed_form(&scene) && !scene.bodies.is_empty() {
        let rows: Vec<io::SupportRow> = io::read_csv(&support_path)?;
        let err = rows
            .iter()
            .map(|r| (r.support - checks::exact_support(&scene, r.angle)).abs())
            .fold(
                0.0,
                |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) },
            );
        out.push(Check::at_most(
            "hull_support",
            err,
            1e-3,
            format!("{} directions", rows.len()),
        ));
    }
    let vacuous_path = cfg.out.join("vacuous.json");
    if vacuous_path.exists() && scene.bodies.len() == 2 {
        let rep: VacuousReport = io::read_json(&vacuous_path)?;
        let ok = rep
            .separating_line
            .as_ref()
            .is_some_and(|l| checks::separates(&scene, l));
        out.push(Check::flag(
            "separating_line",
            ok,
            "line separates the two bodies",
        ));
    }
    if cfg.out.join("diag.json").exists() {
        let data = read_diag(cfg, &scene)?;
        match scene.bodies.len() {
            1 => match single_convex_reconstruct(&scene.s0, &data) {
                Ok(pts) => {
                    let h = pts
                        .iter()
                        .map(|p| scene.bodies[0].signed_distance(p).abs())
                        .fold(0.0, f64::max);
                    out.push(Check::at_most(
                        "single_body_hausdorff",
                        h,
                        1e-3,
                        format!("{} points", pts.len()),
                    ));
                }
                Err(e) => out.push(Check::flag("single_body_hausdorff", false, e.to_string())),
            },
            2 => verify_two(cfg, &scene, &data, &mut out),
            _ => {}
        }
    }

    let passed = out.iter().all(|c| c.passed);
    let report = VerifyReport {
        config_hash: cfg.hash(),
        scene_hash: echotomo::spectrum::scene_hash(&scene),
        passed,
        checks: out,
    };
    io::write_json(&cfg.out.join("verify.json"), &report)?;
    for c in &report.checks {
        println!(
            "{} {:<24} {:.3e} (limit {:.3e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.limit
        );
    }
    if passed {
        Ok(())
    } else {
        Err(fail(
            1,
            anyhow!(
                "{} of {} checks failed",
                report.checks.iter().filter(|c| !c.passed).count(),
                report.checks.len()
            ),
        ))
    }
}

fn verify_two(cfg: &RunConfig, scene: &Scene<2>, data: &DiagonalDataset, out: &mut Vec<Check>) {
    let st = match run_reconstruction(cfg, scene, data) {
        Ok(st) => st,
        Err(e) => {
            out.push(Check::flag("reconstruction", false, e.to_string()));
            return;
        }
    };
    let zk = checks::closest_to_sphere(scene);
    let seed_err =
        (zk - echotomo::geometry::Vector::<2>::new(st.seeds.z_k[0], st.seeds.z_k[1])).norm();
    out.push(Check::at_most(
        "seed_identity",
        seed_err,
        1e-4,
        "w(x_K) against the true nearest point to S0",
    ));
    let params = ValidationParams {
        cover_radius: cfg.cover_radius,
        exclusion: cfg.exclusion,
        ..ValidationParams::default()
    };
    let rep = validate_reconstruction(scene, &st, &params);
    for b in &rep.bodies {
        let detail = format!("body {} ({} points)", b.body, b.points);
        out.push(Check::at_most(
            &format!("hausdorff_body{}", b.label),
            b.hausdorff,
            5e-3,
            detail.clone(),
        ));
        out.push(Check::at_least(
            &format!("coverage_body{}", b.label),
            b.coverage,
            0.95,
            detail,
        ));
    }
    out.push(Check::at_most(
        "audit_violations",
        rep.audit_violations as f64,
        0.0,
        format!("{} backtrace reflections", rep.audit_checked),
    ));
    out.push(Check::flag(
        "levels_approach_z_inf",
        levels_monotone(&st, 1e-3),
        "arc distance to z_inf shrinks with level",
    ));
    let c = self_consistency(&scene.s0, data, &st);
    out.push(Check::at_most(
        "forward_replay_time",
        c.max_time_error,
        1e-3 * scene.s0.radius,
        format!("{} points replayed, {} unresolved", c.checked, c.unresolved),
    ));
}
