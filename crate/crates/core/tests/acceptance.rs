//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Built without the libtest harness.

use std::f64::consts::TAU;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use echotomo::checks::{derivative_suite, period_two_status, ray_suite, trapped_entries};
use echotomo::flow::{TraceLimits, TraceStatus};
use echotomo::geometry::{disc_scene, two_ellipse_example, Scene, Vector};
use echotomo::io;
use echotomo::reconstruct::{reconstruct_all, ReconstructionConfig, ReconstructionState, Side};
use echotomo::recovery::{
    convex_hull_recover, single_convex_reconstruct, HullGrid, LiveChords, SeparatingLine,
};
use echotomo::spectrum::{
    diag_spectrum, distinct_times_check, echograph, pair_spectrum, AngularGrid, DiagonalDataset,
    EchoPoint, DEFAULT_STENCIL, DEFAULT_SWEEP,
};
use echotomo::svg::echograph_svg;
use echotomo::validate::{validate_reconstruction, ValidationParams};

const SEED: u64 = 20_261_019;
const EX_GRID: usize = 4096;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

/// Everything of the two-ellipse run that several criteria share.
struct ExampleRun {
    scene: Scene<2>,
    line: Option<SeparatingLine>,
    data: DiagonalDataset,
    echo: Vec<EchoPoint>,
    state: Result<ReconstructionState, String>,
}

fn limits() -> TraceLimits {
    TraceLimits::default()
}

fn example_run() -> ExampleRun {
    let scene = two_ellipse_example();
    let hull = convex_hull_recover(
        &LiveChords {
            scene: &scene,
            limits: limits(),
        },
        &HullGrid::default(),
    )
    .expect("hull");
    let line = hull.report.separating_line;
    let data = diag_spectrum(
        &scene,
        &AngularGrid::new(EX_GRID),
        DEFAULT_STENCIL,
        DEFAULT_SWEEP,
        &limits(),
    )
    .measured();
    let echo = echograph(&scene.s0, &data);
    let state = reconstruct_all(
        &scene.s0,
        &data,
        line.as_ref(),
        &ReconstructionConfig::default(),
    )
    .map_err(|e| e.to_string());
    ExampleRun {
        scene,
        line,
        data,
        echo,
        state,
    }
}

fn ray_laws(run: &ExampleRun) -> Outcome {
    let a = run.scene.s0.radius;
    let s = ray_suite(&run.scene, 10_000, SEED, &limits());
    let ok = s.rays == 10_000
        && s.specular <= 1e-12
        && s.speed <= 1e-12
        && s.additivity <= 1e-10 * a
        && s.reversal <= 1e-8 * a;
    outcome(
        ok,
        format!(
            "{} rays ({} reflections): specular {:.1e}, speed {:.1e}, additivity {:.1e}, reversal {:.1e}",
            s.rays, s.reflections, s.specular, s.speed, s.additivity, s.reversal
        ),
    )
}

fn first_variation(run: &ExampleRun) -> Outcome {
    let d = derivative_suite(&run.scene, 1000, SEED + 1, 1e-4, &limits());
    let order = d.median_decay.ln() / 5f64.ln();
    let ok = d.branches == 1000 && d.max_error <= 1e-5 && order >= 1.7;
    outcome(
        ok,
        format!(
            "{} branches: max error {:.2e} at h = 1e-4, {:.2e} at h/5, observed order {:.2}",
            d.branches, d.max_error, d.max_error_fine, order
        ),
    )
}

fn single_body() -> Outcome {
    let grid = AngularGrid::new(2048);
    let disc = disc_scene(4.0, &[([-2.0, 0.0], 1.0)]);
    let data = diag_spectrum(&disc, &grid, DEFAULT_STENCIL, DEFAULT_SWEEP, &limits()).measured();
    let c = Vector::<2>::new(-2.0, 0.0);
    let disc_err = match single_convex_reconstruct(&disc.s0, &data) {
        Ok(pts) if !pts.is_empty() => pts
            .iter()
            .map(|p| ((p - c).norm() - 1.0).abs())
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    let ex = two_ellipse_example();
    let mut ellipse_err: f64 = 0.0;
    for id in [1, 2] {
        let scene = ex.restricted_to(&[id]);
        let data =
            diag_spectrum(&scene, &grid, DEFAULT_STENCIL, DEFAULT_SWEEP, &limits()).measured();
        let err = match single_convex_reconstruct(&scene.s0, &data) {
            Ok(pts) if !pts.is_empty() => pts
                .iter()
                .map(|p| scene.bodies[0].signed_distance(p).abs())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        };
        ellipse_err = ellipse_err.max(err);
    }
    outcome(
        disc_err <= 1e-5 && ellipse_err <= 1e-3,
        format!("disc Hausdorff {disc_err:.2e} (<= 1e-5), ellipses {ellipse_err:.2e} (<= 1e-3)"),
    )
}

fn side_of(line: &SeparatingLine, p: &Vector<2>) -> f64 {
    let n = Vector::<2>::new(line.normal[0], line.normal[1]);
    (p - Vector::<2>::new(line.point[0], line.point[1])).dot(&n)
}

fn hull_and_line(run: &ExampleRun) -> Outcome {
    let discs = [([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)];
    let scene = disc_scene(4.0, &discs);
    let hull = convex_hull_recover(
        &LiveChords {
            scene: &scene,
            limits: limits(),
        },
        &HullGrid::default(),
    )
    .expect("hull");
    let mut err: f64 = 0.0;
    for (ang, h) in hull.angles.iter().zip(&hull.support) {
        let exact = discs
            .iter()
            .map(|(c, r)| c[0] * ang.cos() + c[1] * ang.sin() + r)
            .fold(f64::NEG_INFINITY, f64::max);
        err = err.max(if h.is_finite() {
            (h - exact).abs()
        } else {
            f64::INFINITY
        });
    }
    let separates = run.line.as_ref().is_some_and(|l| {
        let range = |i: usize| {
            run.scene.bodies[i]
                .boundary_samples(4096)
                .iter()
                .map(|p| side_of(l, p))
                .fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s), hi.max(s)))
        };
        let (r1, r2) = (range(0), range(1));
        (r1.1 < 0.0 && r2.0 > 0.0) || (r2.1 < 0.0 && r1.0 > 0.0)
    });
    outcome(
        hull.angles.len() == 360 && err <= 1e-3 && separates,
        format!(
            "two-disc support error {err:.2e} over {} directions; separating line {}",
            hull.angles.len(),
            if separates {
                "found and separates"
            } else {
                "missing"
            }
        ),
    )
}

fn full_reconstruction(run: &ExampleRun) -> Outcome {
    let st = match &run.state {
        Ok(st) => st,
        Err(e) => return outcome(false, format!("reconstruction aborted: {e}")),
    };
    let rep = validate_reconstruction(&run.scene, st, &ValidationParams::default());
    let ok = rep
        .bodies
        .iter()
        .all(|b| b.hausdorff <= 5e-3 && b.coverage >= 0.95)
        && rep.audit_violations == 0
        && st.audit_violations() == 0;
    let per_body: Vec<String> = rep
        .bodies
        .iter()
        .map(|b| {
            format!(
                "body {}: Hausdorff {:.1e}, coverage {:.3}",
                b.body, b.hausdorff, b.coverage
            )
        })
        .collect();
    outcome(
        ok,
        format!(
            "depth {}, {}; audit {} violations of {}",
            st.depth,
            per_body.join("; "),
            rep.audit_violations,
            rep.audit_checked
        ),
    )
}

/// Boundary point of the scene farthest from the S0 center, by Newton on
/// the ellipse parametrisation.
fn nearest_to_sphere(scene: &Scene<2>) -> Vector<2> {
    let mut best = (f64::MIN, Vector::<2>::zeros());
    for b in &scene.bodies {
        let echotomo::geometry::Shape::Ellipsoid {
            center,
            semi_axes,
            axes,
        } = &b.shape
        else {
            panic!("ellipses expected")
        };
        let p =
            |s: f64| center + axes * Vector::<2>::new(semi_axes.x * s.cos(), semi_axes.y * s.sin());
        let n = 20_000;
        let (mut s, mut r) = (0.0, f64::MIN);
        for k in 0..n {
            let t = TAU * k as f64 / n as f64;
            if p(t).norm() > r {
                r = p(t).norm();
                s = t;
            }
        }
        // Stationary point of |p|^2 / 2: g(s) = p . p'.
        for _ in 0..50 {
            let d1 = axes * Vector::<2>::new(-semi_axes.x * s.sin(), semi_axes.y * s.cos());
            let d2 = axes * Vector::<2>::new(-semi_axes.x * s.cos(), -semi_axes.y * s.sin());
            let g = p(s).dot(&d1);
            let dg = d1.dot(&d1) + p(s).dot(&d2);
            s -= g / dg;
        }
        if p(s).norm() > best.0 {
            best = (p(s).norm(), p(s));
        }
    }
    best.1
}

fn echograph_figure(run: &ExampleRun) -> Outcome {
    let st = match &run.state {
        Ok(st) => st,
        Err(e) => return outcome(false, format!("reconstruction aborted: {e}")),
    };
    let svg = echograph_svg(&run.scene, &run.echo, Some(st), true, "acceptance");
    let dir = out_dir("figure");
    let path = dir.join("echograph.svg");
    io::write_atomic(&path, svg.as_bytes()).expect("write figure");
    let zk = nearest_to_sphere(&run.scene);
    let seed_err = (Vector::<2>::new(st.seeds.z_k[0], st.seeds.z_k[1]) - zk).norm();
    // Nested families: each body carries arcs on both sides at several levels.
    let mut nested = true;
    for body in [1, 2] {
        let levels = |side: Side| {
            st.arcs
                .iter()
                .filter(|a| a.body == body && a.side == side)
                .map(|a| a.level)
                .max()
                .unwrap_or(0)
        };
        nested &= levels(Side::Both) == 1 && levels(Side::Left) >= 3 && levels(Side::Right) >= 3;
    }
    // The echograph passes through z_K at x_K and the level-one points on
    // both sides of x_K approach it.
    let near: Vec<&EchoPoint> = st
        .echo_arcs
        .iter()
        .filter(|a| a.level == Some(1))
        .flat_map(|a| a.points.iter().map(|&i| &run.echo[i]))
        .filter(|e| (echotomo::spectrum::wrap_diff(e.x_angle - st.seeds.x_k_angle)).abs() < 0.02)
        .collect();
    let left = near.iter().any(|e| e.x_angle < st.seeds.x_k_angle);
    let right = near.iter().any(|e| e.x_angle > st.seeds.x_k_angle);
    let through = near
        .iter()
        .map(|e| (e.w_vec() - zk).norm())
        .fold(f64::INFINITY, f64::min);
    let orders = st
        .echo_arcs
        .iter()
        .filter_map(|a| a.level)
        .max()
        .unwrap_or(0);
    let has_hash = svg.contains("<!-- config acceptance -->");
    outcome(
        seed_err <= 1e-4 && nested && left && right && through <= 1e-3 && orders >= 3 && has_hash,
        format!(
            "|w(x_K) - z_K| = {seed_err:.2e}; level-one points within {through:.2e} of z_K (left {left}, right {right}); echo arcs of levels up to {orders}; nested side families {nested}; figure {}",
            path.display()
        ),
    )
}

fn distinctness(run: &ExampleRun) -> Outcome {
    let x = AngularGrid::new(100);
    let y = AngularGrid::with_phase(100, 0.5);
    let data = pair_spectrum(&run.scene, &x, &y, DEFAULT_SWEEP, &limits());
    let rep = distinct_times_check(&data, 1e-9);
    outcome(
        rep.cells == 10_000 && rep.coincident_cells == 0,
        format!(
            "{} cells, {} samples, {} coincident cells (fraction {})",
            rep.cells,
            data.samples.len(),
            rep.coincident_cells,
            rep.fraction
        ),
    )
}

fn trapped() -> Outcome {
    let scene = disc_scene(4.0, &[([-2.0, 0.0], 1.0), ([2.0, 0.0], 1.0)]);
    let status = period_two_status(&scene, &limits());
    let n = trapped_entries(&scene, 10_000, SEED + 2, &limits());
    outcome(
        status == Some(TraceStatus::BudgetTrapped) && n == 0,
        format!("period-two start {status:?}; {n} of 10000 entries trapped"),
    )
}

fn out_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir()
        .join(format!("echotomo-acceptance-{}", std::process::id()))
        .join(name);
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}

/// Bytes of the stored spectrum, echograph and boundary of one run.
fn artifacts(
    run_id: &str,
    data: &DiagonalDataset,
    echo: &[EchoPoint],
    st: &Result<ReconstructionState, String>,
) -> Vec<Vec<u8>> {
    let dir = out_dir(run_id);
    io::write_diagonal(&dir, "diag", data).expect("write diag");
    io::write_csv(&dir.join("echograph.csv"), &io::echo_rows(echo)).expect("write echo");
    match st {
        Ok(st) => {
            io::write_csv(&dir.join("boundary.csv"), &io::boundary_rows(st))
                .expect("write boundary");
            io::write_json(&dir.join("state.json"), st).expect("write state");
        }
        Err(e) => io::write_atomic(&dir.join("state.json"), e.as_bytes()).expect("write error"),
    }
    [
        "diag.csv",
        "diag.json",
        "echograph.csv",
        "boundary.csv",
        "state.json",
    ]
    .iter()
    .map(|f| std::fs::read(dir.join(f)).unwrap_or_default())
    .collect()
}

fn rerun(threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("pool");
    pool.install(|| {
        let scene = two_ellipse_example();
        let hull = convex_hull_recover(
            &LiveChords {
                scene: &scene,
                limits: limits(),
            },
            &HullGrid::default(),
        )
        .expect("hull");
        let data = diag_spectrum(
            &scene,
            &AngularGrid::new(EX_GRID),
            DEFAULT_STENCIL,
            DEFAULT_SWEEP,
            &limits(),
        )
        .measured();
        let echo = echograph(&scene.s0, &data);
        let st = reconstruct_all(
            &scene.s0,
            &data,
            hull.report.separating_line.as_ref(),
            &ReconstructionConfig::default(),
        )
        .map_err(|e| e.to_string());
        artifacts(&format!("threads-{threads}"), &data, &echo, &st)
    })
}

fn determinism(run: &ExampleRun) -> Outcome {
    let base = artifacts("base", &run.data, &run.echo, &run.state);
    let one = rerun(1);
    let many = rerun(4);
    let same_one = base == one;
    let same_many = base == many;
    let bytes: usize = base.iter().map(|b| b.len()).sum();
    outcome(
        same_one && same_many && bytes > 0,
        format!("{bytes} bytes of outputs; identical with 1 thread: {same_one}, with 4 threads: {same_many}"),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let start = Instant::now();
    let run = example_run();
    eprintln!("shared two-ellipse run prepared in {:.1?}", start.elapsed());
    let criteria: Vec<(&str, Criterion)> = vec![
        ("ray laws", Box::new(|| ray_laws(&run))),
        ("first variation of T", Box::new(|| first_variation(&run))),
        ("single-body reconstruction", Box::new(single_body)),
        ("hull and separating line", Box::new(|| hull_and_line(&run))),
        (
            "two-body reconstruction",
            Box::new(|| full_reconstruction(&run)),
        ),
        (
            "echograph figure and seed",
            Box::new(|| echograph_figure(&run)),
        ),
        ("distinct travelling times", Box::new(|| distinctness(&run))),
        ("trapped detection", Box::new(trapped)),
        ("determinism", Box::new(|| determinism(&run))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1?})",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.summary,
            t.elapsed()
        );
    }
    let _ = std::fs::remove_dir_all(
        std::env::temp_dir().join(format!("echotomo-acceptance-{}", std::process::id())),
    );
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
