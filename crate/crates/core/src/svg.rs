//! Plain SVG figures. Coordinates are scene units with the y axis flipped,
//! so stroke widths are given in scene units too.

use std::fmt::Write;

use crate::flow::Trajectory;
use crate::geometry::{Scene, Vector};
use crate::reconstruct::{ReconstructionState, Side};
use crate::spectrum::EchoPoint;

const BODY_SAMPLES: usize = 720;

/// Colours cycled over echograph orders and boundary levels.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

pub struct Figure {
    min: [f64; 2],
    size: [f64; 2],
    body: String,
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl Figure {
    /// Figure showing the square `center ± half` with a small margin.
    pub fn new(center: [f64; 2], half: f64) -> Self {
        let h = half * 1.05;
        Self {
            min: [center[0] - h, -center[1] - h],
            size: [2.0 * h, 2.0 * h],
            body: String::new(),
        }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.body, "<!-- {} -->", text.replace("--", "- -"));
    }

    pub fn circle(&mut self, c: Vector<2>, r: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" {style}/>"#,
            num(c.x),
            num(-c.y),
            num(r)
        );
    }

    pub fn polyline(&mut self, pts: &[Vector<2>], closed: bool, style: &str) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|p| format!("{},{}", num(p.x), num(-p.y)))
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" {style}/>"#,
            coords.join(" ")
        );
    }

    pub fn dots(&mut self, pts: &[Vector<2>], r: f64, fill: &str) {
        if pts.is_empty() {
            return;
        }
        let _ = writeln!(self.body, r#"<g fill="{fill}" stroke="none">"#);
        for p in pts {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{}" cy="{}" r="{}"/>"#,
                num(p.x),
                num(-p.y),
                num(r)
            );
        }
        self.body.push_str("</g>\n");
    }

    pub fn finish(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"800\">\n{}</svg>\n",
            num(self.min[0]),
            num(self.min[1]),
            num(self.size[0]),
            num(self.size[1]),
            self.body
        )
    }
}

fn outline(scene: &Scene<2>, fig: &mut Figure, w: f64) {
    fig.circle(
        scene.s0.center,
        scene.s0.radius,
        &format!(r#"fill="none" stroke="black" stroke-width="{}""#, num(w)),
    );
    for b in &scene.bodies {
        fig.polyline(
            &b.boundary_samples(BODY_SAMPLES),
            true,
            &format!(
                r##"fill="#dddddd" stroke="#444444" stroke-width="{}""##,
                num(w)
            ),
        );
    }
}

/// Scene with S0, the bodies and the given rays.
pub fn scene_svg(scene: &Scene<2>, rays: &[Trajectory<2>], config_hash: &str) -> String {
    let a = scene.s0.radius;
    let mut fig = Figure::new([scene.s0.center.x, scene.s0.center.y], a);
    fig.comment(&format!("config {config_hash}"));
    let w = a * 0.004;
    outline(scene, &mut fig, w);
    for (i, r) in rays.iter().enumerate() {
        let stroke = PALETTE[i % PALETTE.len()];
        fig.polyline(
            &r.points(),
            false,
            &format!(
                r#"fill="none" stroke="{stroke}" stroke-width="{}" stroke-opacity="0.8""#,
                num(w)
            ),
        );
    }
    fig.finish()
}

/// Echograph points coloured by order or arc level, with the reconstructed boundary on
/// top. In oracle mode `truth` adds the true scene outline underneath.
pub fn echograph_svg(
    s0_scene: &Scene<2>,
    echo: &[EchoPoint],
    state: Option<&ReconstructionState>,
    truth: bool,
    config_hash: &str,
) -> String {
    let s0 = &s0_scene.s0;
    let a = s0.radius;
    let mut fig = Figure::new([s0.center.x, s0.center.y], a);
    fig.comment(&format!("config {config_hash}"));
    let w = a * 0.003;
    if truth {
        outline(s0_scene, &mut fig, w);
    } else {
        fig.circle(
            s0.center,
            a,
            &format!(r#"fill="none" stroke="black" stroke-width="{}""#, num(w)),
        );
    }
    // Colour by order when the data carry it, otherwise by the level the
    // reconstruction assigned to the point's echo arc.
    let mut class: Vec<Option<usize>> = echo
        .iter()
        .map(|e| e.order.filter(|_| e.reflexive))
        .collect();
    if let Some(st) = state {
        for arc in &st.echo_arcs {
            if let Some(k) = arc.level {
                for &i in &arc.points {
                    class[i] = class[i].or(Some(k));
                }
            }
        }
    }
    let mut by_class: Vec<Vec<Vector<2>>> = Vec::new();
    let mut other = Vec::new();
    for (e, c) in echo.iter().zip(&class) {
        match c {
            Some(k) if *k >= 1 => {
                if by_class.len() < *k {
                    by_class.resize(*k, Vec::new());
                }
                by_class[k - 1].push(e.w_vec());
            }
            _ => other.push(e.w_vec()),
        }
    }
    fig.dots(&other, a * 0.0015, "#bbbbbb");
    for (k, pts) in by_class.iter().enumerate() {
        fig.dots(pts, a * 0.002, PALETTE[k % PALETTE.len()]);
    }
    if let Some(st) = state {
        for arc in &st.arcs {
            let pts: Vec<Vector<2>> = arc.points.iter().map(|p| p.z_vec()).collect();
            let dash = match arc.side {
                Side::Both => "",
                Side::Left => r#" stroke-dasharray="0.02 0.01""#,
                Side::Right => r#" stroke-dasharray="0.06 0.02""#,
            };
            let stroke = PALETTE[(arc.level - 1) % PALETTE.len()];
            fig.polyline(
                &pts,
                false,
                &format!(
                    r#"fill="none" stroke="{stroke}" stroke-width="{}"{dash}"#,
                    num(2.0 * w)
                ),
            );
        }
        let zk = Vector::<2>::new(st.seeds.z_k[0], st.seeds.z_k[1]);
        fig.circle(zk, a * 0.006, r#"fill="black""#);
        for z in &st.z_inf {
            fig.circle(
                Vector::<2>::new(z[0], z[1]),
                a * 0.006,
                r#"fill="none" stroke="black" stroke-width="0.005""#,
            );
        }
    }
    fig.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{trace, PhasePoint, TraceLimits};
    use crate::geometry::disc_scene;

    #[test]
    fn numbers_are_short_and_signless_at_zero() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.0000001), "0");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn scene_figure_embeds_hash_and_rays() {
        let scene = disc_scene(4.0, &[([0.0, 0.0], 1.0)]);
        let rays: Vec<_> = (0..4)
            .map(|i| {
                trace(
                    &scene,
                    PhasePoint::planar_entry(&scene, std::f64::consts::PI, 0.1 * i as f64),
                    &TraceLimits::default(),
                )
                .unwrap()
            })
            .collect();
        let svg = scene_svg(&scene, &rays, "abc123");
        assert!(svg.contains("<!-- config abc123 -->"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.starts_with("<svg"));
    }
}
