use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use objnav_core::sim::{Aabb, Scene, StepRecord};

const SCALE: f64 = 60.0;
const MARGIN: f64 = 20.0;

/// Parses a JSON-lines trajectory log; blank lines are skipped.
pub fn parse_log(text: &str, name: &str) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(line)
            .with_context(|| format!("{name}:{}: bad log record", i + 1))?;
        out.push(r);
    }
    if out.is_empty() {
        bail!("{name}: log has no records");
    }
    Ok(out)
}

pub struct HeatPoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
    pub masked: bool,
}

pub fn parse_heatmap(text: &str, name: &str) -> Result<Vec<HeatPoint>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd
        .headers()
        .with_context(|| format!("{name}:1: bad header"))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "z", "score", "masked"] {
        bail!("{name}:1: expected header x,y,z,score,masked");
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.with_context(|| format!("{name}: bad row"))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .with_context(|| format!("{name}:{line}: column {} is not a number", &header[k]))
        };
        out.push(HeatPoint {
            x: num(0)?,
            y: num(1)?,
            score: num(3)?,
            masked: num(4)? != 0.0,
        });
    }
    Ok(out)
}

struct Frame {
    x0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.x0) * SCALE,
            MARGIN + (self.y1 - y) * SCALE,
        )
    }

    fn rect(&self, out: &mut String, b: &Aabb, attrs: &str) {
        let (x, y) = self.px(b.min[0], b.max[1]);
        let w = (b.max[0] - b.min[0]) * SCALE;
        let h = (b.max[1] - b.min[1]) * SCALE;
        let _ = writeln!(
            out,
            r#"  <rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" {attrs}/>"#
        );
    }
}

/// Blue → red by normalized score.
fn heat_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    format!(
        "rgb({},{},{})",
        (255.0 * t).round(),
        64,
        (255.0 * (1.0 - t)).round()
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG of the scene, the executed trajectory, the final topological nodes and
/// frontiers, and optionally an affordance heatmap.
pub fn render_svg(scene: &Scene, log: &[StepRecord], heat: Option<&[HeatPoint]>) -> String {
    let [x0, y0, x1, y1] = scene.bounds;
    let f = Frame { x0, y1 };
    let w = (x1 - x0) * SCALE + 2.0 * MARGIN;
    let h = (y1 - y0) * SCALE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r#"<g id="scene">"#);
    f.rect(
        &mut s,
        &Aabb::new([x0, y0, 0.0], [x1, y1, 0.0]),
        r##"class="bounds" fill="#fafafa" stroke="#000" stroke-width="2""##,
    );
    for wall in &scene.walls {
        f.rect(&mut s, wall, r##"class="wall" fill="#555""##);
    }
    for o in &scene.objects {
        let attrs = format!(
            r##"class="object" data-class="{}" fill="#c9b27c" stroke="#8a7440""##,
            escape(&o.class)
        );
        f.rect(&mut s, &o.bbox, &attrs);
        let (tx, ty) = f.px(
            (o.bbox.min[0] + o.bbox.max[0]) / 2.0,
            (o.bbox.min[1] + o.bbox.max[1]) / 2.0,
        );
        let _ = writeln!(
            s,
            r#"  <text x="{tx:.2}" y="{ty:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            escape(&o.class)
        );
    }
    let _ = writeln!(s, "</g>");

    if let Some(heat) = heat {
        let top = heat
            .iter()
            .filter(|p| !p.masked)
            .map(|p| p.score)
            .fold(0.0, f64::max);
        let _ = writeln!(s, r#"<g id="heatmap" opacity="0.6">"#);
        for p in heat {
            let (cx, cy) = f.px(p.x, p.y);
            if p.masked {
                let _ = writeln!(
                    s,
                    r##"  <circle class="heat masked" cx="{cx:.2}" cy="{cy:.2}" r="2" fill="#999" data-score="{}"/>"##,
                    p.score
                );
            } else {
                let t = if top > 0.0 { p.score / top } else { 0.0 };
                let _ = writeln!(
                    s,
                    r#"  <circle class="heat" cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{}" data-score="{}"/>"#,
                    heat_color(t),
                    p.score
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }

    let mut pts: Vec<[f64; 2]> = Vec::new();
    for r in log {
        pts.push([r.pose[0], r.pose[1]]);
        pts.extend(r.path.iter().copied());
    }
    pts.dedup();
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = f.px(p[0], p[1]);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline class="trajectory" fill="none" stroke="#1f6fd1" stroke-width="2" points="{}"/>"##,
        coords.join(" ")
    );

    let last = log.last().expect("parse_log rejects empty logs");
    let _ = writeln!(s, r#"<g id="frontiers">"#);
    for p in &last.frontiers {
        let (cx, cy) = f.px(p[0], p[1]);
        let _ = writeln!(
            s,
            r##"  <circle class="frontier" cx="{cx:.2}" cy="{cy:.2}" r="1.5" fill="#2a9d3a"/>"##
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="nodes">"#);
    for n in &last.nodes {
        let (cx, cy) = f.px(n.position[0], n.position[1]);
        let _ = writeln!(
            s,
            r##"  <circle class="node" data-id="{}" cx="{cx:.2}" cy="{cy:.2}" r="6" fill="#e07a1f" stroke="#000"><title>{} ({})</title></circle>"##,
            n.id,
            n.id,
            escape(&n.room)
        );
        let _ = writeln!(
            s,
            r#"  <text class="node-label" x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            cx + 8.0,
            cy - 8.0,
            n.id
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn plot(log: &Path, scene: &Path, out: &Path, heatmap: Option<&Path>) -> Result<()> {
    let log_text = fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    let records = parse_log(&log_text, &log.display().to_string())?;
    let scene_text =
        fs::read_to_string(scene).with_context(|| format!("reading {}", scene.display()))?;
    let scene =
        Scene::from_json(&scene_text).with_context(|| format!("parsing {}", scene.display()))?;
    let heat = match heatmap {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(parse_heatmap(&text, &p.display().to_string())?)
        }
        None => None,
    };
    let svg = render_svg(&scene, &records, heat.as_deref());
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))
}
