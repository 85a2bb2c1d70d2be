//! Fixed-size SVG plot of a stability region.

use std::fmt::Write;

use mixedrobust::mixed::{ExtractedRegion, Region};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const LEFT: f64 = 70.0;
const RIGHT: f64 = 600.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 540.0;

const FILL: &str = "#9ecae1";
const EDGE: &str = "#08519c";
const BOX: &str = "#636363";

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| {
            let w = (b - a).abs().max(1e-12);
            (a - 0.05 * w, b + 0.05 * w)
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (RIGHT - LEFT)
    }

    fn py(&self, y: f64) -> f64 {
        BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (BOTTOM - TOP)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn path(polys: &[Vec<[f64; 2]>], f: &Frame) -> String {
    let mut d = String::new();
    for p in polys {
        for (i, [x, y]) in p.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, f.px(*x), f.py(*y));
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

/// Renders the search rectangle, the shaded stable region with its
/// boundary, and optionally a dashed nominal boundary.
pub fn render(region: &ExtractedRegion, nominal: Option<&ExtractedRegion>, title: &str) -> String {
    let s = &region.search;
    let one_d = s.len() == 1;
    let frame = if one_d {
        Frame::new(s[0], (0.0, 1.0))
    } else {
        Frame::new(s[0], s[1])
    };
    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + RIGHT) / 2.0, escape(title));

    // axes
    let _ = writeln!(
        o,
        r#"<line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>"#
    );
    for t in ticks(frame.x.0, frame.x.1) {
        let x = frame.px(t);
        let _ = writeln!(
            o,
            r#"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            BOTTOM + 5.0,
            BOTTOM + 20.0,
            fmt(t)
        );
    }
    let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="middle">d1</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 45.0);
    if !one_d {
        for t in ticks(frame.y.0, frame.y.1) {
            let y = frame.py(t);
            let _ = writeln!(
                o,
                r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                fmt(t)
            );
        }
        let _ = writeln!(
            o,
            r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">d2</text>"#,
            (TOP + BOTTOM) / 2.0
        );
    }

    // search rectangle
    let (y0, y1) = if one_d { (0.0, 1.0) } else { s[1] };
    let (rx, ry) = (frame.px(s[0].0), frame.py(y1));
    let (rw, rh) = (frame.px(s[0].1) - rx, frame.py(y0) - ry);
    let _ = writeln!(
        o,
        r#"<rect x="{rx:.2}" y="{ry:.2}" width="{rw:.2}" height="{rh:.2}" fill="none" stroke="{BOX}" stroke-width="1.5"/>"#
    );

    let shapes = |r: &ExtractedRegion, o: &mut String, dashed: bool| match &r.region {
        Region::Intervals(iv) => {
            for (a, b) in iv.union.intervals() {
                let (x, w) = (frame.px(*a), frame.px(*b) - frame.px(*a));
                if dashed {
                    let _ = writeln!(
                        o,
                        r#"<rect x="{x:.2}" y="{ry:.2}" width="{w:.2}" height="{rh:.2}" fill="none" stroke="black" stroke-dasharray="6 4"/>"#
                    );
                } else {
                    let _ = writeln!(
                        o,
                        r#"<rect x="{x:.2}" y="{ry:.2}" width="{w:.2}" height="{rh:.2}" fill="{FILL}" stroke="{EDGE}" stroke-width="2"/>"#
                    );
                }
            }
        }
        Region::Polygons(p) => {
            if p.polygons.is_empty() {
                return;
            }
            let d = path(&p.polygons, &frame);
            if dashed {
                let _ = writeln!(o, r#"<path d="{d}" fill="none" stroke="black" stroke-dasharray="6 4"/>"#);
            } else {
                let _ = writeln!(
                    o,
                    r#"<path d="{d}" fill="{FILL}" fill-rule="evenodd" stroke="{EDGE}" stroke-width="2"/>"#
                );
            }
        }
    };
    shapes(region, &mut o, false);
    if let Some(n) = nominal {
        shapes(n, &mut o, true);
    }

    // legend
    let lx = RIGHT + 25.0;
    let mut entries = vec![
        (
            format!(r#"<rect x="{lx}" y="-6" width="20" height="12" fill="{FILL}" stroke="{EDGE}" stroke-width="2"/>"#),
            "robustly stable",
        ),
        (
            format!(r#"<rect x="{lx}" y="-6" width="20" height="12" fill="none" stroke="{BOX}" stroke-width="1.5"/>"#),
            "search box",
        ),
    ];
    if nominal.is_some() {
        entries.push((
            format!(r#"<line x1="{lx}" y1="0" x2="{}" y2="0" stroke="black" stroke-dasharray="6 4"/>"#, lx + 20.0),
            "nominal q",
        ));
    }
    for (i, (swatch, label)) in entries.iter().enumerate() {
        let ly = TOP + 20.0 + 25.0 * i as f64;
        let _ = writeln!(
            o,
            r#"<g transform="translate(0 {ly})">{swatch}<text x="{}" y="4">{label}</text></g>"#,
            lx + 30.0
        );
    }
    o.push_str("</svg>\n");
    o
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
