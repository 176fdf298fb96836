//! Self-contained SVG rendering of displacement fields.

use std::fmt::Write;

use crate::warp::FieldSample;

/// Canvas edge length in pixels.
pub const CANVAS: f64 = 640.0;
const MARGIN: f64 = 24.0;

/// Source points in gray, displaced points in black, and a segment from
/// each source to its image. Output depends only on the samples.
pub fn render_field(samples: &[FieldSample], title: &str) -> String {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        for v in [s.source.x, s.source.y, s.displaced.x, s.displaced.y] {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo >= hi {
        (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 1.0);
        }
    }
    let scale = (CANVAS - 2.0 * MARGIN) / (hi - lo);
    let px = |x: f64| MARGIN + (x - lo) * scale;
    // y grows upward in the plane, downward in SVG
    let py = |y: f64| CANVAS - MARGIN - (y - lo) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(out, r##"<g stroke="#000000" stroke-width="0.6">"##);
    for s in samples {
        let _ = writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            px(s.source.x),
            py(s.source.y),
            px(s.displaced.x),
            py(s.displaced.y)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g fill="#999999">"##);
    for s in samples {
        let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="2.5"/>"#, px(s.source.x), py(s.source.y));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g fill="#000000">"##);
    for s in samples {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="2"/>"#,
            px(s.displaced.x),
            py(s.displaced.y)
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
