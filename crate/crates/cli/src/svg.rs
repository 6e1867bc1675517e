//! Feedback overlays. Every flaggable attribute is drawn as its own element,
//! stroked red when flagged and green otherwise, so the number of red
//! elements equals `s2 + s3 + (s4 - missing) + s1 + s5`:
//!
//! | element              | flag           |
//! |----------------------|----------------|
//! | `stitch-box`         | E3 wide bite   |
//! | `stitch-orientation` | E2 oblique     |
//! | `stitch-height`      | E4 low aspect  |
//! | `stitch-center`      | E4 narrow bite |
//! | `gap`                | E5 spacing     |
//! | `bend`               | E1 line bend   |
//!
//! The vessel box and the anastomosis line are context, drawn in gray and
//! blue.

use std::fmt::Write;

use anastomosis_core::geometry::{Point, RotatedBox};
use anastomosis_core::{ErrorReport, SceneGeometry};

fn color(flagged: bool) -> &'static str {
    if flagged {
        "red"
    } else {
        "green"
    }
}

fn points(rect: &RotatedBox) -> String {
    rect.corners()
        .iter()
        .map(|p| format!("{:.2},{:.2}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(" ")
}

fn line(out: &mut String, class: &str, a: Point, b: Point, stroke: &str, width: f64) {
    let _ = writeln!(
        out,
        r#"  <line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width:.2}"/>"#,
        a.x, a.y, b.x, b.y
    );
}

pub fn render(
    image_id: &str,
    width: u32,
    height: u32,
    scene: &SceneGeometry,
    errors: &ErrorReport,
) -> String {
    let mut out = String::new();
    let scale = f64::from(width.max(height));
    let stroke = (scale / 800.0).max(1.0);

    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "  <title>{}</title>", escape(image_id));
    let _ = writeln!(
        out,
        r#"  <polygon class="vessel" points="{}" fill="none" stroke="gray" stroke-width="{stroke:.2}"/>"#,
        points(&scene.vessel_box)
    );

    let anchor = if scene.stitches.is_empty() {
        scene.vessel_box.center
    } else {
        let sum = scene
            .stitches
            .iter()
            .fold(Point::ZERO, |acc, s| acc + s.c_s);
        sum * (1.0 / scene.n() as f64)
    };
    let half = scene.l_f_hat.vec() * (scene.vessel_axis_len / 2.0);
    line(
        &mut out,
        "anastomosis-line",
        anchor - half,
        anchor + half,
        "blue",
        stroke,
    );

    for (i, s) in scene.stitches.iter().enumerate() {
        let _ = writeln!(out, r#"  <g class="stitch" data-index="{i}">"#);
        let _ = writeln!(
            out,
            r#"  <polygon class="stitch-box" points="{}" fill="none" stroke="{}" stroke-width="{stroke:.2}"/>"#,
            points(&s.rect),
            color(errors.e3_flags[i])
        );
        let along = s.l_o_hat.vec() * (s.width_len / 2.0);
        line(
            &mut out,
            "stitch-orientation",
            s.c_s - along,
            s.c_s + along,
            color(errors.e2_flags[i]),
            stroke,
        );
        let across = s.l_o_hat.vec().perp() * (s.height_len / 2.0);
        line(
            &mut out,
            "stitch-height",
            s.c_s - across,
            s.c_s + across,
            color(errors.e4_aspect_flags[i]),
            stroke,
        );
        let _ = writeln!(
            out,
            r#"  <circle class="stitch-center" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{}" stroke-width="{stroke:.2}"/>"#,
            s.c_s.x,
            s.c_s.y,
            3.0 * stroke,
            color(errors.e4_width_flags[i])
        );
        let _ = writeln!(out, "  </g>");
    }

    for (i, pair) in scene.stitches.windows(2).enumerate() {
        line(
            &mut out,
            "gap",
            pair[0].c_s,
            pair[1].c_s,
            color(errors.e5_flags[i]),
            stroke,
        );
    }
    for (i, s) in scene
        .stitches
        .iter()
        .skip(1)
        .take(scene.beta.len())
        .enumerate()
    {
        let _ = writeln!(
            out,
            r#"  <circle class="bend" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{}" stroke-width="{stroke:.2}"/>"#,
            s.c_s.x,
            s.c_s.y,
            8.0 * stroke,
            color(errors.e1_flags[i])
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Number of red-stroked elements in a rendered overlay.
pub fn red_elements(svg: &str) -> usize {
    svg.matches(r#"stroke="red""#).count()
}
