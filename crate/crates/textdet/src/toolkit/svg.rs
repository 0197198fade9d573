//! SVG rendering of detections over ground truth for quick inspection.

use std::fmt::Write;

use crate::postprocess::{Detection, Source};
use crate::targets::GroundTruth;
use crate::Real;

/// Renders an SVG 1.1 document: ground truth as dashed outlines (DO-NOT-CARE
/// regions at reduced opacity), detections color-coded by source — blue for
/// the pixel branch, red for the anchor branch.
pub fn render_svg<T: Real>(
    dets: &[Detection<T>],
    gt: Option<&GroundTruth<T>>,
    width: u32,
    height: u32,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"  <rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );

    if let Some(gt) = gt {
        for region in &gt.regions {
            let opacity = if region.care { "1" } else { "0.35" };
            let _ = writeln!(
                out,
                r##"  <polygon points="{}" fill="none" stroke="#2e7d32" stroke-width="1" stroke-dasharray="4 2" opacity="{opacity}"/>"##,
                points(&region.quad.coords())
            );
        }
    }

    for d in dets {
        let color = match d.source {
            Source::Pixel => "#1565c0",
            Source::Anchor => "#c62828",
        };
        let _ = writeln!(
            out,
            r#"  <polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{:?} {}</title></polygon>"#,
            points(&d.quad.coords()),
            d.source,
            d.score
        );
    }

    out.push_str("</svg>\n");
    out
}

fn points<T: Real>(coords: &[T; 8]) -> String {
    let mut s = String::new();
    for k in 0..4 {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", coords[2 * k], coords[2 * k + 1]);
    }
    s
}
