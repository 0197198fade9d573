//! ICDAR-style ground-truth parsing.
//!
//! One region per line: `x1,y1,x2,y2,x3,y3,x4,y4,transcription`. The
//! transcription may itself contain commas; `###` marks a DO-NOT-CARE
//! region.

use crate::geometry::Quad;
use crate::targets::{GroundTruth, GtRegion};
use crate::{real, Error, Real, Result};

pub fn parse_icdar_gt<T: Real>(text: &str, image_w: u32, image_h: u32) -> Result<GroundTruth<T>> {
    let mut regions = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        // Files from the official archives often start with a BOM.
        let line = raw.trim_start_matches('\u{feff}').trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(9, ',').collect();
        if parts.len() < 9 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 8 coordinates and a transcription, got {line:?}"),
            });
        }
        let mut coords = [T::zero(); 8];
        for (k, part) in parts[..8].iter().enumerate() {
            let v: f64 = part.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad coordinate {part:?}"),
            })?;
            coords[k] = real::<T>(v);
        }
        let quad = Quad::from_coords(coords).map_err(|e| Error::Parse {
            line: line_no,
            msg: format!("invalid quad: {e}"),
        })?;
        let care = parts[8].trim() != "###";
        regions.push(GtRegion { quad, care });
    }
    Ok(GroundTruth::new(regions, image_w, image_h))
}
