//! Detection files: one JSON record per line, `{"quad": [x1..y4],
//! "score": s, "source": "pixel"|"anchor"}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::Quad;
use crate::postprocess::{Detection, Source};
use crate::{real, Error, Real, Result};

#[derive(Serialize, Deserialize)]
struct Record {
    quad: [f64; 8],
    score: f64,
    source: Source,
}

pub fn detections_to_string<T: Real>(dets: &[Detection<T>]) -> String {
    let mut out = String::new();
    for d in dets {
        let record = Record {
            quad: d.quad.coords().map(|v| v.to_f64().expect("finite")),
            score: d.score.to_f64().expect("finite"),
            source: d.source,
        };
        out.push_str(&serde_json::to_string(&record).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write_detections<T: Real, W: Write>(dets: &[Detection<T>], w: &mut W) -> Result<()> {
    w.write_all(detections_to_string(dets).as_bytes())?;
    Ok(())
}

pub fn parse_detections<T: Real>(text: &str) -> Result<Vec<Detection<T>>> {
    let mut dets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        let quad = Quad::from_coords(record.quad.map(real::<T>)).map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("invalid quad: {e}"),
        })?;
        dets.push(Detection {
            quad,
            score: real::<T>(record.score),
            source: record.source,
        });
    }
    Ok(dets)
}

pub fn read_detections<T: Real, P: AsRef<std::path::Path>>(path: P) -> Result<Vec<Detection<T>>> {
    parse_detections(&std::fs::read_to_string(path)?)
}
