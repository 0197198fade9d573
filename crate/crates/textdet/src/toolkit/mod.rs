//! File formats, ground-truth parsing, evaluation, rendering, and the run
//! configuration that ties the library together for command-line use.

mod config;
mod detections;
mod eval;
mod icdar;
mod svg;
mod tensor;

pub use config::RunConfig;
pub use detections::{detections_to_string, parse_detections, read_detections, write_detections};
pub use eval::{aggregate_metrics, evaluate, MatchPair, Metrics};
pub use icdar::parse_icdar_gt;
pub use svg::render_svg;
pub use tensor::{Tensor, DTYPE_F32, MAGIC, VERSION};
