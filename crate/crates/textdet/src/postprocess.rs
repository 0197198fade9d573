//! Inference-side decoding and fusion non-maximum suppression.
//!
//! The pixel branch densely predicts rotated boxes; the anchor branch
//! predicts quad offsets over the trimmed lattice. Both candidate streams
//! are merged by boosting anchor scores, then suppressed in two stages:
//! a cheap greedy NMS on axis-aligned bounding rectangles first, then the
//! expensive quad-IoU NMS on the few survivors.

use serde::{Deserialize, Serialize};

use crate::anchors::{trim_for_inference, AnchorLattice};
use crate::geometry::{aarect_iou, mbr, quad_iou, rbox_to_quad, Quad, RBoxPred};
use crate::grid::Grid;
use crate::targets::decode_offsets;
use crate::{real, Error, Real, Result};

/// Which branch produced a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Pixel,
    Anchor,
}

/// A scored candidate text quadrilateral.
///
/// Pixel-source scores stay in `[0, 1]`; anchor-source scores land in
/// `[1, 2]` once [`fuse_scores`] has applied the boost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub quad: Quad<T>,
    pub score: T,
    pub source: Source,
}

/// Thresholds of the decode + fusion NMS pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub pixel_score_thresh: f64,
    pub anchor_score_thresh: f64,
    /// Pixel boxes whose bounding-rect short side is below this are dropped.
    pub min_mbr_side: f64,
    /// Allowed bounding-rect aspect ratio (width/height) interval for pixel
    /// boxes.
    pub mbr_ratio_range: [f64; 2],
    /// Stage-1 suppression threshold on bounding-rect IoU.
    pub mbr_nms_iou: f64,
    /// Stage-2 suppression threshold on quad IoU.
    pub quad_nms_iou: f64,
    /// Added to anchor-source scores so they outrank pixel boxes.
    pub anchor_score_boost: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            pixel_score_thresh: 0.8,
            anchor_score_thresh: 0.5,
            min_mbr_side: 10.0,
            mbr_ratio_range: [1.0 / 15.0, 15.0],
            mbr_nms_iou: 0.5,
            quad_nms_iou: 0.2,
            anchor_score_boost: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pixel_score_thresh", self.pixel_score_thresh),
            ("anchor_score_thresh", self.anchor_score_thresh),
            ("mbr_nms_iou", self.mbr_nms_iou),
            ("quad_nms_iou", self.quad_nms_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.anchor_score_boost.is_nan() || self.anchor_score_boost < 0.0 {
            return Err(Error::InvalidInput("negative anchor score boost".into()));
        }
        let [lo, hi] = self.mbr_ratio_range;
        if lo.is_nan() || hi.is_nan() || lo <= 0.0 || lo > hi {
            return Err(Error::InvalidInput("empty mbr ratio range".into()));
        }
        Ok(())
    }
}

/// Decode output plus the count of degenerate boxes that were dropped.
#[derive(Debug, Clone)]
pub struct Decoded<T> {
    pub detections: Vec<Detection<T>>,
    pub dropped: usize,
}

/// Counters from one [`cascaded_nms_with_stats`] run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NmsStats {
    pub rect_iou_evals: usize,
    pub quad_iou_evals: usize,
    pub stage1_survivors: usize,
}

/// Per-stage counters of one pipeline run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PipelineDiagnostics {
    pub pixel_decoded: usize,
    pub pixel_dropped: usize,
    pub pixel_filtered: usize,
    pub anchor_decoded: usize,
    pub anchor_dropped: usize,
    pub candidates: usize,
    pub stage1_survivors: usize,
    pub final_detections: usize,
    pub rect_iou_evals: usize,
    pub quad_iou_evals: usize,
}

/// Maps attention probabilities `[0, 1]` element-wise through `exp` onto
/// `[1, e]`.
pub fn attention_multiplier<T: Real>(heat: &Grid<T>) -> Result<Grid<T>> {
    for &p in heat.as_slice() {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "attention probability {p} outside [0, 1]"
            )));
        }
    }
    let data = heat.as_slice().iter().map(|&p| p.exp()).collect();
    Grid::from_vec(heat.width(), heat.height(), data)
}

/// Decodes the pixel branch: one rotated-box detection per cell whose score
/// reaches the pixel threshold. Degenerate boxes are dropped and counted.
pub fn decode_pixel<T: Real>(
    score: &Grid<T>,
    geo: &Grid<[T; 5]>,
    stride: u32,
    cfg: &FusionConfig,
) -> Result<Decoded<T>> {
    if !score.same_shape(geo) {
        return Err(Error::InvalidInput(format!(
            "score grid {}x{} does not match geo grid {}x{}",
            score.width(),
            score.height(),
            geo.width(),
            geo.height()
        )));
    }
    let thresh = real::<T>(cfg.pixel_score_thresh);
    let s = stride as f64;
    let mut detections = Vec::new();
    let mut dropped = 0;
    for (row, col, &p) in score.iter_cells() {
        if p < thresh {
            continue;
        }
        let g = geo.get(row, col);
        let rbox = RBoxPred::new(g[0], g[1], g[2], g[3], g[4]);
        let px = real::<T>((col as f64 + 0.5) * s);
        let py = real::<T>((row as f64 + 0.5) * s);
        match rbox_to_quad(px, py, &rbox) {
            Ok(quad) => detections.push(Detection {
                quad,
                score: p,
                source: Source::Pixel,
            }),
            Err(_) => dropped += 1,
        }
    }
    Ok(Decoded {
        detections,
        dropped,
    })
}

/// Removes pixel boxes that are too small or too extreme: a detection is
/// kept iff its bounding rect's short side reaches `min_mbr_side` and its
/// width/height ratio lies inside `mbr_ratio_range`.
pub fn filter_pixel<T: Real>(dets: Vec<Detection<T>>, cfg: &FusionConfig) -> Vec<Detection<T>> {
    let min_side = real::<T>(cfg.min_mbr_side);
    let lo = real::<T>(cfg.mbr_ratio_range[0]);
    let hi = real::<T>(cfg.mbr_ratio_range[1]);
    dets.into_iter()
        .filter(|d| {
            let r = mbr(&d.quad);
            let (w, h) = (r.width(), r.height());
            if w.min(h) < min_side || h <= T::zero() {
                return false;
            }
            let ratio = w / h;
            ratio >= lo && ratio <= hi
        })
        .collect()
}

/// Decodes the anchor branch over a trimmed lattice. `scores` has one entry
/// per anchor and `offsets` eight, in lattice order.
pub fn decode_anchor<T: Real>(
    trimmed: &AnchorLattice<T>,
    scores: &[T],
    offsets: &[T],
    cfg: &FusionConfig,
) -> Result<Decoded<T>> {
    if scores.len() != trimmed.len() || offsets.len() != 8 * trimmed.len() {
        return Err(Error::InvalidInput(format!(
            "anchor tensors ({} scores, {} offsets) misaligned with lattice of {}",
            scores.len(),
            offsets.len(),
            trimmed.len()
        )));
    }
    let thresh = real::<T>(cfg.anchor_score_thresh);
    let mut detections = Vec::new();
    let mut dropped = 0;
    for (i, anchor) in trimmed.anchors().iter().enumerate() {
        let score = scores[i];
        if score < thresh {
            continue;
        }
        let mut off = [T::zero(); 8];
        off.copy_from_slice(&offsets[8 * i..8 * (i + 1)]);
        match decode_offsets(anchor, &off) {
            Ok(quad) => detections.push(Detection {
                quad,
                score,
                source: Source::Anchor,
            }),
            Err(_) => dropped += 1,
        }
    }
    Ok(Decoded {
        detections,
        dropped,
    })
}

/// Raises anchor-source scores by the configured boost; pixel detections
/// pass through unchanged.
pub fn fuse_scores<T: Real>(mut dets: Vec<Detection<T>>, cfg: &FusionConfig) -> Vec<Detection<T>> {
    let boost = real::<T>(cfg.anchor_score_boost);
    for d in &mut dets {
        if d.source == Source::Anchor {
            d.score += boost;
        }
    }
    dets
}

fn source_rank(s: Source) -> u8 {
    match s {
        Source::Anchor => 0,
        Source::Pixel => 1,
    }
}

/// Greedy two-stage suppression on fused candidates: stage 1 suppresses by
/// bounding-rect IoU above `mbr_nms_iou`, stage 2 by quad IoU above
/// `quad_nms_iou`. Candidates are ranked by score descending, anchor-source
/// first on ties, then input order; survivors keep that ranking.
pub fn cascaded_nms<T: Real>(dets: Vec<Detection<T>>, cfg: &FusionConfig) -> Vec<Detection<T>> {
    cascaded_nms_with_stats(dets, cfg).0
}

pub fn cascaded_nms_with_stats<T: Real>(
    dets: Vec<Detection<T>>,
    cfg: &FusionConfig,
) -> (Vec<Detection<T>>, NmsStats) {
    let mut stats = NmsStats::default();

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("finite scores")
            .then(source_rank(dets[a].source).cmp(&source_rank(dets[b].source)))
            .then(a.cmp(&b))
    });

    // Stage 1: cheap suppression on bounding rectangles.
    let rects: Vec<_> = dets.iter().map(|d| mbr(&d.quad)).collect();
    let mbr_thresh = real::<T>(cfg.mbr_nms_iou);
    let mut stage1: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = stage1.iter().any(|&kept| {
            stats.rect_iou_evals += 1;
            aarect_iou(&rects[kept], &rects[i]) > mbr_thresh
        });
        if !suppressed {
            stage1.push(i);
        }
    }
    stats.stage1_survivors = stage1.len();

    // Stage 2: quad IoU on the survivors, order preserved.
    let quad_thresh = real::<T>(cfg.quad_nms_iou);
    let mut survivors: Vec<usize> = Vec::new();
    for &i in &stage1 {
        let suppressed = survivors.iter().any(|&kept| {
            stats.quad_iou_evals += 1;
            quad_iou(&dets[kept].quad, &dets[i].quad) > quad_thresh
        });
        if !suppressed {
            survivors.push(i);
        }
    }

    let out = survivors.into_iter().map(|i| dets[i]).collect();
    (out, stats)
}

/// Full inference pipeline over one image: decode and filter the pixel
/// branch, decode the anchor branch over the trimmed lattice (tensors are
/// given in full-lattice order), fuse scores, and run the cascaded NMS.
#[allow(clippy::too_many_arguments)]
pub fn fusion_nms_pipeline<T: Real>(
    score: &Grid<T>,
    geo: &Grid<[T; 5]>,
    pixel_stride: u32,
    lattice: &AnchorLattice<T>,
    anchor_scores: &[T],
    anchor_offsets: &[T],
    cfg: &FusionConfig,
) -> Result<(Vec<Detection<T>>, PipelineDiagnostics)> {
    cfg.validate()?;
    if anchor_scores.len() != lattice.len() || anchor_offsets.len() != 8 * lattice.len() {
        return Err(Error::InvalidInput(format!(
            "anchor tensors ({} scores, {} offsets) misaligned with full lattice of {}",
            anchor_scores.len(),
            anchor_offsets.len(),
            lattice.len()
        )));
    }
    let mut diag = PipelineDiagnostics::default();

    let pixel = decode_pixel(score, geo, pixel_stride, cfg)?;
    diag.pixel_decoded = pixel.detections.len();
    diag.pixel_dropped = pixel.dropped;
    let pixel_dets = filter_pixel(pixel.detections, cfg);
    diag.pixel_filtered = pixel_dets.len();

    let trimmed = trim_for_inference(lattice);
    let mut trimmed_scores = Vec::with_capacity(trimmed.len());
    let mut trimmed_offsets = Vec::with_capacity(8 * trimmed.len());
    for &orig in trimmed.original_indices() {
        trimmed_scores.push(anchor_scores[orig]);
        trimmed_offsets.extend_from_slice(&anchor_offsets[8 * orig..8 * (orig + 1)]);
    }
    let anchor = decode_anchor(&trimmed, &trimmed_scores, &trimmed_offsets, cfg)?;
    diag.anchor_decoded = anchor.detections.len();
    diag.anchor_dropped = anchor.dropped;

    let mut candidates = pixel_dets;
    candidates.extend(anchor.detections);
    diag.candidates = candidates.len();

    let fused = fuse_scores(candidates, cfg);
    let (final_dets, stats) = cascaded_nms_with_stats(fused, cfg);
    diag.stage1_survivors = stats.stage1_survivors;
    diag.rect_iou_evals = stats.rect_iou_evals;
    diag.quad_iou_evals = stats.quad_iou_evals;
    diag.final_detections = final_dets.len();

    Ok((final_dets, diag))
}
