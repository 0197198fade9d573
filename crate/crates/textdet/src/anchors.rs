//! Prior-box lattice generation.
//!
//! Anchors come in five aspect-ratio categories spread over six feature
//! maps. Within one feature-map cell each anchor is duplicated according to
//! the per-map anchor density: square anchors on a `d x d` sub-grid,
//! horizontal anchors at `d` vertical offsets, vertical anchors at `d`
//! horizontal offsets. Long anchors exist on maps 2-6 only and are the part
//! retained (together with all of map 1) by the inference trimming rule.

use serde::{Deserialize, Serialize};

use crate::geometry::{AARect, Point, Quad};
use crate::{real, Error, Real, Result};

/// Number of prediction feature maps.
pub const NUM_MAPS: usize = 6;

/// The five anchor aspect-ratio groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnchorCategory {
    Square,
    MediumHorizontal,
    MediumVertical,
    LongHorizontal,
    LongVertical,
}

impl AnchorCategory {
    /// Enumeration order used when building the lattice.
    pub const ALL: [AnchorCategory; 5] = [
        AnchorCategory::Square,
        AnchorCategory::MediumHorizontal,
        AnchorCategory::MediumVertical,
        AnchorCategory::LongHorizontal,
        AnchorCategory::LongVertical,
    ];

    pub fn is_long(self) -> bool {
        matches!(
            self,
            AnchorCategory::LongHorizontal | AnchorCategory::LongVertical
        )
    }
}

/// Configuration of the anchor predictor lattice.
///
/// Aspect ratios are width/height; horizontal categories are wider than
/// tall. Anchor sizes are `(scale * sqrt(ar), scale / sqrt(ar))` so every
/// anchor of one map has the same area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct APLConfig {
    /// Downsampling factor per feature map.
    pub strides: [u32; NUM_MAPS],
    /// Anchor base scale (pixels) per feature map.
    pub base_scales: [f64; NUM_MAPS],
    pub square_ratios: Vec<f64>,
    pub medium_horizontal_ratios: Vec<f64>,
    pub medium_vertical_ratios: Vec<f64>,
    pub long_horizontal_ratios: Vec<f64>,
    pub long_vertical_ratios: Vec<f64>,
    /// Duplication count per map for square and medium anchors; squares
    /// duplicate on both axes (`d*d` copies), medium anchors on one.
    pub medium_densities: [u32; NUM_MAPS],
    /// Duplication count per map for long anchors; ignored where
    /// `long_anchor_maps` is false.
    pub long_densities: [u32; NUM_MAPS],
    /// Which maps carry long anchors; never the first map.
    pub long_anchor_maps: [bool; NUM_MAPS],
    /// Long-anchor predictor filter length `n` per map (`1 x n` / `n x 1`
    /// filters). Descriptive only; nothing in this crate consumes it.
    pub long_filter_n: [u32; NUM_MAPS],
}

impl Default for APLConfig {
    fn default() -> Self {
        let strides = [4, 16, 32, 64, 64, 64];
        Self {
            strides,
            // Anchors need to overlap neighbouring cells to reach IoU 0.5
            // against offset ground truth, hence 1.5x the stride.
            base_scales: strides.map(|s| 1.5 * s as f64),
            square_ratios: vec![1.0],
            medium_horizontal_ratios: vec![2.0, 3.0, 5.0, 7.0],
            medium_vertical_ratios: vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0],
            long_horizontal_ratios: vec![15.0, 25.0, 35.0],
            long_vertical_ratios: vec![1.0 / 15.0, 1.0 / 25.0, 1.0 / 35.0],
            medium_densities: [1, 2, 3, 4, 3, 2],
            long_densities: [0, 4, 4, 6, 4, 3],
            long_anchor_maps: [false, true, true, true, true, true],
            long_filter_n: [0, 33, 29, 15, 15, 15],
        }
    }
}

impl APLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strides.contains(&0) {
            return Err(Error::InvalidInput("zero anchor stride".into()));
        }
        if self.base_scales.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::InvalidInput("non-positive anchor scale".into()));
        }
        if self.medium_densities.contains(&0) {
            return Err(Error::InvalidInput("anchor density must be >= 1".into()));
        }
        if self.long_anchor_maps[0] {
            return Err(Error::InvalidInput(
                "long anchors are not allowed on map 1".into(),
            ));
        }
        for m in 0..NUM_MAPS {
            if self.long_anchor_maps[m] && self.long_densities[m] == 0 {
                return Err(Error::InvalidInput(format!(
                    "long anchor density must be >= 1 on map {}",
                    m + 1
                )));
            }
        }
        let all_ratios = AnchorCategory::ALL.iter().flat_map(|&c| self.ratios(c));
        for &r in all_ratios {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("bad aspect ratio {r}")));
            }
        }
        Ok(())
    }

    pub fn ratios(&self, category: AnchorCategory) -> &[f64] {
        match category {
            AnchorCategory::Square => &self.square_ratios,
            AnchorCategory::MediumHorizontal => &self.medium_horizontal_ratios,
            AnchorCategory::MediumVertical => &self.medium_vertical_ratios,
            AnchorCategory::LongHorizontal => &self.long_horizontal_ratios,
            AnchorCategory::LongVertical => &self.long_vertical_ratios,
        }
    }

    /// Duplication count for `category` on 0-based map `m`.
    pub fn density(&self, category: AnchorCategory, m: usize) -> u32 {
        if category.is_long() {
            self.long_densities[m]
        } else {
            self.medium_densities[m]
        }
    }

    fn grid_dims(&self, m: usize, input_w: u32, input_h: u32) -> (usize, usize) {
        let s = self.strides[m];
        (input_w.div_ceil(s) as usize, input_h.div_ceil(s) as usize)
    }
}

/// One prior box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
    /// 1-based feature-map index.
    pub map_index: usize,
    pub category: AnchorCategory,
    /// `(row, col)` of the owning feature-map cell.
    pub cell: (usize, usize),
    /// `(vertical, horizontal)` density duplication offsets.
    pub density_offset: (u32, u32),
}

impl<T: Real> Anchor<T> {
    pub fn rect(&self) -> AARect<T> {
        let half = real::<T>(0.5);
        AARect {
            xmin: self.cx - self.w * half,
            ymin: self.cy - self.h * half,
            xmax: self.cx + self.w * half,
            ymax: self.cy + self.h * half,
        }
    }

    /// Corner ring top-left, top-right, bottom-right, bottom-left; this is
    /// already the canonical quad order used for offset encoding.
    pub fn corners(&self) -> [Point<T>; 4] {
        let r = self.rect();
        [
            Point::new(r.xmin, r.ymin),
            Point::new(r.xmax, r.ymin),
            Point::new(r.xmax, r.ymax),
            Point::new(r.xmin, r.ymax),
        ]
    }

    pub fn quad(&self) -> Quad<T> {
        Quad::new(self.corners()).expect("anchor rectangles are valid quads")
    }
}

/// The full enumerated anchor set for one input size.
///
/// Enumeration order is deterministic: map, then cell row-major, then
/// category, then aspect ratio, then density offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLattice<T> {
    anchors: Vec<Anchor<T>>,
    per_map: [usize; NUM_MAPS],
    /// For each position, the index of the same anchor in the originally
    /// built lattice; identity until trimmed.
    original_indices: Vec<usize>,
    config: APLConfig,
    input_w: u32,
    input_h: u32,
}

impl<T: Real> AnchorLattice<T> {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[Anchor<T>] {
        &self.anchors
    }

    pub fn per_map_counts(&self) -> &[usize; NUM_MAPS] {
        &self.per_map
    }

    /// Index each anchor had in the originally built (untrimmed) lattice.
    pub fn original_indices(&self) -> &[usize] {
        &self.original_indices
    }

    pub fn config(&self) -> &APLConfig {
        &self.config
    }

    pub fn input_size(&self) -> (u32, u32) {
        (self.input_w, self.input_h)
    }
}

/// Enumerates the full anchor lattice for an `input_w x input_h` image.
pub fn build_lattice<T: Real>(
    cfg: &APLConfig,
    input_w: u32,
    input_h: u32,
) -> Result<AnchorLattice<T>> {
    cfg.validate()?;
    if input_w == 0 || input_h == 0 {
        return Err(Error::InvalidInput("zero-sized input image".into()));
    }

    let mut anchors = Vec::new();
    let mut per_map = [0usize; NUM_MAPS];

    #[allow(clippy::needless_range_loop)]
    for m in 0..NUM_MAPS {
        let stride = cfg.strides[m] as f64;
        let scale = cfg.base_scales[m];
        let (grid_w, grid_h) = cfg.grid_dims(m, input_w, input_h);
        let before = anchors.len();

        for row in 0..grid_h {
            for col in 0..grid_w {
                let x0 = col as f64 * stride;
                let y0 = row as f64 * stride;
                for category in AnchorCategory::ALL {
                    if category.is_long() && !cfg.long_anchor_maps[m] {
                        continue;
                    }
                    let d = cfg.density(category, m);
                    let sub = stride / d as f64;
                    for &ratio in cfg.ratios(category) {
                        let w = scale * ratio.sqrt();
                        let h = scale / ratio.sqrt();
                        let mut push = |cx: f64, cy: f64, off: (u32, u32)| {
                            anchors.push(Anchor {
                                cx: real::<T>(cx),
                                cy: real::<T>(cy),
                                w: real::<T>(w),
                                h: real::<T>(h),
                                map_index: m + 1,
                                category,
                                cell: (row, col),
                                density_offset: off,
                            });
                        };
                        match category {
                            AnchorCategory::Square => {
                                for i in 0..d {
                                    for j in 0..d {
                                        let cx = x0 + (j as f64 + 0.5) * sub;
                                        let cy = y0 + (i as f64 + 0.5) * sub;
                                        push(cx, cy, (i, j));
                                    }
                                }
                            }
                            AnchorCategory::MediumHorizontal | AnchorCategory::LongHorizontal => {
                                let cx = x0 + 0.5 * stride;
                                for i in 0..d {
                                    let cy = y0 + (i as f64 + 0.5) * sub;
                                    push(cx, cy, (i, 0));
                                }
                            }
                            AnchorCategory::MediumVertical | AnchorCategory::LongVertical => {
                                let cy = y0 + 0.5 * stride;
                                for j in 0..d {
                                    let cx = x0 + (j as f64 + 0.5) * sub;
                                    push(cx, cy, (0, j));
                                }
                            }
                        }
                    }
                }
            }
        }
        per_map[m] = anchors.len() - before;
    }

    let original_indices = (0..anchors.len()).collect();
    Ok(AnchorLattice {
        anchors,
        per_map,
        original_indices,
        config: cfg.clone(),
        input_w,
        input_h,
    })
}

/// Closed-form per-map anchor counts matching [`build_lattice`].
pub fn count_anchors(cfg: &APLConfig, input_w: u32, input_h: u32) -> Result<[usize; NUM_MAPS]> {
    cfg.validate()?;
    if input_w == 0 || input_h == 0 {
        return Err(Error::InvalidInput("zero-sized input image".into()));
    }
    let mut counts = [0usize; NUM_MAPS];
    for (m, count) in counts.iter_mut().enumerate() {
        let (grid_w, grid_h) = cfg.grid_dims(m, input_w, input_h);
        let mut per_cell = 0usize;
        for category in AnchorCategory::ALL {
            if category.is_long() && !cfg.long_anchor_maps[m] {
                continue;
            }
            let d = cfg.density(category, m) as usize;
            let mult = match category {
                AnchorCategory::Square => d * d,
                _ => d,
            };
            per_cell += cfg.ratios(category).len() * mult;
        }
        *count = grid_w * grid_h * per_cell;
    }
    Ok(counts)
}

/// Inference-time trimming: keeps every map-1 anchor plus the long-category
/// anchors of maps 2-6, preserving order and recording original indices.
pub fn trim_for_inference<T: Real>(lattice: &AnchorLattice<T>) -> AnchorLattice<T> {
    let mut anchors = Vec::new();
    let mut original_indices = Vec::new();
    let mut per_map = [0usize; NUM_MAPS];

    for (i, a) in lattice.anchors.iter().enumerate() {
        if a.map_index == 1 || a.category.is_long() {
            anchors.push(*a);
            original_indices.push(lattice.original_indices[i]);
            per_map[a.map_index - 1] += 1;
        }
    }

    AnchorLattice {
        anchors,
        per_map,
        original_indices,
        config: lattice.config.clone(),
        input_w: lattice.input_w,
        input_h: lattice.input_h,
    }
}
