//! Ground-truth target generation for the pixel and anchor branches.
//!
//! Pixel targets follow the shrunk-polygon assignment: only cells whose
//! center falls inside the shrunk text quad are positive, the band between
//! the shrunk and original quad is ignored, and a separate unshrunk
//! attention map marks the full text region. Anchor targets match prior
//! boxes against the axis-aligned bounding rectangles of the text quads.

use serde::{Deserialize, Serialize};

use crate::anchors::{Anchor, AnchorLattice};
use crate::geometry::{aarect_iou, fit_rotated_rect, mbr, shrink_quad, Point, Quad, RotRect};
use crate::grid::Grid;
use crate::{real, Error, Real, Result};

/// Training label of one grid cell or anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Ignored,
    Negative,
}

/// Match result of one anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    /// Matched to the care ground-truth region with this index.
    Positive(usize),
    Negative,
    /// Best match is a DO-NOT-CARE region; excluded from training.
    Ignored,
}

impl AnchorLabel {
    pub fn is_positive(&self) -> bool {
        matches!(self, AnchorLabel::Positive(_))
    }

    /// Collapses to the three-state label used by loss selection.
    pub fn as_label(&self) -> Label {
        match self {
            AnchorLabel::Positive(_) => Label::Positive,
            AnchorLabel::Negative => Label::Negative,
            AnchorLabel::Ignored => Label::Ignored,
        }
    }
}

/// One annotated text region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtRegion<T> {
    pub quad: Quad<T>,
    /// `false` marks a DO-NOT-CARE region that is ignored in training and
    /// excluded from evaluation denominators.
    pub care: bool,
}

/// Per-image ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub regions: Vec<GtRegion<T>>,
    pub image_w: u32,
    pub image_h: u32,
}

impl<T: Real> GroundTruth<T> {
    pub fn new(regions: Vec<GtRegion<T>>, image_w: u32, image_h: u32) -> Self {
        Self {
            regions,
            image_w,
            image_h,
        }
    }

    pub fn care_count(&self) -> usize {
        self.regions.iter().filter(|r| r.care).count()
    }
}

/// Dense pixel-branch targets at one grid stride.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTargets<T> {
    /// Shrunk-polygon classification labels.
    pub score: Grid<Label>,
    /// `[d_top, d_bottom, d_left, d_right, theta]` per cell; meaningful on
    /// positive cells only, zero elsewhere.
    pub geo: Grid<[T; 5]>,
    /// Unshrunk attention labels.
    pub attention: Grid<Label>,
    pub stride: u32,
}

impl<T: Real> PixelTargets<T> {
    /// Image coordinates of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> Point<T> {
        cell_center(self.stride, row, col)
    }
}

fn cell_center<T: Real>(stride: u32, row: usize, col: usize) -> Point<T> {
    let s = stride as f64;
    Point::new(
        real::<T>((col as f64 + 0.5) * s),
        real::<T>((row as f64 + 0.5) * s),
    )
}

/// Builds pixel-branch targets for one image.
///
/// A cell is positive iff its center lies inside the shrunk quad of a care
/// region; ignored if it lies inside the original quad but not the shrunk
/// one, or inside any DO-NOT-CARE region; negative otherwise. Geometry
/// targets hold the distances from the cell center to the four edges of the
/// minimum-area rotated rectangle fitted to the (unshrunk) region quad, plus
/// that rectangle's orientation. The attention map uses the same rule
/// without shrinking.
pub fn make_pixel_targets<T: Real>(
    gt: &GroundTruth<T>,
    grid_stride: u32,
    shrink_ratio: T,
) -> Result<PixelTargets<T>> {
    if grid_stride == 0 {
        return Err(Error::InvalidInput("grid stride must be >= 1".into()));
    }
    if !(shrink_ratio >= T::zero() && shrink_ratio < real::<T>(0.5)) {
        return Err(Error::InvalidInput(format!(
            "shrink ratio {shrink_ratio} outside [0, 0.5)"
        )));
    }

    let grid_w = gt.image_w.div_ceil(grid_stride) as usize;
    let grid_h = gt.image_h.div_ceil(grid_stride) as usize;

    // Regions that collapse under shrinking keep only their ignored band.
    struct Prepared<T> {
        quad: Quad<T>,
        shrunk: Option<Quad<T>>,
        fitted: RotRect<T>,
        care: bool,
    }
    let prepared: Vec<Prepared<T>> = gt
        .regions
        .iter()
        .map(|r| Prepared {
            quad: r.quad,
            shrunk: shrink_quad(&r.quad, shrink_ratio).ok(),
            fitted: fit_rotated_rect(&r.quad),
            care: r.care,
        })
        .collect();

    let mut score = Grid::filled(grid_w, grid_h, Label::Negative);
    let mut geo = Grid::filled(grid_w, grid_h, [T::zero(); 5]);
    let mut attention = Grid::filled(grid_w, grid_h, Label::Negative);

    for row in 0..grid_h {
        for col in 0..grid_w {
            let c = cell_center::<T>(grid_stride, row, col);
            let in_no_care = prepared.iter().any(|p| !p.care && p.quad.contains(c));
            if in_no_care {
                score.set(row, col, Label::Ignored);
                attention.set(row, col, Label::Ignored);
                continue;
            }

            let positive_region = prepared
                .iter()
                .find(|p| p.care && p.shrunk.is_some_and(|s| s.contains(c)));
            if let Some(p) = positive_region {
                score.set(row, col, Label::Positive);
                let rbox = p.fitted.rbox_at(c.x, c.y);
                geo.set(
                    row,
                    col,
                    [
                        rbox.d_top.max(T::zero()),
                        rbox.d_bottom.max(T::zero()),
                        rbox.d_left.max(T::zero()),
                        rbox.d_right.max(T::zero()),
                        rbox.theta,
                    ],
                );
            } else if prepared.iter().any(|p| p.care && p.quad.contains(c)) {
                score.set(row, col, Label::Ignored);
            }

            if prepared.iter().any(|p| p.care && p.quad.contains(c)) {
                attention.set(row, col, Label::Positive);
            }
        }
    }

    Ok(PixelTargets {
        score,
        geo,
        attention,
        stride: grid_stride,
    })
}

/// Per-anchor labels and regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorTargets<T> {
    pub labels: Vec<AnchorLabel>,
    /// Offset targets aligned with `labels`; zero for non-positive anchors.
    pub offsets: Vec<[T; 8]>,
}

impl<T: Real> AnchorTargets<T> {
    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_positive()).count()
    }
}

/// Matches anchors to ground-truth regions by rectangle IoU.
///
/// An anchor is positive when its best-IoU region exceeds `pos_iou` and is a
/// care region; when the best match is a DO-NOT-CARE region the anchor is
/// excluded from training entirely. In addition, every care region claims
/// its single best-IoU anchor (ties to the lower index, already claimed
/// anchors skipped) so no region is left unmatched.
pub fn match_anchors<T: Real>(
    lattice: &AnchorLattice<T>,
    gt: &GroundTruth<T>,
    pos_iou: T,
) -> AnchorTargets<T> {
    let anchors = lattice.anchors();
    let gt_rects: Vec<_> = gt.regions.iter().map(|r| mbr(&r.quad)).collect();

    let mut labels = vec![AnchorLabel::Negative; anchors.len()];
    let mut offsets = vec![[T::zero(); 8]; anchors.len()];

    for (ai, anchor) in anchors.iter().enumerate() {
        let rect = anchor.rect();
        let mut best: Option<(usize, T)> = None;
        for (g, gr) in gt_rects.iter().enumerate() {
            let iou = aarect_iou(&rect, gr);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou > pos_iou {
                labels[ai] = if gt.regions[g].care {
                    AnchorLabel::Positive(g)
                } else {
                    AnchorLabel::Ignored
                };
            }
        }
    }

    // Bipartite step: each care region forces its best anchor positive.
    let mut claimed = vec![false; anchors.len()];
    for (g, region) in gt.regions.iter().enumerate() {
        if !region.care {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for (ai, anchor) in anchors.iter().enumerate() {
            if claimed[ai] {
                continue;
            }
            let iou = aarect_iou(&anchor.rect(), &gt_rects[g]);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((ai, iou));
            }
        }
        if let Some((ai, _)) = best {
            claimed[ai] = true;
            labels[ai] = AnchorLabel::Positive(g);
        }
    }

    for (ai, label) in labels.iter().enumerate() {
        if let AnchorLabel::Positive(g) = label {
            offsets[ai] = encode_offsets(&anchors[ai], &gt.regions[*g].quad);
        }
    }

    AnchorTargets { labels, offsets }
}

/// Encodes a quad as corner offsets relative to an anchor rectangle,
/// normalized by the anchor width (x) and height (y). Corners pair up in
/// canonical order: clockwise from the top-left-most vertex on both sides.
pub fn encode_offsets<T: Real>(anchor: &Anchor<T>, quad: &Quad<T>) -> [T; 8] {
    let a = anchor.corners();
    let q = quad.vertices();
    let mut out = [T::zero(); 8];
    for k in 0..4 {
        out[2 * k] = (q[k].x - a[k].x) / anchor.w;
        out[2 * k + 1] = (q[k].y - a[k].y) / anchor.h;
    }
    out
}

/// Inverse of [`encode_offsets`]; fails when the decoded ring is degenerate
/// or self-intersecting.
pub fn decode_offsets<T: Real>(anchor: &Anchor<T>, offsets: &[T; 8]) -> Result<Quad<T>> {
    let a = anchor.corners();
    let mut corners = [Point::new(T::zero(), T::zero()); 4];
    for k in 0..4 {
        corners[k] = Point::new(
            a[k].x + offsets[2 * k] * anchor.w,
            a[k].y + offsets[2 * k + 1] * anchor.h,
        );
    }
    Quad::new(corners)
}
