//! Training-loss values for both detector branches, with online hard
//! example mining.
//!
//! Everything here is plain value computation on prediction probabilities
//! and targets; there is no autodiff. Random sampling is driven by an
//! explicit caller-provided RNG so per-image loss evaluation stays
//! reproducible.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::RBoxPred;
use crate::targets::{AnchorTargets, Label};
use crate::{real, Real};

/// Probability clamp used by the cross-entropy and IoU-loss logarithms.
pub const EPS: f64 = 1e-7;

/// Balance weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Weight of the angle loss inside the box regression loss.
    pub lambda_theta: f64,
    /// Weight of the box regression loss inside the pixel-branch loss.
    pub alpha_p: f64,
    /// Weight of the offset regression loss inside the anchor-branch loss.
    pub alpha_a: f64,
    /// Weight of the pixel-branch loss inside the total loss.
    pub alpha_all: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_theta: 10.0,
            alpha_p: 1.0,
            alpha_a: 0.2,
            alpha_all: 3.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [
            ("lambda_theta", self.lambda_theta),
            ("alpha_p", self.alpha_p),
            ("alpha_a", self.alpha_a),
            ("alpha_all", self.alpha_all),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(crate::Error::InvalidInput(format!(
                    "loss weight {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Hard-example mining sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OhemPolicy {
    /// Hard negatives kept per image for pixel classification.
    pub pixel_hard_neg: usize,
    /// Random extra negatives kept per image for pixel classification.
    pub pixel_rand_neg: usize,
    /// Hard positives kept per image for pixel box regression.
    pub pixel_loc_hard_pos: usize,
    /// Random extra positives kept per image for pixel box regression.
    pub pixel_loc_rand_pos: usize,
    /// Negative:positive ratio for anchor classification.
    pub anchor_neg_pos_ratio: usize,
    /// Seed for the per-image sampling stream.
    pub rng_seed: u64,
}

impl Default for OhemPolicy {
    fn default() -> Self {
        Self {
            pixel_hard_neg: 512,
            pixel_rand_neg: 512,
            pixel_loc_hard_pos: 128,
            pixel_loc_rand_pos: 128,
            anchor_neg_pos_ratio: 3,
            rng_seed: 0,
        }
    }
}

impl OhemPolicy {
    pub fn validate(&self) -> crate::Result<()> {
        if self.anchor_neg_pos_ratio < 1 {
            return Err(crate::Error::InvalidInput(
                "anchor_neg_pos_ratio must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// How sums over a mined sample set are normalized.
///
/// The written-out loss definitions divide by the number of *positive*
/// elements in the selected set; a conventional mean over the whole set is
/// available behind this switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    #[default]
    PositiveCount,
    SelectedMean,
}

/// Binary cross entropy with the prediction clamped to `[EPS, 1 - EPS]`.
pub fn cross_entropy<T: Real>(p: T, positive: bool) -> T {
    let eps = real::<T>(EPS);
    let p = p.clamp(eps, T::one() - eps);
    if positive {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

/// Sorts `(index, loss)` candidates by loss descending (ties by ascending
/// index), keeps the first `n_hard`, then draws `n_rand` more uniformly
/// without replacement from the remainder in that same order.
fn select_hard_and_random<T: Real, R: Rng + ?Sized>(
    mut candidates: Vec<(usize, T)>,
    n_hard: usize,
    n_rand: usize,
    rng: &mut R,
) -> Vec<usize> {
    candidates.sort_unstable_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite losses")
            .then(a.0.cmp(&b.0))
    });
    let n_hard = n_hard.min(candidates.len());
    let mut selected: Vec<usize> = candidates[..n_hard].iter().map(|c| c.0).collect();
    let remaining = &candidates[n_hard..];
    let n_rand = n_rand.min(remaining.len());
    if n_rand > 0 {
        for k in rand::seq::index::sample(rng, remaining.len(), n_rand) {
            selected.push(remaining[k].0);
        }
    }
    selected
}

/// Selects the classification training set: every positive, the `n_hard_neg`
/// negatives with the highest cross entropy (highest predicted probability),
/// and `n_rand_neg` further negatives sampled without replacement. Ignored
/// elements are never selected. Returns ascending indices.
pub fn ohem_select<T: Real, R: Rng + ?Sized>(
    scores: &[T],
    labels: &[Label],
    n_hard_neg: usize,
    n_rand_neg: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let mut selected: Vec<usize> = Vec::new();
    let mut negatives: Vec<(usize, T)> = Vec::new();
    for (i, (&s, &l)) in scores.iter().zip(labels).enumerate() {
        match l {
            Label::Positive => selected.push(i),
            Label::Negative => negatives.push((i, cross_entropy(s, false))),
            Label::Ignored => {}
        }
    }
    selected.extend(select_hard_and_random(
        negatives, n_hard_neg, n_rand_neg, rng,
    ));
    selected.sort_unstable();
    selected
}

fn normalizer<T: Real>(norm: LossNorm, positives: usize, selected: usize) -> Option<T> {
    let n = match norm {
        LossNorm::PositiveCount => positives,
        LossNorm::SelectedMean => selected,
    };
    (n > 0).then(|| real::<T>(n as f64))
}

/// Pixel classification loss: the mined cross-entropy sums of the box-score
/// branch and the attention branch, each normalized by its positive count
/// (zero when a branch has no positives). The two branches draw their
/// random negatives independently from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn pixel_cls_loss<T: Real, R: Rng + ?Sized>(
    rbox_scores: &[T],
    rbox_labels: &[Label],
    heat_scores: &[T],
    heat_labels: &[Label],
    policy: &OhemPolicy,
    norm: LossNorm,
    rng: &mut R,
) -> T {
    let branch = |scores: &[T], labels: &[Label], rng: &mut R| -> T {
        let selected = ohem_select(
            scores,
            labels,
            policy.pixel_hard_neg,
            policy.pixel_rand_neg,
            rng,
        );
        let positives = selected
            .iter()
            .filter(|&&i| labels[i] == Label::Positive)
            .count();
        let Some(denom) = normalizer::<T>(norm, positives, selected.len()) else {
            return T::zero();
        };
        let sum = selected.iter().fold(T::zero(), |acc, &i| {
            acc + cross_entropy(scores[i], labels[i] == Label::Positive)
        });
        sum / denom
    };
    branch(rbox_scores, rbox_labels, rng) + branch(heat_scores, heat_labels, rng)
}

/// Negative log of the rotated-box IoU computed from shared-pixel edge
/// distances; an IoU of zero is capped at `-ln(EPS)`.
pub fn iou_loss<T: Real>(r: &RBoxPred<T>, r_star: &RBoxPred<T>) -> T {
    let w_inter = r.d_left.min(r_star.d_left) + r.d_right.min(r_star.d_right);
    let h_inter = r.d_top.min(r_star.d_top) + r.d_bottom.min(r_star.d_bottom);
    let inter = w_inter.max(T::zero()) * h_inter.max(T::zero());
    let area = (r.d_top + r.d_bottom) * (r.d_left + r.d_right);
    let area_star = (r_star.d_top + r_star.d_bottom) * (r_star.d_left + r_star.d_right);
    let union = area + area_star - inter;
    let iou = if union <= T::zero() {
        T::zero()
    } else {
        (inter / union).clamp(T::zero(), T::one())
    };
    -iou.max(real::<T>(EPS)).ln()
}

/// `1 - cos(theta - theta_star)`, in `[0, 2]`.
pub fn angle_loss<T: Real>(theta: T, theta_star: T) -> T {
    T::one() - (theta - theta_star).cos()
}

/// Pixel box-regression loss over mined positive cells.
///
/// `positives` indexes the positive cells within `preds`/`targets`. The
/// hardest `pixel_loc_hard_pos` cells (by combined IoU + angle loss) plus
/// `pixel_loc_rand_pos` random further cells are kept; the result is the
/// mean combined loss over the kept cells, zero when there are none.
pub fn pixel_loc_loss<T: Real, R: Rng + ?Sized>(
    preds: &[RBoxPred<T>],
    targets: &[RBoxPred<T>],
    positives: &[usize],
    policy: &OhemPolicy,
    weights: &LossWeights,
    rng: &mut R,
) -> T {
    assert_eq!(preds.len(), targets.len(), "preds/targets length mismatch");
    if positives.is_empty() {
        return T::zero();
    }
    let lambda = real::<T>(weights.lambda_theta);
    let per_cell = |i: usize| -> T {
        iou_loss(&preds[i], &targets[i]) + lambda * angle_loss(preds[i].theta, targets[i].theta)
    };
    let candidates: Vec<(usize, T)> = positives.iter().map(|&i| (i, per_cell(i))).collect();
    let selected = select_hard_and_random(
        candidates,
        policy.pixel_loc_hard_pos,
        policy.pixel_loc_rand_pos,
        rng,
    );
    let sum = selected
        .iter()
        .fold(T::zero(), |acc, &i| acc + per_cell(i));
    sum / real::<T>(selected.len() as f64)
}

/// Smooth L1: `0.5 x^2` inside the unit interval, `|x| - 0.5` outside.
pub fn smooth_l1<T: Real>(x: T) -> T {
    let half = real::<T>(0.5);
    if x.abs() < T::one() {
        half * x * x
    } else {
        x.abs() - half
    }
}

/// Anchor-branch classification and offset-regression losses.
///
/// The mined set is every positive anchor plus `anchor_neg_pos_ratio` times
/// as many hardest negatives. Both sums are normalized by the positive
/// count; with no positives both losses are zero.
pub fn anchor_losses<T: Real, R: Rng + ?Sized>(
    scores: &[T],
    offset_preds: &[[T; 8]],
    targets: &AnchorTargets<T>,
    policy: &OhemPolicy,
    norm: LossNorm,
    rng: &mut R,
) -> (T, T) {
    assert_eq!(scores.len(), targets.labels.len(), "scores length mismatch");
    assert_eq!(
        offset_preds.len(),
        targets.labels.len(),
        "offsets length mismatch"
    );

    let positives: Vec<usize> = (0..targets.labels.len())
        .filter(|&i| targets.labels[i].is_positive())
        .collect();
    if positives.is_empty() {
        return (T::zero(), T::zero());
    }

    let negatives: Vec<(usize, T)> = (0..targets.labels.len())
        .filter(|&i| targets.labels[i].as_label() == Label::Negative)
        .map(|i| (i, cross_entropy(scores[i], false)))
        .collect();
    let n_hard = policy.anchor_neg_pos_ratio * positives.len();
    let hard_negs = select_hard_and_random(negatives, n_hard, 0, rng);

    let selected_len = positives.len() + hard_negs.len();
    let denom = normalizer::<T>(norm, positives.len(), selected_len).expect("positives exist");

    let mut cls = T::zero();
    for &i in &positives {
        cls += cross_entropy(scores[i], true);
    }
    for &i in &hard_negs {
        cls += cross_entropy(scores[i], false);
    }
    cls /= denom;

    // The offset sum only ranges over positives, so both normalizations
    // divide by the positive count.
    let loc_denom = real::<T>(positives.len() as f64);
    let mut loc = T::zero();
    for &i in &positives {
        for (&pred, &target) in offset_preds[i].iter().zip(&targets.offsets[i]) {
            loc += smooth_l1(pred - target);
        }
    }
    loc /= loc_denom;

    (cls, loc)
}

/// Combines the four loss components into the total training loss.
pub fn total_loss<T: Real>(
    pixel_cls: T,
    pixel_loc: T,
    anchor_cls: T,
    anchor_loc: T,
    weights: &LossWeights,
) -> T {
    let alpha_all = real::<T>(weights.alpha_all);
    let alpha_p = real::<T>(weights.alpha_p);
    let alpha_a = real::<T>(weights.alpha_a);
    alpha_all * (pixel_cls + alpha_p * pixel_loc) + (anchor_cls + alpha_a * anchor_loc)
}
