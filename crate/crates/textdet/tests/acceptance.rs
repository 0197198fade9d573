//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them).

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use textdet::anchors::{build_lattice, count_anchors, trim_for_inference, APLConfig, NUM_MAPS};
use textdet::geometry::{
    fit_rotated_rect, mbr, quad_iou, rbox_to_quad, Point, Quad, RBoxPred, RotRect,
};
use textdet::grid::Grid;
use textdet::losses::{iou_loss, ohem_select, smooth_l1, total_loss, LossWeights};
use textdet::postprocess::{
    cascaded_nms_with_stats, fusion_nms_pipeline, Detection, FusionConfig, Source,
};
use textdet::targets::{make_pixel_targets, match_anchors, GroundTruth, GtRegion, Label};
use textdet::toolkit::{evaluate, parse_icdar_gt, Tensor};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random convex quad: four angularly ordered points on a random ellipse.
fn random_quad(r: &mut ChaCha8Rng, cx: f64, cy: f64, max_radius: f64) -> Quad<f64> {
    let a = r.random_range(0.3 * max_radius..max_radius);
    let b = r.random_range(0.3 * max_radius..max_radius);
    let phi = r.random_range(0.0..std::f64::consts::PI);
    let start = r.random_range(0.0..std::f64::consts::TAU);
    let mut t = start;
    let mut pts = [Point::new(0.0, 0.0); 4];
    let (sp, cp) = phi.sin_cos();
    for p in &mut pts {
        let (s, c) = t.sin_cos();
        let (ex, ey) = (a * c, b * s);
        *p = Point::new(cx + ex * cp - ey * sp, cy + ex * sp + ey * cp);
        t += r.random_range(0.4..1.6);
    }
    Quad::new(pts).unwrap()
}

fn random_rect_quad(r: &mut ChaCha8Rng, bounds: f64) -> Quad<f64> {
    let w = r.random_range(16.0..60.0);
    let h = r.random_range(14.0..48.0);
    let cx = r.random_range(0.5 * w + 2.0..bounds - 0.5 * w - 2.0);
    let cy = r.random_range(0.5 * h + 2.0..bounds - 0.5 * h - 2.0);
    let theta = r.random_range(-0.6..0.6);
    RotRect::new(Point::new(cx, cy), w, h, theta)
        .unwrap()
        .to_quad()
        .unwrap()
}

/// Independent containment test for the Monte Carlo oracle: a point is in a
/// clockwise convex ring when it is on the non-negative side of every edge.
fn mc_contains(q: &Quad<f64>, p: Point<f64>) -> bool {
    let v = q.vertices();
    (0..4).all(|i| {
        let a = v[i];
        let b = v[(i + 1) % 4];
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
    })
}

#[test]
fn criterion_01_quad_iou_against_monte_carlo() {
    let started = Instant::now();
    let mut r = rng(0xA1);
    const SAMPLES: usize = 100_000;

    for pair in 0..200 {
        let a = random_quad(&mut r, 0.0, 0.0, 40.0);
        let (bx, by) = (r.random_range(-25.0..25.0), r.random_range(-25.0..25.0));
        let b = random_quad(&mut r, bx, by, 40.0);

        let ra = mbr(&a);
        let rb = mbr(&b);
        let xmin = ra.xmin.min(rb.xmin);
        let xmax = ra.xmax.max(rb.xmax);
        let ymin = ra.ymin.min(rb.ymin);
        let ymax = ra.ymax.max(rb.ymax);
        let box_area = (xmax - xmin) * (ymax - ymin);

        let mut hits = 0usize;
        for _ in 0..SAMPLES {
            let p = Point::new(r.random_range(xmin..xmax), r.random_range(ymin..ymax));
            if mc_contains(&a, p) && mc_contains(&b, p) {
                hits += 1;
            }
        }
        let inter = hits as f64 / SAMPLES as f64 * box_area;
        let union = a.area() + b.area() - inter;
        let estimate = if union <= 0.0 { 0.0 } else { inter / union };

        let exact = quad_iou(&a, &b);
        assert!(
            (exact - estimate).abs() < 0.01,
            "pair {pair}: exact {exact} vs Monte Carlo {estimate}"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "acceptance 01 (quad_iou vs 100k-sample Monte Carlo, 200 pairs, {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

fn random_config(r: &mut ChaCha8Rng) -> APLConfig {
    let strides = [4u32, 8, 16, 32, 64];
    let mut cfg = APLConfig::default();
    for m in 0..NUM_MAPS {
        cfg.strides[m] = *strides.choose(r).unwrap();
        cfg.base_scales[m] = cfg.strides[m] as f64 * r.random_range(1.0..2.0);
        cfg.medium_densities[m] = r.random_range(1..=4);
        cfg.long_anchor_maps[m] = m != 0 && r.random_bool(0.7);
        cfg.long_densities[m] = r.random_range(1..=6);
    }
    let trim_list = |list: &mut Vec<f64>, r: &mut ChaCha8Rng| {
        let keep = r.random_range(1..=list.len());
        list.truncate(keep);
    };
    trim_list(&mut cfg.medium_horizontal_ratios, r);
    trim_list(&mut cfg.medium_vertical_ratios, r);
    trim_list(&mut cfg.long_horizontal_ratios, r);
    trim_list(&mut cfg.long_vertical_ratios, r);
    cfg
}

#[test]
fn criterion_02_anchor_counts_match_enumeration() {
    let mut r = rng(0xA2);
    for trial in 0..20 {
        let cfg = random_config(&mut r);
        let (w, h) = (r.random_range(32..300), r.random_range(32..300));
        let lattice = build_lattice::<f64>(&cfg, w, h).unwrap();
        let counts = count_anchors(&cfg, w, h).unwrap();
        assert_eq!(&counts, lattice.per_map_counts(), "trial {trial} ({w}x{h})");
        assert_eq!(counts.iter().sum::<usize>(), lattice.len());
    }

    let cfg = APLConfig::default();
    for (w, h) in [(256u32, 256u32), (1728, 960)] {
        let lattice = build_lattice::<f64>(&cfg, w, h).unwrap();
        assert_eq!(&count_anchors(&cfg, w, h).unwrap(), lattice.per_map_counts());
    }
    let counts = count_anchors(&cfg, 256, 256).unwrap();
    assert_eq!(counts[0], 36_864);
    println!("acceptance 02 (count_anchors vs enumeration, 20 random + defaults): PASS");
}

#[test]
fn criterion_03_trimming_census() {
    let cfg = APLConfig::default();
    let lattice = build_lattice::<f64>(&cfg, 256, 256).unwrap();
    let trimmed = trim_for_inference(&lattice);

    let mut census_map1 = 0usize;
    let mut census_long = [0usize; NUM_MAPS];
    for a in trimmed.anchors() {
        if a.map_index == 1 {
            census_map1 += 1;
            assert!(!a.category.is_long(), "defaults place no long anchors on map 1");
        } else {
            assert!(a.category.is_long(), "non-long anchor on map {}", a.map_index);
            census_long[a.map_index - 1] += 1;
        }
    }
    assert_eq!(census_map1, lattice.per_map_counts()[0]);
    for m in 1..NUM_MAPS {
        let want = lattice
            .anchors()
            .iter()
            .filter(|a| a.map_index == m + 1 && a.category.is_long())
            .count();
        assert_eq!(census_long[m], want);
    }

    let again = trim_for_inference(&trimmed);
    assert_eq!(again, trimmed);
    println!("acceptance 03 (trimming census + idempotence): PASS");
}

#[test]
fn criterion_04_offset_roundtrip() {
    let mut r = rng(0xA4);
    let lattice = build_lattice::<f64>(&APLConfig::default(), 256, 256).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let anchor = lattice.anchors()[r.random_range(0..lattice.len())];
        let quad = random_rect_quad(&mut r, 256.0);
        let offsets = textdet::targets::encode_offsets(&anchor, &quad);
        let decoded = textdet::targets::decode_offsets(&anchor, &offsets).unwrap();
        for (d, w) in decoded.vertices().iter().zip(quad.vertices()) {
            worst = worst.max((d.x - w.x).abs()).max((d.y - w.y).abs());
        }
    }
    assert!(worst < 1e-4, "max coordinate error {worst}");
    println!("acceptance 04 (offset roundtrip, 1000 pairs, max err {worst:.2e}): PASS");
}

#[test]
fn criterion_05_pixel_target_self_consistency() {
    let mut r = rng(0xA5);
    for scene in 1..=10usize {
        let regions: Vec<GtRegion<f64>> = (0..scene)
            .map(|_| GtRegion {
                quad: random_rect_quad(&mut r, 256.0),
                care: true,
            })
            .collect();
        let gt = GroundTruth::new(regions, 256, 256);
        let fitted: Vec<Quad<f64>> = gt
            .regions
            .iter()
            .map(|g| fit_rotated_rect(&g.quad).to_quad().unwrap())
            .collect();

        let targets = make_pixel_targets(&gt, 4, 0.3).unwrap();
        let mut positives = 0usize;
        for (row, col, label) in targets.score.iter_cells() {
            if *label != Label::Positive {
                continue;
            }
            positives += 1;
            let g = targets.geo.get(row, col);
            let c = targets.cell_center(row, col);
            let decoded =
                rbox_to_quad(c.x, c.y, &RBoxPred::new(g[0], g[1], g[2], g[3], g[4])).unwrap();
            let best = fitted
                .iter()
                .map(|f| quad_iou(&decoded, f))
                .fold(0.0f64, f64::max);
            assert!(best >= 0.99, "scene {scene}: cell ({row},{col}) IoU {best}");
        }
        assert!(positives > 0, "scene {scene} produced no positive cells");
    }
    println!("acceptance 05 (pixel geo targets decode to fitted rects, IoU >= 0.99): PASS");
}

#[test]
fn criterion_06_loss_fixtures() {
    let a = RBoxPred::<f64>::new(1.0, 1.0, 1.0, 1.0, 0.0);
    let b = RBoxPred::<f64>::new(2.0, 2.0, 2.0, 2.0, 0.0);
    assert!((iou_loss(&a, &b) - 4.0f64.ln()).abs() < 1e-6);

    assert_eq!(smooth_l1(0.5f64), 0.125);

    let weights = LossWeights::default();
    assert_eq!(
        (
            weights.lambda_theta,
            weights.alpha_p,
            weights.alpha_a,
            weights.alpha_all
        ),
        (10.0, 1.0, 0.2, 3.0)
    );
    assert_eq!(total_loss(1.0, 1.0, 1.0, 1.0, &weights), 7.2);
    println!("acceptance 06 (analytic loss fixtures: ln 4, 0.125, 7.2): PASS");
}

#[test]
fn criterion_07_ohem_determinism_and_oracle() {
    for trial in 0..5u64 {
        let mut r = rng(0xA7 + trial);
        let n = 2000;
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let labels: Vec<Label> = (0..n)
            .map(|_| match r.random_range(0..20) {
                0 => Label::Positive,
                1 => Label::Ignored,
                _ => Label::Negative,
            })
            .collect();

        // Identical seeds must give identical selections.
        let first = ohem_select(&scores, &labels, 512, 512, &mut rng(900 + trial));
        let second = ohem_select(&scores, &labels, 512, 512, &mut rng(900 + trial));
        assert_eq!(first, second);

        // Full-sort oracle; hardest negative = highest score.
        let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Negative).collect();
        neg.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap().then(x.cmp(&y)));
        let n_hard = 512.min(neg.len());
        let mut want: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Positive).collect();
        want.extend(&neg[..n_hard]);
        let rest = &neg[n_hard..];
        let mut oracle_rng = rng(900 + trial);
        for k in rand::seq::index::sample(&mut oracle_rng, rest.len(), 512.min(rest.len())) {
            want.push(rest[k]);
        }
        want.sort_unstable();
        assert_eq!(first, want, "pixel policy, trial {trial}");

        // Anchor policy: positives + 3x hardest negatives, no random part.
        let npos = labels.iter().filter(|&&l| l == Label::Positive).count();
        let got = ohem_select(&scores, &labels, 3 * npos, 0, &mut rng(901 + trial));
        let mut want: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Positive).collect();
        want.extend(&neg[..(3 * npos).min(neg.len())]);
        want.sort_unstable();
        assert_eq!(got, want, "anchor policy, trial {trial}");
    }
    println!("acceptance 07 (OHEM determinism + full-sort oracle, both policies): PASS");
}

/// Clustered candidate sets so suppression has work to do.
fn random_candidates(r: &mut ChaCha8Rng, n: usize) -> Vec<Detection<f64>> {
    let clusters: Vec<(f64, f64)> = (0..40)
        .map(|_| (r.random_range(50.0..950.0), r.random_range(50.0..950.0)))
        .collect();
    (0..n)
        .map(|_| {
            let &(cx, cy) = clusters.choose(r).unwrap();
            let w = r.random_range(20.0..80.0);
            let h = r.random_range(15.0..60.0);
            let x = cx + r.random_range(-15.0..15.0) - w / 2.0;
            let y = cy + r.random_range(-15.0..15.0) - h / 2.0;
            let theta = r.random_range(-0.4..0.4);
            let quad = RotRect::new(Point::new(x + w / 2.0, y + h / 2.0), w, h, theta)
                .unwrap()
                .to_quad()
                .unwrap();
            let source = if r.random_bool(0.3) {
                Source::Anchor
            } else {
                Source::Pixel
            };
            let score = match source {
                Source::Anchor => r.random_range(1.0..2.0),
                Source::Pixel => r.random_range(0.0..1.0),
            };
            Detection {
                quad,
                score,
                source,
            }
        })
        .collect()
}

/// Independent single-stage greedy quad NMS with the same ranking contract.
fn single_stage_quad_nms(
    dets: &[Detection<f64>],
    iou_thresh: f64,
) -> (Vec<Detection<f64>>, usize) {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let rank = |s: Source| match s {
            Source::Anchor => 0u8,
            Source::Pixel => 1,
        };
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(rank(dets[a].source).cmp(&rank(dets[b].source)))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut evals = 0usize;
    for i in order {
        let mut suppressed = false;
        for &k in &kept {
            evals += 1;
            if quad_iou(&dets[k].quad, &dets[i].quad) > iou_thresh {
                suppressed = true;
                break;
            }
        }
        if !suppressed {
            kept.push(i);
        }
    }
    (kept.into_iter().map(|i| dets[i]).collect(), evals)
}

#[test]
fn criterion_08_cascade_with_open_stage1_equals_single_stage() {
    let mut r = rng(0xA8);
    let cfg = FusionConfig {
        mbr_nms_iou: 1.0,
        ..FusionConfig::default()
    };
    for trial in 0..100 {
        let n = r.random_range(1..=1000);
        let dets = random_candidates(&mut r, n);
        let (got, _) = cascaded_nms_with_stats(dets.clone(), &cfg);
        let (want, _) = single_stage_quad_nms(&dets, cfg.quad_nms_iou);
        assert_eq!(got, want, "trial {trial} with {n} candidates");
    }
    println!("acceptance 08 (stage-1 threshold 1.0 == single-stage quad NMS, 100 sets): PASS");
}

#[test]
fn criterion_09_cascade_reduces_quad_iou_evaluations() {
    let mut r = rng(0xA9);
    let cfg = FusionConfig::default();
    let mut wins = 0usize;
    for _ in 0..100 {
        let dets = random_candidates(&mut r, 5000);
        let (_, stats) = cascaded_nms_with_stats(dets.clone(), &cfg);
        let (_, single_evals) = single_stage_quad_nms(&dets, cfg.quad_nms_iou);
        if stats.quad_iou_evals < single_evals {
            wins += 1;
        }
    }
    assert!(wins >= 95, "cascade cheaper in only {wins}/100 trials");
    println!(
        "acceptance 09 (cascade quad-IoU evals < single-stage in {wins}/100 trials): PASS"
    );
}

#[test]
fn criterion_10_closed_loop_pipeline() {
    let apl = APLConfig::default();
    let fusion = FusionConfig::default();
    let lattice = build_lattice::<f64>(&apl, 256, 256).unwrap();

    // Scene: two medium rotated rects (pixel territory), one small square
    // sitting exactly on a map-1 anchor, one long thin box equal to a long
    // anchor (anchor territory; both are below the pixel size filter).
    let small_anchor = lattice
        .anchors()
        .iter()
        .find(|a| a.map_index == 1 && a.cell == (10, 10))
        .copied()
        .unwrap();
    let long_anchor = lattice
        .anchors()
        .iter()
        .find(|a| a.map_index == 2 && a.category.is_long() && a.cell == (12, 6))
        .copied()
        .unwrap();
    let medium1 = RotRect::new(Point::new(70.0, 190.0), 50.0, 24.0, 0.3)
        .unwrap()
        .to_quad()
        .unwrap();
    let medium2 = RotRect::new(Point::new(190.0, 70.0), 44.0, 30.0, -0.2)
        .unwrap()
        .to_quad()
        .unwrap();

    let gt = GroundTruth::new(
        vec![
            GtRegion {
                quad: small_anchor.quad(),
                care: true,
            },
            GtRegion {
                quad: long_anchor.quad(),
                care: true,
            },
            GtRegion {
                quad: medium1,
                care: true,
            },
            GtRegion {
                quad: medium2,
                care: true,
            },
        ],
        256,
        256,
    );

    // Perfect prediction tensors straight from the targets.
    let pixel_targets = make_pixel_targets(&gt, 4, 0.3).unwrap();
    let anchor_targets = match_anchors(&lattice, &gt, 0.5);

    let score_data: Vec<f64> = pixel_targets
        .score
        .as_slice()
        .iter()
        .map(|&l| if l == Label::Positive { 1.0 } else { 0.0 })
        .collect();
    let score = Grid::from_vec(
        pixel_targets.score.width(),
        pixel_targets.score.height(),
        score_data,
    )
    .unwrap();

    let mut anchor_scores = vec![0.0f64; lattice.len()];
    let mut anchor_offsets = vec![0.0f64; 8 * lattice.len()];
    for (i, label) in anchor_targets.labels.iter().enumerate() {
        if label.is_positive() {
            anchor_scores[i] = 1.0;
            anchor_offsets[8 * i..8 * (i + 1)].copy_from_slice(&anchor_targets.offsets[i]);
        }
    }

    let (dets, diag) = fusion_nms_pipeline(
        &score,
        &pixel_targets.geo,
        4,
        &lattice,
        &anchor_scores,
        &anchor_offsets,
        &fusion,
    )
    .unwrap();

    let metrics = evaluate(&dets, &gt, 0.5);
    assert_eq!(
        (metrics.precision, metrics.recall, metrics.f_measure),
        (1.0, 1.0, 1.0),
        "dets: {dets:?}, diagnostics: {diag:?}"
    );

    // The +1.0 boost puts every anchor-source detection ahead of every
    // pixel-source detection.
    assert!(dets.iter().any(|d| d.source == Source::Anchor));
    assert!(dets.iter().any(|d| d.source == Source::Pixel));
    for a in dets.iter().filter(|d| d.source == Source::Anchor) {
        assert!(a.score > 1.0);
        for p in dets.iter().filter(|d| d.source == Source::Pixel) {
            assert!(a.score > p.score);
        }
    }
    println!("acceptance 10 (closed-loop pipeline: P = R = F = 1, anchors outrank): PASS");
}

#[test]
fn criterion_11_io_roundtrips_and_no_care_recall() {
    // Tensor container: bit-exact roundtrip.
    let mut r = rng(0xAB);
    let data: Vec<f32> = (0..4 * 7 * 3).map(|_| r.random::<f32>()).collect();
    let tensor = Tensor::new(vec![4, 7, 3], data).unwrap();
    let mut bytes = Vec::new();
    tensor.write_to(&mut bytes).unwrap();
    let back = Tensor::read_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(back.dims(), tensor.dims());
    for (a, b) in tensor.data().iter().zip(back.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // "###" regions never enter the recall denominator.
    let text = "10,10,60,10,60,30,10,30,word\n100,10,150,10,150,30,100,30,###\n";
    let gt = parse_icdar_gt::<f64>(text, 256, 256).unwrap();
    assert_eq!(gt.care_count(), 1);
    let dets = vec![Detection {
        quad: gt.regions[0].quad,
        score: 0.9,
        source: Source::Pixel,
    }];
    let m = evaluate(&dets, &gt, 0.5);
    assert_eq!((m.recall, m.care_ground_truth), (1.0, 1));

    // Byte-reproducibility of full CLI runs is exercised in the CLI crate's
    // own acceptance test, which drives the installed binary twice.
    println!("acceptance 11 (tensor bit-exact roundtrip + no-care recall exclusion): PASS");
}
