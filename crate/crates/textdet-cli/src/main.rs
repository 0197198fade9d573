//! `textdet` command line: anchor lattice inspection, training-target
//! generation, loss evaluation, detection decoding with fusion NMS,
//! precision/recall scoring, SVG rendering, and an NMS benchmark.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use textdet::anchors::{build_lattice, count_anchors, trim_for_inference, AnchorLattice};
use textdet::geometry::{Point, RBoxPred, RotRect};
use textdet::grid::Grid;
use textdet::losses::{anchor_losses, pixel_cls_loss, pixel_loc_loss, total_loss};
use textdet::postprocess::{
    cascaded_nms_with_stats, fusion_nms_pipeline, Detection, Source,
};
use textdet::targets::{
    make_pixel_targets, match_anchors, AnchorLabel, AnchorTargets, Label, PixelTargets,
};
use textdet::toolkit::{
    aggregate_metrics, detections_to_string, evaluate, parse_detections, parse_icdar_gt,
    render_svg, RunConfig, Tensor,
};

#[derive(Parser)]
#[command(name = "textdet", version, about = "Oriented scene-text detection toolkit")]
struct Cli {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for deterministic sampling (overrides the config's ohem seed).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output file or directory; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Input image size, e.g. 960x1728 (overrides the config).
    #[arg(long, global = true, value_name = "WxH", value_parser = parse_size)]
    input_size: Option<(u32, u32)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the anchor lattice and report per-map counts.
    GenAnchors,
    /// Generate training-target tensors from an ICDAR ground-truth file.
    MakeTargets {
        /// Ground-truth text file (x1,y1,...,y4,transcription per line).
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
    },
    /// Compute all loss values from prediction and target tensors.
    Loss {
        /// Directory produced by make-targets.
        #[arg(long, value_name = "DIR")]
        targets: PathBuf,
        /// Pixel-branch box score predictions, [H,W].
        #[arg(long, value_name = "FILE")]
        rbox_score: PathBuf,
        /// Pixel-branch geometry predictions, [5,H,W].
        #[arg(long, value_name = "FILE")]
        geo: PathBuf,
        /// Attention heat-map predictions, [H,W].
        #[arg(long, value_name = "FILE")]
        heat_score: PathBuf,
        /// Anchor score predictions, [N].
        #[arg(long, value_name = "FILE")]
        anchor_score: PathBuf,
        /// Anchor offset predictions, [N,8].
        #[arg(long, value_name = "FILE")]
        anchor_offsets: PathBuf,
    },
    /// Decode and size-filter the pixel branch without NMS.
    Decode {
        /// Pixel score tensor, [H,W].
        #[arg(long, value_name = "FILE")]
        score: PathBuf,
        /// Pixel geometry tensor, [5,H,W].
        #[arg(long, value_name = "FILE")]
        geo: PathBuf,
    },
    /// Run the full fusion-NMS pipeline over both branches.
    FuseNms {
        #[arg(long, value_name = "FILE")]
        score: PathBuf,
        #[arg(long, value_name = "FILE")]
        geo: PathBuf,
        /// Anchor scores over the full lattice, [N].
        #[arg(long, value_name = "FILE")]
        anchor_score: PathBuf,
        /// Anchor offsets over the full lattice, [N,8].
        #[arg(long, value_name = "FILE")]
        anchor_offsets: PathBuf,
    },
    /// Score detections against ground truth (file or directory pairs).
    Eval {
        /// Detection file, or directory of per-image detection files.
        #[arg(long, value_name = "PATH")]
        dets: PathBuf,
        /// Ground-truth file, or directory matched by file stem.
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        /// Matching IoU threshold.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Render detections (and optional ground truth) as SVG.
    VizSvg {
        #[arg(long, value_name = "FILE")]
        dets: PathBuf,
        #[arg(long, value_name = "FILE")]
        gt: Option<PathBuf>,
    },
    /// Compare cascaded and single-stage NMS on random candidates.
    BenchNms {
        #[arg(long, default_value_t = 5000)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("input size must be positive".into());
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {path:?}"))?,
        None => RunConfig::default(),
    };
    if let Some((w, h)) = cli.input_size {
        cfg.input_width = w;
        cfg.input_height = h;
    }
    let seed = cli.seed.unwrap_or(cfg.ohem.rng_seed);

    match &cli.command {
        Command::GenAnchors => gen_anchors(&cli, &cfg),
        Command::MakeTargets { gt } => make_targets(&cli, &cfg, gt),
        Command::Loss {
            targets,
            rbox_score,
            geo,
            heat_score,
            anchor_score,
            anchor_offsets,
        } => loss(
            &cli,
            &cfg,
            seed,
            targets,
            rbox_score,
            geo,
            heat_score,
            anchor_score,
            anchor_offsets,
        ),
        Command::Decode { score, geo } => decode(&cli, &cfg, score, geo),
        Command::FuseNms {
            score,
            geo,
            anchor_score,
            anchor_offsets,
        } => fuse_nms(&cli, &cfg, score, geo, anchor_score, anchor_offsets),
        Command::Eval { dets, gt, iou } => eval(&cli, &cfg, dets, gt, *iou),
        Command::VizSvg { dets, gt } => viz_svg(&cli, &cfg, dets, gt.as_deref()),
        Command::BenchNms { count, trials } => bench_nms(&cli, &cfg, seed, *count, *trials),
    }
}

/// Writes through a temp file and renames so partial files never appear.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp.partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_anchors(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let lattice = build_lattice::<f64>(&cfg.apl, cfg.input_width, cfg.input_height)?;
    let counts = count_anchors(&cfg.apl, cfg.input_width, cfg.input_height)?;
    anyhow::ensure!(&counts == lattice.per_map_counts(), "count/enumeration mismatch");
    let trimmed = trim_for_inference(&lattice);

    let stats = serde_json::json!({
        "input_width": cfg.input_width,
        "input_height": cfg.input_height,
        "per_map": counts,
        "total": lattice.len(),
        "trimmed_total": trimmed.len(),
        "trimmed_per_map": trimmed.per_map_counts(),
    });
    println!("{}", serde_json::to_string_pretty(&stats)?);

    // Optional dump of the lattice as a detection-format file.
    if let Some(out) = &cli.out {
        let dets: Vec<Detection<f64>> = lattice
            .anchors()
            .iter()
            .map(|a| Detection {
                quad: a.quad(),
                score: 1.0,
                source: Source::Anchor,
            })
            .collect();
        write_atomic(out, detections_to_string(&dets).as_bytes())?;
    }
    Ok(())
}

const SCORE_POSITIVE: f32 = 1.0;
const SCORE_NEGATIVE: f32 = 0.0;
const SCORE_IGNORED: f32 = -1.0;
const ANCHOR_NEGATIVE: f32 = -1.0;
const ANCHOR_IGNORED: f32 = -2.0;

fn label_to_f32(label: Label) -> f32 {
    match label {
        Label::Positive => SCORE_POSITIVE,
        Label::Negative => SCORE_NEGATIVE,
        Label::Ignored => SCORE_IGNORED,
    }
}

fn f32_to_label(v: f32) -> Label {
    if v == SCORE_POSITIVE {
        Label::Positive
    } else if v == SCORE_IGNORED {
        Label::Ignored
    } else {
        Label::Negative
    }
}

fn label_grid_tensor(grid: &Grid<Label>) -> Result<Tensor> {
    let data: Vec<f32> = grid.as_slice().iter().map(|&l| label_to_f32(l)).collect();
    Ok(Tensor::new(
        vec![grid.height() as u32, grid.width() as u32],
        data,
    )?)
}

fn geo_tensor(geo: &Grid<[f64; 5]>) -> Result<Tensor> {
    let (w, h) = (geo.width(), geo.height());
    let mut data = vec![0f32; 5 * w * h];
    for (row, col, cell) in geo.iter_cells() {
        for (ch, &v) in cell.iter().enumerate() {
            data[ch * w * h + row * w + col] = v as f32;
        }
    }
    Ok(Tensor::new(vec![5, h as u32, w as u32], data)?)
}

fn tensor_to_grid(t: &Tensor) -> Result<Grid<f64>> {
    let [h, w] = t.dims() else {
        bail!("expected a rank-2 [H,W] tensor, got dims {:?}", t.dims());
    };
    Ok(Grid::from_vec(*w as usize, *h as usize, t.to_f64())?)
}

fn tensor_to_geo(t: &Tensor) -> Result<Grid<[f64; 5]>> {
    let [c, h, w] = t.dims() else {
        bail!("expected a rank-3 [5,H,W] tensor, got dims {:?}", t.dims());
    };
    anyhow::ensure!(*c == 5, "geometry tensor must have 5 channels, got {c}");
    let (w, h) = (*w as usize, *h as usize);
    let data = t.data();
    let mut grid = Grid::filled(w, h, [0f64; 5]);
    for row in 0..h {
        for col in 0..w {
            let mut cell = [0f64; 5];
            for (ch, v) in cell.iter_mut().enumerate() {
                *v = data[ch * w * h + row * w + col] as f64;
            }
            grid.set(row, col, cell);
        }
    }
    Ok(grid)
}

fn make_targets(cli: &Cli, cfg: &RunConfig, gt_path: &Path) -> Result<()> {
    let out_dir = cli
        .out
        .clone()
        .ok_or_else(|| anyhow!("make-targets needs --out DIR"))?;
    fs::create_dir_all(&out_dir)?;

    let text = fs::read_to_string(gt_path).with_context(|| format!("reading {gt_path:?}"))?;
    let gt = parse_icdar_gt::<f64>(&text, cfg.input_width, cfg.input_height)?;

    let pixel: PixelTargets<f64> = make_pixel_targets(&gt, cfg.pixel_stride, cfg.shrink_ratio)?;
    let lattice = build_lattice::<f64>(&cfg.apl, cfg.input_width, cfg.input_height)?;
    let anchors = match_anchors(&lattice, &gt, cfg.match_iou);

    let save = |name: &str, tensor: &Tensor| -> Result<()> {
        let path = out_dir.join(name);
        let mut bytes = Vec::new();
        tensor.write_to(&mut bytes)?;
        write_atomic(&path, &bytes)
    };

    save("score.pxat", &label_grid_tensor(&pixel.score)?)?;
    save("geo.pxat", &geo_tensor(&pixel.geo)?)?;
    save("attention.pxat", &label_grid_tensor(&pixel.attention)?)?;

    let labels: Vec<f32> = anchors
        .labels
        .iter()
        .map(|l| match l {
            AnchorLabel::Positive(g) => *g as f32,
            AnchorLabel::Negative => ANCHOR_NEGATIVE,
            AnchorLabel::Ignored => ANCHOR_IGNORED,
        })
        .collect();
    save(
        "anchor_labels.pxat",
        &Tensor::new(vec![labels.len() as u32], labels)?,
    )?;
    let mut offsets = Vec::with_capacity(8 * anchors.offsets.len());
    for o in &anchors.offsets {
        offsets.extend(o.iter().map(|&v| v as f32));
    }
    save(
        "anchor_offsets.pxat",
        &Tensor::new(vec![anchors.labels.len() as u32, 8], offsets)?,
    )?;

    let positive_cells = pixel
        .score
        .as_slice()
        .iter()
        .filter(|&&l| l == Label::Positive)
        .count();
    let summary = serde_json::json!({
        "regions": gt.regions.len(),
        "care_regions": gt.care_count(),
        "grid": [pixel.score.height(), pixel.score.width()],
        "positive_cells": positive_cells,
        "anchors": anchors.labels.len(),
        "positive_anchors": anchors.positive_count(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn load_anchor_targets(dir: &Path) -> Result<AnchorTargets<f64>> {
    let labels_t = Tensor::load(dir.join("anchor_labels.pxat"))?;
    let offsets_t = Tensor::load(dir.join("anchor_offsets.pxat"))?;
    let n = labels_t.data().len();
    anyhow::ensure!(
        offsets_t.dims() == [n as u32, 8],
        "anchor_offsets dims {:?} do not match {n} labels",
        offsets_t.dims()
    );
    let labels = labels_t
        .data()
        .iter()
        .map(|&v| {
            if v == ANCHOR_NEGATIVE {
                AnchorLabel::Negative
            } else if v == ANCHOR_IGNORED {
                AnchorLabel::Ignored
            } else {
                AnchorLabel::Positive(v as usize)
            }
        })
        .collect();
    let offsets = offsets_t
        .data()
        .chunks_exact(8)
        .map(|c| std::array::from_fn(|k| c[k] as f64))
        .collect();
    Ok(AnchorTargets { labels, offsets })
}

#[allow(clippy::too_many_arguments)]
fn loss(
    cli: &Cli,
    cfg: &RunConfig,
    seed: u64,
    targets_dir: &Path,
    rbox_score: &Path,
    geo: &Path,
    heat_score: &Path,
    anchor_score: &Path,
    anchor_offsets: &Path,
) -> Result<()> {
    let score_target = Tensor::load(targets_dir.join("score.pxat"))?;
    let geo_target = tensor_to_geo(&Tensor::load(targets_dir.join("geo.pxat"))?)?;
    let attention_target = Tensor::load(targets_dir.join("attention.pxat"))?;
    let anchor_targets = load_anchor_targets(targets_dir)?;

    let rbox_labels: Vec<Label> = score_target.data().iter().map(|&v| f32_to_label(v)).collect();
    let heat_labels: Vec<Label> = attention_target
        .data()
        .iter()
        .map(|&v| f32_to_label(v))
        .collect();

    let rbox_scores = Tensor::load(rbox_score)?.to_f64();
    let heat_scores = Tensor::load(heat_score)?.to_f64();
    anyhow::ensure!(
        rbox_scores.len() == rbox_labels.len(),
        "rbox score length {} does not match targets {}",
        rbox_scores.len(),
        rbox_labels.len()
    );
    anyhow::ensure!(
        heat_scores.len() == heat_labels.len(),
        "heat score length {} does not match targets {}",
        heat_scores.len(),
        heat_labels.len()
    );

    let geo_pred = tensor_to_geo(&Tensor::load(geo)?)?;
    anyhow::ensure!(
        geo_pred.same_shape(&geo_target),
        "geometry prediction shape mismatch"
    );
    let to_rbox = |g: &[f64; 5]| RBoxPred::new(g[0], g[1], g[2], g[3], g[4]);
    let preds: Vec<RBoxPred<f64>> = geo_pred.as_slice().iter().map(to_rbox).collect();
    let targets: Vec<RBoxPred<f64>> = geo_target.as_slice().iter().map(to_rbox).collect();
    let positives: Vec<usize> = rbox_labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == Label::Positive)
        .map(|(i, _)| i)
        .collect();

    let anchor_scores = Tensor::load(anchor_score)?.to_f64();
    let anchor_offset_preds: Vec<[f64; 8]> = Tensor::load(anchor_offsets)?
        .data()
        .chunks_exact(8)
        .map(|c| std::array::from_fn(|k| c[k] as f64))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_cls = pixel_cls_loss(
        &rbox_scores,
        &rbox_labels,
        &heat_scores,
        &heat_labels,
        &cfg.ohem,
        cfg.loss_norm,
        &mut rng,
    );
    let p_loc = pixel_loc_loss(
        &preds,
        &targets,
        &positives,
        &cfg.ohem,
        &cfg.loss_weights,
        &mut rng,
    );
    let (a_cls, a_loc) = anchor_losses(
        &anchor_scores,
        &anchor_offset_preds,
        &anchor_targets,
        &cfg.ohem,
        cfg.loss_norm,
        &mut rng,
    );
    let total = total_loss(p_cls, p_loc, a_cls, a_loc, &cfg.loss_weights);

    let report = serde_json::json!({
        "pixel_cls": p_cls,
        "pixel_loc": p_loc,
        "anchor_cls": a_cls,
        "anchor_loc": a_loc,
        "total": total,
        "seed": seed,
    });
    emit(
        cli.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
}

fn decode(cli: &Cli, cfg: &RunConfig, score: &Path, geo: &Path) -> Result<()> {
    let score = tensor_to_grid(&Tensor::load(score)?)?;
    let geo = tensor_to_geo(&Tensor::load(geo)?)?;
    let decoded = textdet::postprocess::decode_pixel(&score, &geo, cfg.pixel_stride, &cfg.fusion)?;
    let kept = textdet::postprocess::filter_pixel(decoded.detections, &cfg.fusion);
    eprintln!(
        "decoded {} boxes ({} degenerate dropped), {} after size filter",
        kept.len() + decoded.dropped,
        decoded.dropped,
        kept.len()
    );
    emit(cli.out.as_deref(), &detections_to_string(&kept))
}

fn fuse_nms(
    cli: &Cli,
    cfg: &RunConfig,
    score: &Path,
    geo: &Path,
    anchor_score: &Path,
    anchor_offsets: &Path,
) -> Result<()> {
    let score = tensor_to_grid(&Tensor::load(score)?)?;
    let geo = tensor_to_geo(&Tensor::load(geo)?)?;
    let anchor_scores = Tensor::load(anchor_score)?.to_f64();
    let anchor_offsets = Tensor::load(anchor_offsets)?.to_f64();
    let lattice: AnchorLattice<f64> =
        build_lattice(&cfg.apl, cfg.input_width, cfg.input_height)?;

    let (dets, diag) = fusion_nms_pipeline(
        &score,
        &geo,
        cfg.pixel_stride,
        &lattice,
        &anchor_scores,
        &anchor_offsets,
        &cfg.fusion,
    )?;
    eprintln!("{}", serde_json::to_string(&diag)?);
    emit(cli.out.as_deref(), &detections_to_string(&dets))
}

/// Pairs detection files with ground-truth files by stem: `X.jsonl` matches
/// `X.txt` (or `gt_X.txt`).
fn pair_eval_files(dets_dir: &Path, gt_dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut det_files: Vec<PathBuf> = fs::read_dir(dets_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    det_files.sort();
    let mut pairs = Vec::new();
    for det in det_files {
        let stem = det
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("unreadable file name {det:?}"))?;
        let plain = gt_dir.join(format!("{stem}.txt"));
        let prefixed = gt_dir.join(format!("gt_{stem}.txt"));
        let gt = if plain.is_file() {
            plain
        } else if prefixed.is_file() {
            prefixed
        } else {
            bail!("no ground truth for {det:?} (tried {plain:?} and {prefixed:?})");
        };
        pairs.push((det, gt));
    }
    Ok(pairs)
}

fn eval(cli: &Cli, cfg: &RunConfig, dets_path: &Path, gt_path: &Path, iou: f64) -> Result<()> {
    let eval_one = |det_file: &Path, gt_file: &Path| -> Result<textdet::toolkit::Metrics> {
        let dets = parse_detections::<f64>(&fs::read_to_string(det_file)?)
            .with_context(|| format!("parsing {det_file:?}"))?;
        let gt = parse_icdar_gt::<f64>(
            &fs::read_to_string(gt_file)?,
            cfg.input_width,
            cfg.input_height,
        )
        .with_context(|| format!("parsing {gt_file:?}"))?;
        Ok(evaluate(&dets, &gt, iou))
    };

    let report = if dets_path.is_dir() {
        anyhow::ensure!(gt_path.is_dir(), "--dets is a directory but --gt is not");
        let pairs = pair_eval_files(dets_path, gt_path)?;
        let per_image: Vec<_> = thread_pool()?.install(|| {
            use rayon::prelude::*;
            pairs
                .par_iter()
                .map(|(d, g)| eval_one(d, g))
                .collect::<Result<Vec<_>>>()
        })?;
        let aggregate = aggregate_metrics(&per_image);
        let images: Vec<_> = pairs
            .iter()
            .zip(&per_image)
            .map(|((d, _), m)| {
                serde_json::json!({
                    "file": d.file_name().and_then(|s| s.to_str()),
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_measure": m.f_measure,
                })
            })
            .collect();
        serde_json::json!({ "aggregate": aggregate, "images": images })
    } else {
        serde_json::to_value(eval_one(dets_path, gt_path)?)?
    };

    emit(
        cli.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
}

/// Worker pool sized by the PXA_THREADS environment variable (all cores
/// when unset).
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PXA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow!("PXA_THREADS must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n > 0, "PXA_THREADS must be >= 1");
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn viz_svg(cli: &Cli, cfg: &RunConfig, dets_path: &Path, gt_path: Option<&Path>) -> Result<()> {
    let dets = parse_detections::<f64>(&fs::read_to_string(dets_path)?)?;
    let gt = match gt_path {
        Some(p) => Some(parse_icdar_gt::<f64>(
            &fs::read_to_string(p)?,
            cfg.input_width,
            cfg.input_height,
        )?),
        None => None,
    };
    let svg = render_svg(&dets, gt.as_ref(), cfg.input_width, cfg.input_height);
    emit(cli.out.as_deref(), &svg)
}

fn bench_nms(cli: &Cli, cfg: &RunConfig, seed: u64, count: usize, trials: usize) -> Result<()> {
    use std::time::Instant;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Vec::new();
    for trial in 0..trials {
        let dets = clustered_candidates(&mut rng, count);

        let t0 = Instant::now();
        let (survivors, stats) = cascaded_nms_with_stats(dets.clone(), &cfg.fusion);
        let cascaded_ms = t0.elapsed().as_secs_f64() * 1e3;

        // Opening stage 1 all the way degenerates into single-stage quad NMS.
        let single_cfg = textdet::postprocess::FusionConfig {
            mbr_nms_iou: 1.0,
            ..cfg.fusion
        };
        let t0 = Instant::now();
        let (single_survivors, single_stats) = cascaded_nms_with_stats(dets, &single_cfg);
        let single_ms = t0.elapsed().as_secs_f64() * 1e3;

        report.push(serde_json::json!({
            "trial": trial,
            "candidates": count,
            "cascaded": {
                "millis": cascaded_ms,
                "quad_iou_evals": stats.quad_iou_evals,
                "rect_iou_evals": stats.rect_iou_evals,
                "survivors": survivors.len(),
            },
            "single_stage": {
                "millis": single_ms,
                "quad_iou_evals": single_stats.quad_iou_evals,
                "survivors": single_survivors.len(),
            },
        }));
    }
    emit(
        cli.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
}

fn clustered_candidates(rng: &mut ChaCha8Rng, count: usize) -> Vec<Detection<f64>> {
    let clusters: Vec<(f64, f64)> = (0..40)
        .map(|_| (rng.random_range(50.0..950.0), rng.random_range(50.0..950.0)))
        .collect();
    (0..count)
        .map(|_| {
            let &(cx, cy) = clusters.choose(rng).unwrap();
            let w = rng.random_range(20.0..80.0);
            let h = rng.random_range(15.0..60.0);
            let center = Point::new(
                cx + rng.random_range(-15.0..15.0),
                cy + rng.random_range(-15.0..15.0),
            );
            let theta = rng.random_range(-0.4..0.4);
            let quad = RotRect::new(center, w, h, theta)
                .unwrap()
                .to_quad()
                .unwrap();
            let source = if rng.random_bool(0.3) {
                Source::Anchor
            } else {
                Source::Pixel
            };
            let score = match source {
                Source::Anchor => rng.random_range(1.0..2.0),
                Source::Pixel => rng.random_range(0.0..1.0),
            };
            Detection {
                quad,
                score,
                source,
            }
        })
        .collect()
}
