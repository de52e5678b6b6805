//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs as its own binary (`harness = false`) so the slow
//! end-to-end criteria execute once, in order, with their timings reported.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use amc::config::PipelineConfig;
use amc::dataset::Dataset;
use amc::pipeline::{self, ScoreMethod, ScoreRecord};
use amc_core::data::{generate_synthetic, SplitSpec};
use amc_core::eval::{detect_events, pr_ap, roc_auc};
use amc_core::losses::{appearance_loss, flow_loss, Reduction};
use amc_core::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use amc_core::scoring::{max_patch, partial_scores_at, ErrorMap};
use amc_core::train::seeded_rng;
use amc_core::{Shape, Tensor};
use rand::Rng;

/// Seeded end-to-end configuration shared with the command line.
const E2E_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/synthetic-64x96.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_shapes() -> Outcome {
    let mut rng = seeded_rng(1, 0);
    let g = Generator::new(GeneratorConfig::default(), &mut rng).unwrap();
    let d = Discriminator::new(DiscriminatorConfig::default(), 128, 192, &mut rng).unwrap();
    let s = Shape::new(1, 3, 128, 192);
    let x = Tensor::from_vec(s, common::uniform_vec(&mut rng, s.numel(), 0.0, 1.0)).unwrap();
    let t = Instant::now();
    let out = g.infer(&x).unwrap();
    let p = d.infer(&x, &out.flow).unwrap();
    let elapsed = t.elapsed();
    let pass = out.frame.shape() == s
        && out.flow.shape() == s
        && p.shape() == Shape::new(1, 512, 16, 24)
        && p.data().iter().all(|&v| v > 0.0 && v < 1.0)
        && within(elapsed, 1.0);
    outcome(
        pass,
        format!("G 128x192x3 -> 2 x {}, D -> {}, forward {:.2?}", out.frame.shape(), p.shape(), elapsed),
    )
}

fn c2_gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(21, 0);
    let mut worst = 0.0f64;
    for term in common::LOSS_TERMS {
        for _ in 0..20 {
            worst = worst.max(common::loss_gradient_error(term, &mut rng));
        }
    }
    let elapsed = t.elapsed();
    outcome(
        worst < 1e-3 && within(elapsed, 30.0),
        format!("6 terms x 20 trials, worst relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn c3_patch_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(3, 0);
    let (h, w, patch) = (128, 192, 16);
    let mut worst = 0.0f64;
    let mut same_location = true;
    for _ in 0..100 {
        let ef: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
        let ei: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>()).collect();
        let (ef_map, ei_map) = (ErrorMap::new(h, w, ef.clone()).unwrap(), ErrorMap::new(h, w, ei.clone()).unwrap());
        let (loc, s) = max_patch(&ef_map, patch).unwrap();
        let ((r, c), want) = common::max_window(&ef, h, w, patch);
        same_location &= (loc.row, loc.col) == (r, c);
        let p = partial_scores_at(&ei_map, &ef_map, loc, patch).unwrap();
        worst = worst
            .max((s - want).abs())
            .max((p.s_f - common::window_mean(&ef, w, r, c, patch)).abs())
            .max((p.s_i - common::window_mean(&ei, w, r, c, patch)).abs());
    }
    let elapsed = t.elapsed();
    outcome(
        worst <= 1e-6 && same_location && within(elapsed, 30.0),
        format!("100 maps 128x192, max |diff| {worst:.2e}, locations equal: {same_location}, {elapsed:.2?}"),
    )
}

fn c4_metric_oracles() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(4, 0);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = rng.random_range(2..=500);
        let (scores, labels) = loop {
            let s: Vec<f64> = (0..n)
                .map(|_| if i % 2 == 0 { rng.random_range(0..10) as f64 } else { rng.random::<f64>() })
                .collect();
            let l: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
            if l.contains(&0) && l.contains(&1) {
                break (s, l);
            }
        };
        let auc = roc_auc(&scores, &labels).unwrap().0;
        let ap = pr_ap(&scores, &labels).unwrap().0;
        worst = worst
            .max((auc - common::auc_pairs(&scores, &labels)).abs())
            .max((ap - common::ap_sweep(&scores, &labels)).abs());
    }
    let elapsed = t.elapsed();
    outcome(
        worst < 1e-9 && within(elapsed, 10.0),
        format!("50 instances <= 500 points, max |diff| {worst:.2e}, {elapsed:.2?}"),
    )
}

fn c6_persistence() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(6, 0);
    let mut mismatches = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=200);
        let seq: Vec<f64> = (0..n)
            .map(|_| if i % 3 == 0 { rng.random_range(0..6) as f64 / 5.0 } else { rng.random::<f64>() })
            .collect();
        let threshold = rng.random_range(0.0..0.6);
        let merge = rng.random_range(0..30);
        if detect_events(&seq, threshold, merge).unwrap() != common::detect_exhaustive(&seq, threshold, merge) {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        mismatches == 0 && within(elapsed, 10.0),
        format!("100 sequences <= 200, {mismatches} mismatching index sets, {elapsed:.2?}"),
    )
}

fn e2e_config() -> PipelineConfig {
    PipelineConfig::load(Some(Path::new(E2E_CONFIG)), &[]).unwrap()
}

/// Fitting ability only: dropout is a regularizer against exactly this, so it
/// is off, and a larger generator step makes 500 steps enough. The loss
/// weights keep their defaults.
fn c7_memorization() -> Outcome {
    let mut cfg = e2e_config();
    cfg.model.generator.dropout = 0.0;
    cfg.train.lr_g = 1e-3;
    cfg.synth.train = SplitSpec {
        videos: 1,
        frames_per_video: 4,
        anomaly_rate: None,
    };
    let data = generate_synthetic(&cfg.synth_spec()).unwrap();
    let g = &cfg.model.generator;
    let video = Dataset::from_synth(&data.train, g.height, g.width).unwrap();
    let (frames, flows) = video.batch(&video.pairs()).unwrap();
    let mut state = pipeline::new_state(&cfg).unwrap();
    let t = Instant::now();
    for _ in 0..500 {
        state.train_step(&frames, &flows).unwrap();
    }
    let elapsed = t.elapsed();
    let out = state.generator.infer(&frames).unwrap();
    let appe = appearance_loss(&frames, &out.frame, Reduction::Mean).unwrap();
    let flow = flow_loss(&flows, &out.flow, Reduction::Mean).unwrap();
    outcome(
        appe < 1e-2 && flow < 1e-2 && within(elapsed, 300.0),
        format!("4-frame video, 500 steps (dropout 0, lr_G 1e-3): L_appe {appe:.2e}, L_flow {flow:.2e} (eval mode), {elapsed:.2?}"),
    )
}

fn pooled_auc(records: &[ScoreRecord], test: &Dataset) -> f64 {
    let labels: Vec<u8> = records
        .iter()
        .map(|r| {
            let v = test.videos.iter().find(|v| v.id == r.video_id).unwrap();
            v.labels.as_ref().unwrap()[r.frame_index]
        })
        .collect();
    let scores: Vec<f64> = records.iter().map(|r| r.score_norm).collect();
    roc_auc(&scores, &labels).unwrap().0
}

/// Criteria 5, 8 and 9 share one trained model.
fn e2e() -> [Outcome; 3] {
    let cfg = e2e_config();
    let t = Instant::now();
    let data = generate_synthetic(&cfg.synth_spec()).unwrap();
    let g = &cfg.model.generator;
    let train = Dataset::from_synth(&data.train, g.height, g.width).unwrap();
    let test = Dataset::from_synth(&data.test, g.height, g.width).unwrap();
    let mut state = pipeline::new_state(&cfg).unwrap();
    pipeline::train(&mut state, &train, &cfg, |_, _| Ok(())).unwrap();

    let stats = pipeline::analyze(&state.generator, &train, cfg.scoring.patch, cfg.scoring.batch_size).unwrap();
    let weights = pipeline::fit_score_weights(&state.generator, &train, &cfg.scoring).unwrap();
    let parts: Vec<_> = stats.iter().flat_map(|v| v.frames.iter().map(|f| f.partial)).collect();
    let n = parts.len() as f64;
    let mean_f = parts.iter().map(|p| weights.w_f * p.s_f).sum::<f64>() / n;
    let mean_i = parts.iter().map(|p| weights.w_i * p.s_i).sum::<f64>() / n;
    let c5 = outcome(
        (mean_f - 1.0).abs() <= 1e-6 && (mean_i - 1.0).abs() <= 1e-6,
        format!("{} training frames: mean w_F*S_F = {mean_f:.9}, mean w_I*S_I = {mean_i:.9}", parts.len()),
    );

    let test_stats = pipeline::analyze(&state.generator, &test, cfg.scoring.patch, cfg.scoring.batch_size).unwrap();
    let combined = pipeline::score_records(&test_stats, Some(&weights), &cfg.scoring, ScoreMethod::Patch).unwrap();
    let mut motion_cfg = cfg.scoring;
    motion_cfg.lambda_s = 0.0;
    let motion = pipeline::score_records(&test_stats, Some(&weights), &motion_cfg, ScoreMethod::Patch).unwrap();
    let appearance = pipeline::score_records(&test_stats, None, &cfg.scoring, ScoreMethod::Ssim).unwrap();
    let elapsed = t.elapsed();

    let (auc_c, auc_m, auc_a) = (pooled_auc(&combined, &test), pooled_auc(&motion, &test), pooled_auc(&appearance, &test));
    let train_frames = data.train.iter().map(|v| v.frames.len()).sum::<usize>();
    let c8 = outcome(
        auc_c >= 0.85 && train_frames >= 500 && cfg.train.epochs <= 10 && within(elapsed, 900.0),
        format!(
            "seed {}, {train_frames} training frames, {} epochs at 64x96: combined AUC {auc_c:.4}, {elapsed:.2?}",
            cfg.seed, cfg.train.epochs
        ),
    );
    let c9 = outcome(
        auc_c >= auc_m.max(auc_a) - 0.02,
        format!("combined {auc_c:.4} vs motion-only {auc_m:.4}, appearance-only (SSIM) {auc_a:.4}"),
    );
    [c5, c8, c9]
}

/// Full synth -> train -> score through the binary.
fn pipeline_run(dir: &Path) -> Vec<Vec<String>> {
    let sets: Vec<String> = [
        "seed=11",
        "synth.height=32",
        "synth.width=48",
        "synth.train.videos=2",
        "synth.train.frames_per_video=30",
        "synth.test.videos=2",
        "synth.test.frames_per_video=30",
        "model.generator.height=32",
        "model.generator.width=48",
        "model.generator.inception_widths=[2, 2, 2, 2]",
        "model.generator.encoder_widths=[4, 8, 8]",
        "model.discriminator.widths=[4, 8, 8]",
        "model.discriminator.out_channels=8",
        "train.epochs=2",
        "train.batch_size=8",
        "scoring.patch=8",
    ]
    .iter()
    .flat_map(|s| ["--set".to_string(), s.to_string()])
    .collect();
    let d = |p: &str| dir.join(p).to_str().unwrap().to_string();
    for args in [
        vec!["synth".into(), "--out".into(), d("data")],
        vec!["train".into(), "--data".into(), d("data"), "--out".into(), d("m.ckpt")],
        vec!["score".into(), "--ckpt".into(), d("m.ckpt"), "--data".into(), d("data"), "--out".into(), d("scores.csv")],
    ] {
        let status = Command::new(env!("CARGO_BIN_EXE_amc")).args(&args).args(&sets).output().unwrap().status;
        assert!(status.success(), "amc {args:?} failed");
    }
    fs::read_to_string(dir.join("scores.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn c10_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (pipeline_run(a.path()), pipeline_run(b.path()));
    let mut worst = 0.0f64;
    let mut same_shape = ra.len() == rb.len() && ra.len() > 1;
    for (x, y) in ra.iter().zip(&rb) {
        same_shape &= x.len() == y.len();
        for (u, v) in x.iter().zip(y) {
            match (u.parse::<f64>(), v.parse::<f64>()) {
                (Ok(p), Ok(q)) => worst = worst.max((p - q).abs()),
                _ => same_shape &= u == v,
            }
        }
    }
    outcome(
        same_shape && worst <= 1e-6,
        format!("two runs, {} score rows, max |diff| {worst:.2e}", ra.len().saturating_sub(1)),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` lists the single target; bare numbers select
    // criteria (e.g. `cargo test --test acceptance -- 1 7`); anything else
    // the test runner passes through is ignored.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let only: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);

    let mut results: Vec<Outcome> = Vec::new();
    let mut record = |n: usize, name: &str, o: Outcome| {
        println!("{} criterion {n:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push(o);
    };
    type Criterion = (usize, &'static str, fn() -> Outcome);
    let quick: [Criterion; 5] = [
        (1, "shape contracts", c1_shapes),
        (2, "loss gradients", c2_gradients),
        (3, "patch-score oracle", c3_patch_oracle),
        (4, "metric oracles", c4_metric_oracles),
        (6, "persistence detector", c6_persistence),
    ];
    for (n, name, f) in quick {
        if wanted(n) {
            record(n, name, f());
        }
    }
    if wanted(7) {
        record(7, "memorization", c7_memorization());
    }
    if wanted(5) || wanted(8) || wanted(9) {
        let [c5, c8, c9] = e2e();
        record(5, "calibration identity", c5);
        record(8, "end-to-end detection", c8);
        record(9, "ablation ordering", c9);
    }
    if wanted(10) {
        record(10, "determinism", c10_determinism());
    }
    let failed = results.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
