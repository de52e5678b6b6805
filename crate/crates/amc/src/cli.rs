//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use amc_core::data::generate_synthetic;
use amc_core::eval::EvalReport;
use amc_core::flowviz::flow_to_rgb;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint;
use crate::config::PipelineConfig;
use crate::dataset::{self, Dataset};
use crate::error::{AmcError, Result};
use crate::formats;
use crate::pipeline::{self, EvalMode, ScoreMethod};
use crate::plot;

#[derive(Debug, Parser)]
#[command(name = "amc", version, about = "Appearance-motion anomaly detection for video")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML config file; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with analytic flow and test labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train on DIR/train, calibrate the score weights, write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Epoch log CSV (default: next to the checkpoint).
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score every frame that has a flow in DIR/<split>.
    Score {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "patch")]
        method: ScoreMethod,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Frame-level AUC/AP against labels, or event counts against intervals.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, conflicts_with = "events", required_unless_present = "events")]
        labels: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        out: PathBuf,
        /// Curve points as CSV (frame modes).
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Curve plot as PNG (frame modes).
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        persistence_threshold: Option<f64>,
        #[arg(long)]
        merge_distance: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render a flow file with the direction/magnitude color code.
    Viz {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Magnitude at full saturation (default: the field's maximum).
        #[arg(long)]
        mag_max: Option<f32>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn echo(out: &mut impl Write, cfg: &PipelineConfig) -> Result<()> {
    writeln!(out, "# resolved config\n{}", cfg.to_toml()).map_err(|e| AmcError::io(Path::new("<stdout>"), e))
}

fn say(out: &mut impl Write, msg: &str) -> Result<()> {
    writeln!(out, "{msg}").map_err(|e| AmcError::io(Path::new("<stdout>"), e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| AmcError::io(p, e)),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Synth { out: dir, cfg } => {
            let cfg = cfg.load()?;
            echo(out, &cfg)?;
            let data = generate_synthetic(&cfg.synth_spec())?;
            dataset::write_synthetic(&dir, &data)?;
            say(out, &format!("wrote {} train and {} test videos to {}", data.train.len(), data.test.len(), dir.display()))
        }
        Command::Train { data, out: ckpt, log, cfg } => {
            let cfg = cfg.load()?;
            echo(out, &cfg)?;
            let g = &cfg.model.generator;
            let train = Dataset::load(&data, "train", g.height, g.width)?;
            let mut state = pipeline::new_state(&cfg)?;
            let log_path = log.unwrap_or_else(|| ckpt.with_extension("epochs.csv"));
            create_parent(&ckpt)?;
            create_parent(&log_path)?;
            let mut logs = Vec::new();
            let every = cfg.train.checkpoint_every;
            let epochs = pipeline::train(&mut state, &train, &cfg, |s, l| {
                logs.push(*l);
                formats::write_csv(&log_path, &logs)?;
                say(
                    out,
                    &format!(
                        "epoch {} loss_D {:.6} loss_G {:.6} adv {:.6} appe {:.6} flow {:.6}",
                        l.epoch, l.loss_d, l.loss_g, l.loss_adv, l.loss_appe, l.loss_flow
                    ),
                )?;
                if every > 0 && l.epoch % every == 0 && l.epoch < cfg.train.epochs {
                    checkpoint::save(&ckpt.with_extension(format!("epoch{}.ckpt", l.epoch)), &cfg, s, l.epoch, None)?;
                }
                Ok(())
            })?;
            let weights = pipeline::fit_score_weights(&state.generator, &train, &cfg.scoring)?;
            checkpoint::save(&ckpt, &cfg, &state, epochs.len(), Some(weights))?;
            say(out, &format!("calibrated w_F {} w_I {}; wrote {}", weights.w_f, weights.w_i, ckpt.display()))
        }
        Command::Score { ckpt, data, method, split, out: csv, cfg } => {
            let user = cfg.load()?;
            let ck = checkpoint::load(&ckpt)?;
            if method == ScoreMethod::Patch && ck.score_weights.is_none() {
                return Err(AmcError::Uncalibrated(ckpt));
            }
            let resolved = PipelineConfig {
                scoring: user.scoring,
                eval: user.eval,
                synth: user.synth,
                ..ck.config.clone()
            };
            resolved.validate()?;
            echo(out, &resolved)?;
            let g = &resolved.model.generator;
            let set = Dataset::load(&data, &split, g.height, g.width)?;
            let records = pipeline::score_dataset(
                &ck.state.generator,
                ck.score_weights.as_ref(),
                &set,
                &resolved.scoring,
                method,
            )?;
            create_parent(&csv)?;
            formats::write_csv(&csv, &records)?;
            say(out, &format!("scored {} frames; wrote {}", records.len(), csv.display()))
        }
        Command::Eval {
            scores,
            labels,
            events,
            mode,
            out: report_path,
            curve,
            plot: plot_path,
            persistence_threshold,
            merge_distance,
            cfg,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(t) = persistence_threshold {
                cfg.eval.persistence_threshold = t;
            }
            if let Some(d) = merge_distance {
                cfg.eval.merge_distance = d;
            }
            cfg.validate()?;
            echo(out, &cfg)?;
            let records: Vec<pipeline::ScoreRecord> = formats::read_csv(&scores)?;
            let report = match (mode, labels, events) {
                (EvalMode::Event, _, Some(ev)) => pipeline::event_report(&records, &formats::read_events(&ev)?, &cfg.eval)?,
                (EvalMode::Event, _, None) => return Err(AmcError::Config("--mode event needs --events".into())),
                (m, Some(l), _) => pipeline::frame_report(&records, &formats::read_labels(&l)?, m)?,
                (_, None, _) => return Err(AmcError::Config("frame modes need --labels".into())),
            };
            let text = pipeline::report_text(&report);
            create_parent(&report_path)?;
            formats::write_text(&report_path, &text)?;
            write_curve(&report, curve.as_deref(), plot_path.as_deref())?;
            say(out, text.trim_end())
        }
        Command::Viz { flow, out: img, mag_max, cfg } => {
            let cfg = cfg.load()?;
            echo(out, &cfg)?;
            if let Some(m) = mag_max {
                if !(m.is_finite() && m > 0.0) {
                    return Err(AmcError::Config("--mag-max must be finite and > 0".into()));
                }
            }
            let field = formats::read_flow(&flow)?;
            create_parent(&img)?;
            formats::write_png(&img, &flow_to_rgb(&field, mag_max)?)?;
            say(out, &format!("wrote {}", img.display()))
        }
    }
}

#[derive(serde::Serialize)]
struct RocRow {
    threshold: f64,
    fpr: f64,
    tpr: f64,
}

#[derive(serde::Serialize)]
struct PrRow {
    threshold: f64,
    recall: f64,
    precision: f64,
}

fn write_curve(report: &EvalReport, csv: Option<&Path>, png: Option<&Path>) -> Result<()> {
    let (points, diagonal): (Vec<(f64, f64)>, bool) = match report {
        EvalReport::FrameAuc { curve, .. } => {
            if let Some(p) = csv {
                let rows: Vec<RocRow> = curve.iter().map(|c| RocRow { threshold: c.threshold, fpr: c.fpr, tpr: c.tpr }).collect();
                formats::write_csv(p, &rows)?;
            }
            (curve.iter().map(|c| (c.fpr, c.tpr)).collect(), true)
        }
        EvalReport::FrameAp { curve, .. } => {
            if let Some(p) = csv {
                let rows: Vec<PrRow> = curve
                    .iter()
                    .map(|c| PrRow { threshold: c.threshold, recall: c.recall, precision: c.precision })
                    .collect();
                formats::write_csv(p, &rows)?;
            }
            (curve.iter().map(|c| (c.recall, c.precision)).collect(), false)
        }
        EvalReport::Event { .. } => {
            if csv.is_some() || png.is_some() {
                return Err(AmcError::Config("event mode has no curve to write".into()));
            }
            return Ok(());
        }
    };
    if let Some(p) = png {
        formats::write_png(p, &plot::curve_image(&points, diagonal))?;
    }
    Ok(())
}
