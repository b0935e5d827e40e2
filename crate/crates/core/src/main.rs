use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use motion_prior::camera::CameraIntrinsics;
use motion_prior::gradcore::checkpoint;
use motion_prior::harness::formats::{self, to_json};
use motion_prior::harness::gradcheck::{run_gradient_checks, TOLERANCE};
use motion_prior::harness::train::{eval_data_hash, evaluate, run_ablation, run_variant, Model};
use motion_prior::harness::{TrainConfig, Variant};
use motion_prior::synthmotion::{make_dataset, DatasetConfig};
use motion_prior::{Error, Result};

#[derive(Parser)]
#[command(name = "motion-prior", version, about = "Per-joint motion prior: data, training, evaluation, ablation")]
struct Cli {
    /// Focal length override, pixels.
    #[arg(long, global = true)]
    focal: Option<f64>,
    /// Image resolution override, pixels.
    #[arg(long, global = true)]
    res: Option<f64>,
    /// Train the discriminator with the real/fake roles exchanged.
    #[arg(long, global = true)]
    lsgan_literal: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (train, eval and real-motion splits).
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 80)]
        clips: usize,
        #[arg(long, default_value_t = 3.0)]
        noise_px: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        window: usize,
        #[arg(long, default_value_t = 256)]
        real_pool: usize,
    },
    /// Train one variant and write checkpoint, report and curves.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train and evaluate all three variants on shared data.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Run the variants on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Finite-difference check of the loss gradients.
    CheckGrad {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Cli {
    fn intrinsics(&self, base: CameraIntrinsics) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.focal.unwrap_or(base.focal), self.res.unwrap_or(base.res))
    }

    fn config(&self, path: Option<&Path>) -> Result<TrainConfig> {
        let mut cfg = match path {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        cfg.intrinsics = self.intrinsics(cfg.intrinsics)?;
        cfg.lsgan_literal |= self.lsgan_literal;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_timing(dir: &Path, seconds: f64) -> Result<()> {
    std::fs::write(dir.join("timing.json"), to_json(&serde_json::json!({ "wall_clock_seconds": seconds }))?)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    match &cli.command {
        Command::GenData { out, clips, noise_px, seed, window, real_pool } => {
            let cfg = DatasetConfig {
                n_clips: *clips,
                split_seed: *seed,
                window: *window,
                noise_px: *noise_px,
                intrinsics: cli.intrinsics(CameraIntrinsics::default())?,
                real_pool: *real_pool,
                ..DatasetConfig::default()
            };
            let data = make_dataset(&cfg)?;
            formats::write_dataset(out, &data)?;
            println!(
                "wrote {} train, {} eval clips and {} real motions to {}",
                data.train.len(),
                data.eval.len(),
                data.real_pool.len(),
                out.display()
            );
        }
        Command::Train { config, variant, out } => {
            let mut cfg = cli.config(config.as_deref())?;
            if let Some(v) = variant {
                cfg.variant = *v;
            }
            let data = make_dataset(&cfg.dataset())?;
            let run = run_variant(&cfg, &data)?;
            formats::write_run(out, &run)?;
            write_timing(out, start.elapsed().as_secs_f64())?;
            let r = &run.report;
            println!(
                "{}: mpjpe {:.3} pa_mpjpe {:.3} acc {:.3} acc_err {:.3} (mm)",
                r.variant, r.mpjpe, r.pa_mpjpe, r.acc, r.acc_err
            );
        }
        Command::Eval { checkpoint: ckpt, data, report } => {
            let (manifest, store) = checkpoint::load(ckpt)?;
            let model = Model::from_checkpoint(&manifest, &store)?;
            let clips = formats::read_eval_clips(data)?;
            let eval = evaluate(&model, &clips)?;
            let out = serde_json::json!({
                "variant": manifest.arch["variant"],
                "seed": manifest.seed,
                "step": manifest.step,
                "config_hash": manifest.arch["config_hash"],
                "eval_data_hash": eval_data_hash(&clips),
                "clips": eval.clips,
                "mpjpe": eval.metrics.mpjpe,
                "pa_mpjpe": eval.metrics.pa_mpjpe,
                "acc": eval.metrics.acc,
                "acc_err": eval.metrics.acc_err,
                "observation_oracle": eval.observation_oracle,
            });
            std::fs::write(report, to_json(&out)?)?;
            println!("{}", to_json(&out)?.trim_end());
        }
        Command::Ablate { config, out, parallel } => {
            let cfg = cli.config(config.as_deref())?;
            let runs = run_ablation(&cfg, *parallel)?;
            formats::write_ablation(out, &runs)?;
            write_timing(out, start.elapsed().as_secs_f64())?;
            let reports: Vec<_> = runs.iter().map(|r| &r.report).collect();
            print!("{}", motion_prior::harness::train::ablation_table(&reports));
        }
        Command::CheckGrad { seed } => {
            let results = run_gradient_checks(*seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {:<13} {:<24} {:<22} entries={:<3} max_rel_err={:.3e}",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.loss,
                    r.component,
                    r.block,
                    r.entries,
                    r.max_rel_err
                );
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                return Err(Error::Config(format!("{failed} gradient checks above {TOLERANCE:e}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
