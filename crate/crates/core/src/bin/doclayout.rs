use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use doclayout::commands::{self, AblationGrid, EvalOptions, InputFormat, DEFAULT_TOKEN_GRID};
use doclayout::diffusion::{SampleOptions, ScheduleKind, TrainConfig};
use doclayout::layout::ClassSchema;
use doclayout::metrics::{OverlapMode, DEFAULT_RASTER_GRID};
use doclayout::mosaic::MosaicWeights;
use doclayout::Result;

#[derive(Parser)]
#[command(name = "doclayout", version, about = "Layout metrics and a small layout diffusion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Schema preset (publaynet, docbank, magazine, toy) or comma-separated class names.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Training iterations.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value = "sqrt")]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Score a generated corpus against a reference corpus.
    Eval {
        generated: PathBuf,
        reference: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Raster lattice size for Doc-EMD.
        #[arg(long, default_value_t = DEFAULT_RASTER_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "union")]
        overlap_mode: OverlapMode,
        /// Cross-check matched per-class EMDs against the dense LP oracle.
        #[arg(long)]
        exact_check: bool,
    },
    /// Sample layouts from a trained checkpoint.
    Generate {
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Snap each denoised estimate to the nearest token embedding.
        #[arg(long)]
        clamp: bool,
    },
    /// Train a denoiser on a JSONL corpus.
    Train {
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        /// Diffusion steps.
        #[arg(long = "T", default_value_t = 2000)]
        t: usize,
        /// Token quantization grid.
        #[arg(long, default_value_t = DEFAULT_TOKEN_GRID)]
        grid: usize,
    },
    /// Write one SVG per layout.
    Render {
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Match generated boxes to the closest real boxes of the same class.
    MosaicPlan {
        generated: PathBuf,
        real: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        aspect_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        area_weight: f64,
    },
    /// Train and evaluate one model per (lr, T) cell.
    Ablate {
        corpus: PathBuf,
        /// Held-out reference corpus; defaults to the last fifth of the corpus.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "1e-4")]
        lr: Vec<f64>,
        /// Diffusion step counts.
        #[arg(long = "T", value_delimiter = ',', default_value = "500,2000")]
        t: Vec<usize>,
        /// Samples drawn per cell.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Raster lattice size for Doc-EMD.
        #[arg(long, default_value_t = DEFAULT_RASTER_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "union")]
        overlap_mode: OverlapMode,
    },
    /// Convert a COCO document or JSONL file into the native JSONL format.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "coco")]
        format: InputFormat,
        #[command(flatten)]
        common: Common,
    },
}

fn schema(spec: &Option<String>) -> Result<Option<Arc<ClassSchema>>> {
    spec.as_deref().map(|s| ClassSchema::from_spec(s).map(Arc::new)).transpose()
}

fn train_config(m: &ModelArgs, lr: f64, t: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr,
        batch_size: m.batch_size,
        max_steps: m.steps,
        seed,
        diffusion_steps: t,
        schedule: m.schedule,
        d: m.d,
        width: m.width,
        layers: m.layers,
        heads: m.heads,
        ..TrainConfig::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval { generated, reference, common, grid, lambda, overlap_mode, exact_check } => {
            let opts = EvalOptions { grid, lambda, overlap_mode, seed: common.seed, exact_check };
            let r = commands::cmd_eval(&generated, &reference, schema(&common.schema)?.as_ref(), &opts, &common.out)?;
            println!("{}\n{}", commands::EVAL_CSV_HEADER, r.row.csv_row());
        }
        Command::Generate { checkpoint, common, count, clamp } => {
            let opts = SampleOptions { clamp, ..SampleOptions::default() };
            let (_, stats) = commands::cmd_generate(&checkpoint, count, common.seed, opts, &common.out)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
        Command::Train { corpus, common, model, lr, t, grid } => {
            let cfg = train_config(&model, lr, t, common.seed);
            let every = (cfg.max_steps / 20).max(1);
            let (_, log) = commands::cmd_train(&corpus, schema(&common.schema)?.as_ref(), grid, &cfg, &common.out, |r| {
                if r.step % every == 0 {
                    eprintln!("step {} loss {:.5}", r.step, r.loss);
                }
            })?;
            println!("trained {} steps, final loss {:?}", log.len(), log.last().map(|r| r.loss));
        }
        Command::Render { corpus, common } => {
            let paths = commands::cmd_render(&corpus, schema(&common.schema)?.as_ref(), &common.out)?;
            println!("wrote {} SVG files", paths.len());
        }
        Command::MosaicPlan { generated, real, common, aspect_weight, area_weight } => {
            let w = MosaicWeights { aspect: aspect_weight, area: area_weight };
            let plan = commands::cmd_mosaic_plan(&generated, &real, schema(&common.schema)?.as_ref(), w, &common.out)?;
            println!("{} entries, {} unmatched", plan.entries.len(), plan.unmatched);
        }
        Command::Ablate { corpus, heldout, common, model, lr, t, count, grid, lambda, overlap_mode } => {
            let g = AblationGrid {
                lrs: lr,
                diffusion_steps: t,
                base: train_config(&model, 1e-4, 2000, common.seed),
                samples: count,
                token_grid: DEFAULT_TOKEN_GRID,
                eval: EvalOptions { grid, lambda, overlap_mode, seed: common.seed, exact_check: false },
                sample: SampleOptions::default(),
            };
            println!("{}", commands::ABLATION_CSV_HEADER);
            commands::cmd_ablate(&corpus, heldout.as_deref(), schema(&common.schema)?.as_ref(), &g, &common.out, |r| {
                println!("{}", r.csv_row())
            })?;
        }
        Command::Ingest { input, format, common } => {
            let stats = commands::cmd_ingest(&input, format, schema(&common.schema)?.as_ref(), &common.out)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
