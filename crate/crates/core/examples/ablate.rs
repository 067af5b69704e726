//! A small learning-rate by diffusion-steps grid on the toy grammar.
//!
//! cargo run --release --example ablate -- [train_steps] [samples]

use doclayout::commands::{ablate, AblationGrid, EvalOptions, ABLATION_CSV_HEADER};
use doclayout::diffusion::{SampleOptions, TrainConfig};
use doclayout::metrics::OverlapMode;
use doclayout::synth::ToyGrammar;

fn main() -> doclayout::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(300, |s| s.parse().expect("train steps"));
    let samples = args.next().map_or(16, |s| s.parse().expect("samples"));

    let g = ToyGrammar::default();
    let train = g.corpus(2000, 1);
    let held = g.corpus(samples, 2);
    let grid = AblationGrid {
        lrs: vec![1e-4, 2e-4],
        diffusion_steps: vec![100, 400],
        base: TrainConfig { max_steps: steps, batch_size: 32, d: 16, width: 64, layers: 2, heads: 4, ..TrainConfig::default() },
        samples,
        token_grid: 128,
        eval: EvalOptions { grid: 32, lambda: 1.0, overlap_mode: OverlapMode::Union, seed: 0, exact_check: false },
        sample: SampleOptions::default(),
    };
    println!("{ABLATION_CSV_HEADER}");
    ablate(&train, &held, &grid, |r| println!("{}", r.csv_row()))?;
    Ok(())
}
