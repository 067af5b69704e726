//! Train the denoiser on the two-column toy grammar and save a checkpoint.
//!
//! cargo run --release --example train_toy -- [steps] [T] [out.json]

use std::path::PathBuf;
use std::time::Instant;

use doclayout::commands::train_model;
use doclayout::diffusion::{write_loss_log, TrainConfig};
use doclayout::synth::ToyGrammar;

fn main() -> doclayout::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(2000, |s| s.parse().expect("steps"));
    let t = args.next().map_or(2000, |s| s.parse().expect("T"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "toy_model.json".into()));

    let corpus = ToyGrammar::default().corpus(4000, 1);
    let cfg = TrainConfig {
        max_steps: steps,
        diffusion_steps: t,
        batch_size: 32,
        d: 16,
        width: 64,
        layers: 2,
        heads: 4,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (model, log) = train_model(&corpus, 128, Some(ToyGrammar::max_len()), &cfg, |r| {
        if r.step % 250 == 0 {
            eprintln!("step {:>6}  loss {:.4}  mse {:.4}  round {:.4}  {:.0}s", r.step, r.loss, r.mse_term, r.round_term, start.elapsed().as_secs_f64());
        }
    })?;
    model.save(&out)?;
    write_loss_log(&log, std::fs::File::create(out.with_extension("loss.csv"))?)?;
    println!("{} parameters, saved to {}", model.params.num_parameters(), out.display());
    Ok(())
}
