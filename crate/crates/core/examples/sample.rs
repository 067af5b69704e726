//! Sample layouts from a checkpoint and compare them with the grammar.
//!
//! cargo run --release --example sample -- toy_model.json [count] [--clamp]

use std::sync::Arc;

use doclayout::diffusion::{LayoutModel, SampleOptions};
use doclayout::layout::ClassSchema;
use doclayout::matching::set_score_docemd;
use doclayout::metrics::{class_frequencies, DocEmdConfig};
use doclayout::synth::{random_corpus, ToyGrammar};

fn main() -> doclayout::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map(String::as_str).unwrap_or("toy_model.json");
    let count = args.get(1).map_or(64, |s| s.parse().expect("count"));
    let clamp = args.iter().any(|a| a == "--clamp");

    let model = LayoutModel::load(std::path::Path::new(path))?;
    let t0 = std::time::Instant::now();
    let out = model.sample(count, 0, SampleOptions { clamp, ..SampleOptions::default() })?;
    println!("{count} samples in {:.1}s, validity {:.3}", t0.elapsed().as_secs_f64(), out.validity_rate());

    let g = ToyGrammar::default();
    let k = model.schema.len();
    println!("class frequencies {:?}", class_frequencies(&out.layouts, k));
    println!("grammar           {:?}", g.class_frequencies());

    let n = count.min(64);
    let held = g.corpus(n, 1234);
    let noise = random_corpus(n, &Arc::new(ClassSchema::toy()), g.page, ToyGrammar::MAX_BOXES, 99);
    let cfg = DocEmdConfig::default().with_grid(32);
    println!(
        "Doc-EMD to held-out: samples {:.4}, uniform random {:.4}",
        set_score_docemd(&out.layouts[..n], &held, &cfg)?,
        set_score_docemd(&noise, &held, &cfg)?
    );
    for l in out.layouts.iter().take(3) {
        println!("{:?}", l.elements().iter().map(|e| (e.class_id, e.x, e.y, e.w, e.h)).collect::<Vec<_>>());
    }
    Ok(())
}
