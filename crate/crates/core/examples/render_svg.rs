//! Render toy layouts to SVG files.
//!
//! cargo run --example render_svg -- [out_dir]

use doclayout::render::{render_corpus, render_svg};
use doclayout::synth::ToyGrammar;

fn main() -> doclayout::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "svg".into());
    let corpus = ToyGrammar::default().corpus(8, 4);
    let paths = render_corpus(&corpus, std::path::Path::new(&dir))?;
    for p in &paths {
        println!("{}", p.display());
    }
    print!("{}", render_svg(&corpus[0]));
    Ok(())
}
