//! Corpus-level scores: Hungarian matching over pairwise Doc-EMD and DocSim.

use std::sync::Arc;

use doclayout::layout::ClassSchema;
use doclayout::matching::{hungarian, set_match_docemd, set_score_docsim};
use doclayout::metrics::DocEmdConfig;
use doclayout::synth::{random_corpus, ToyGrammar};

fn main() -> doclayout::Result<()> {
    let a = hungarian(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]])?;
    println!("assignment {:?} cost {}", a.pairs, a.total_cost);

    let g = ToyGrammar::default();
    let reference = g.corpus(20, 10);
    let same_source = g.corpus(20, 11);
    let noise = random_corpus(20, &Arc::new(ClassSchema::toy()), g.page, ToyGrammar::MAX_BOXES, 12);

    let cfg = DocEmdConfig::default().with_grid(16);
    for (name, c) in [("toy", &same_source), ("random", &noise)] {
        let (asg, emd) = set_match_docemd(c, &reference, &cfg)?;
        let sim = set_score_docsim(c, &reference)?;
        println!("{name:>6} vs reference: Doc-EMD {emd:.4}  DocSim {sim:.4}  ({} matched pairs)", asg.pairs.len());
    }
    Ok(())
}
