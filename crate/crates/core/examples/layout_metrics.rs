//! DocSim, overlap, coverage and sequence Wasserstein on small corpora.

use std::sync::Arc;

use doclayout::layout::{ClassSchema, PageSize};
use doclayout::metrics::{corpus_summary, coverage_pct, docsim, overlap_pct, wasserstein_seq, OverlapMode};
use doclayout::synth::{random_corpus, ToyGrammar};

fn main() -> doclayout::Result<()> {
    let grammar = ToyGrammar::default();
    let toy = grammar.corpus(200, 1);
    let noise = random_corpus(200, &Arc::new(ClassSchema::toy()), PageSize::new(612, 792), 8, 2);

    let l = &toy[0];
    println!("first toy page: {} boxes", l.len());
    println!("  coverage {:.2}%  overlap {:.2}%", coverage_pct(l), overlap_pct(l, OverlapMode::Union));
    println!("  docsim with itself {:.4}, with toy[1] {:.4}, with a random page {:.4}",
        docsim(l, l)?, docsim(l, &toy[1])?, docsim(l, &noise[0])?);

    for (name, c) in [("toy", &toy), ("random", &noise)] {
        let s = corpus_summary(c, OverlapMode::Union);
        let pair = corpus_summary(c, OverlapMode::PairwiseSum);
        println!(
            "{name:>6}: coverage {:.2}%  overlap {:.3}% (pairwise sum {:.3}%)  boxes {:.2} [{}..{}]  {:?}",
            s.mean_coverage, s.mean_overlap, pair.mean_overlap, s.boxes_mean, s.boxes_min, s.boxes_max, s.class_histogram
        );
    }

    let w = wasserstein_seq(&toy[..100], &toy[100..])?;
    let v = wasserstein_seq(&toy[..100], &noise[..100])?;
    println!("toy vs toy:    class {:.4}  bbox {:.4}", w.class_w, w.bbox_w.unwrap());
    println!("toy vs random: class {:.4}  bbox {:.4}", v.class_w, v.bbox_w.unwrap());
    Ok(())
}
