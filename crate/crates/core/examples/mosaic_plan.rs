//! Pick a real crop for every generated box.

use doclayout::layout::{Layout, LayoutElement};
use doclayout::mosaic::{mosaic_plan, MosaicWeights};
use doclayout::synth::ToyGrammar;

fn main() -> doclayout::Result<()> {
    let g = ToyGrammar::default();
    let real: Vec<Layout> =
        g.corpus(50, 1).into_iter().enumerate().map(|(i, l)| l.with_id(format!("page-{i:03}.png"))).collect();
    let generated = vec![Layout::new(
        vec![
            LayoutElement::new(1, 40, 40, 530, 50),
            LayoutElement::new(0, 40, 110, 260, 300),
            LayoutElement::new(2, 320, 110, 250, 250),
        ],
        g.page,
        real[0].schema().clone(),
    )?];
    let plan = mosaic_plan(&generated, &real, MosaicWeights::default())?;
    for e in &plan.entries {
        println!(
            "{:>6} {:?} <- {} {:?} cost {:.4}",
            e.class,
            e.target_bbox,
            e.source_image.as_deref().unwrap_or("-"),
            e.source_bbox,
            e.cost.unwrap_or(f64::NAN)
        );
    }
    println!("{} unmatched", plan.unmatched);
    Ok(())
}
