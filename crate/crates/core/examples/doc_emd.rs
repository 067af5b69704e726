//! Doc-EMD between two page layouts, with its per-class breakdown.

use std::sync::Arc;

use doclayout::layout::{ClassSchema, Layout, LayoutElement, PageSize};
use doclayout::metrics::{doc_emd, DocEmdConfig, MetricReport};

fn main() -> doclayout::Result<()> {
    let schema = Arc::new(ClassSchema::publaynet());
    let page = PageSize::new(612, 792);
    let s = Layout::new(
        vec![
            LayoutElement::new(1, 50, 40, 512, 36),
            LayoutElement::new(0, 50, 100, 250, 640),
            LayoutElement::new(0, 312, 100, 250, 300),
            LayoutElement::new(3, 312, 420, 250, 320),
        ],
        page,
        schema.clone(),
    )?
    .with_id("two-column");
    let t = Layout::new(
        vec![
            LayoutElement::new(1, 50, 40, 512, 36),
            LayoutElement::new(0, 50, 100, 512, 400),
            LayoutElement::new(4, 50, 520, 512, 220),
        ],
        page,
        schema.clone(),
    )?
    .with_id("one-column");

    let names = schema.names().to_vec();
    println!("{}", MetricReport::csv_header(&names));
    for grid in [32, 64, 128] {
        let r = doc_emd(&s, &t, &DocEmdConfig::default().with_grid(grid))?;
        println!("{}", r.csv_row(&format!("{}@{grid}", s.id().unwrap()), t.id().unwrap(), &names));
    }
    let r = doc_emd(&s, &t, &DocEmdConfig::default().with_lambda(0.5))?;
    println!("lambda 0.5: total {:.4}, penalties {:?}", r.total, r.penalty_classes);
    Ok(())
}
