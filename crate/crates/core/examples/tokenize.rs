//! Quantize a layout into tokens and decode it back.

use std::sync::Arc;

use doclayout::layout::{ClassSchema, Layout, LayoutElement, PageSize};
use doclayout::tokens::{dequantize, quantize, DecodeMode, Vocabulary};

fn main() -> doclayout::Result<()> {
    let schema = Arc::new(ClassSchema::publaynet());
    let vocab = Vocabulary::for_schema(128, &schema)?;
    let page = PageSize::new(612, 792);
    let layout = Layout::new(
        vec![
            LayoutElement::new(1, 72, 60, 468, 40),
            LayoutElement::new(0, 72, 120, 220, 560),
            LayoutElement::new(3, 320, 120, 220, 300),
        ],
        page,
        schema.clone(),
    )?;

    let seq = quantize(&layout, &vocab)?;
    println!("vocabulary: {} geometry + {} class + 3 control = {}", vocab.grid(), vocab.classes(), vocab.size());
    println!("tokens ({}): {:?}", seq.len(), seq.tokens);

    let padded = seq.clone().padded(32, &vocab)?;
    let (back, report) = dequantize(&padded, &vocab, &schema, DecodeMode::Strict)?;
    for (a, b) in layout.elements().iter().zip(back.elements()) {
        println!("{:>7} {:?} -> {:?}", schema.name(a.class_id).unwrap(), [a.x, a.y, a.w, a.h], [b.x, b.y, b.w, b.h]);
    }
    println!("max error allowed per coordinate: {:.2} px", 792.0 / (2.0 * 127.0));

    // A class token in a geometry slot: strict decoding refuses, repair drops the group.
    let mut broken = seq.tokens.clone();
    broken[3] = vocab.class_token(2);
    let broken = doclayout::tokens::TokenSequence { tokens: broken, page };
    println!("strict: {:?}", dequantize(&broken, &vocab, &schema, DecodeMode::Strict).err());
    let (repaired, report2) = dequantize(&broken, &vocab, &schema, DecodeMode::Repair)?;
    println!("repair: {} boxes kept, {} groups dropped", repaired.len(), report2.dropped_groups);
    assert!(report.is_well_formed());
    Ok(())
}
