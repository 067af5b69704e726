//! Read a COCO detection file into layouts and write them as JSONL.
//!
//! cargo run --example ingest_coco -- annotations.json out.jsonl

use std::sync::Arc;

use doclayout::coco::ingest_coco;
use doclayout::jsonl::{emit_jsonl, write_jsonl_file};
use doclayout::layout::ClassSchema;

const SAMPLE: &str = r#"{
  "images": [
    {"id": 341, "width": 612, "height": 792, "file_name": "PMC1.jpg"},
    {"id": 342, "width": 612, "height": 792, "file_name": "PMC2.jpg"}
  ],
  "annotations": [
    {"image_id": 341, "category_id": 2, "bbox": [56.1, 40.0, 500.3, 30.2]},
    {"image_id": 341, "category_id": 1, "bbox": [56.0, 90.0, 240.0, 600.0]},
    {"image_id": 342, "category_id": 5, "bbox": [300.0, 500.0, 400.0, 200.0]},
    {"image_id": 342, "category_id": 1, "bbox": [56.0, 90.0, 0.0, 600.0]}
  ],
  "categories": [
    {"id": 1, "name": "text"}, {"id": 2, "name": "title"}, {"id": 3, "name": "list"},
    {"id": 4, "name": "table"}, {"id": 5, "name": "figure"}
  ]
}"#;

fn main() -> doclayout::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = match args.first() {
        Some(p) => std::fs::read_to_string(p)?,
        None => SAMPLE.to_owned(),
    };
    let out = ingest_coco(&text, Some(Arc::new(ClassSchema::publaynet())))?;
    println!(
        "{} layouts, {} boxes; dropped {}, clipped {}, orphaned {}",
        out.layouts.len(),
        out.layouts.iter().map(|l| l.len()).sum::<usize>(),
        out.dropped,
        out.clipped,
        out.orphaned
    );
    match args.get(1) {
        Some(p) => write_jsonl_file(std::path::Path::new(p), &out.layouts)?,
        None => emit_jsonl(&out.layouts, std::io::stdout().lock())?,
    }
    Ok(())
}
