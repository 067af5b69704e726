//! Reader for the subset of COCO detection JSON used by layout datasets.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::layout::{ClassSchema, Layout, LayoutElement, PageSize};

#[derive(Debug, Deserialize)]
struct CocoDocument {
    images: Option<Vec<CocoImage>>,
    annotations: Option<Vec<CocoAnnotation>>,
    categories: Option<Vec<CocoCategory>>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: serde_json::Value,
    width: f64,
    height: f64,
    #[serde(default)]
    file_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: serde_json::Value,
    category_id: serde_json::Value,
    bbox: [f64; 4],
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: serde_json::Value,
    name: String,
}

#[derive(Debug)]
pub struct CocoIngest {
    pub layouts: Vec<Layout>,
    pub schema: Arc<ClassSchema>,
    /// Annotations with zero or negative extent (before or after clipping).
    pub dropped: usize,
    /// Annotations trimmed to the page.
    pub clipped: usize,
    /// Annotations whose image or category id is unknown.
    pub orphaned: usize,
}

fn key(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parse a COCO document into one layout per image, in `images` order.
///
/// Categories are remapped onto a dense `[0, K)` range, following `schema`
/// by name when given, otherwise the order of the `categories` array.
pub fn ingest_coco(json: &str, schema: Option<Arc<ClassSchema>>) -> Result<CocoIngest> {
    let doc: CocoDocument =
        serde_json::from_str(json).map_err(|e| Error::Format(format!("COCO JSON: {e}")))?;
    let missing = |name: &str| Error::Format(format!("COCO document has no `{name}` array"));
    let images = doc.images.ok_or_else(|| missing("images"))?;
    let annotations = doc.annotations.ok_or_else(|| missing("annotations"))?;
    let categories = doc.categories.ok_or_else(|| missing("categories"))?;

    let schema = match schema {
        Some(s) => s,
        None => Arc::new(ClassSchema::new(categories.iter().map(|c| c.name.clone()))?),
    };
    let mut class_of = HashMap::new();
    for c in &categories {
        let idx = schema
            .index_of(&c.name)
            .or_else(|| schema.index_of(&c.name.to_lowercase()))
            .ok_or_else(|| Error::Validation(format!("unknown class name {:?}", c.name)))?;
        class_of.insert(key(&c.id), idx);
    }

    let mut image_index = HashMap::new();
    let mut pages = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        if !(img.width >= 1.0 && img.height >= 1.0) {
            return Err(Error::Format(format!("image {} has degenerate size", key(&img.id))));
        }
        image_index.insert(key(&img.id), i);
        pages.push(PageSize::new(img.width.round() as u32, img.height.round() as u32));
    }

    let mut boxes: Vec<Vec<LayoutElement>> = vec![Vec::new(); images.len()];
    let (mut dropped, mut clipped, mut orphaned) = (0, 0, 0);
    for ann in &annotations {
        let (Some(&img), Some(&class_id)) =
            (image_index.get(&key(&ann.image_id)), class_of.get(&key(&ann.category_id)))
        else {
            orphaned += 1;
            continue;
        };
        let page = pages[img];
        let [bx, by, bw, bh] = ann.bbox.map(f64::round);
        if !(bw > 0.0 && bh > 0.0) || !bx.is_finite() || !by.is_finite() {
            dropped += 1;
            continue;
        }
        let x0 = bx.max(0.0);
        let y0 = by.max(0.0);
        let x1 = (bx + bw).min(page.width as f64);
        let y1 = (by + bh).min(page.height as f64);
        if x1 <= x0 || y1 <= y0 {
            dropped += 1;
            continue;
        }
        if x0 != bx || y0 != by || x1 != bx + bw || y1 != by + bh {
            clipped += 1;
        }
        boxes[img].push(LayoutElement::new(
            class_id,
            x0 as u32,
            y0 as u32,
            (x1 - x0) as u32,
            (y1 - y0) as u32,
        ));
    }

    let layouts = images
        .iter()
        .zip(pages)
        .zip(boxes)
        .map(|((img, page), els)| {
            let id = img.file_name.clone().unwrap_or_else(|| key(&img.id));
            Layout::new(els, page, schema.clone()).map(|l| l.with_id(id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CocoIngest { layouts, schema, dropped, clipped, orphaned })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "images": [{"id": 7, "width": 100, "height": 200, "file_name": "a.png"}],
        "annotations": [{"image_id": 7, "category_id": 3, "bbox": [10, 20, 30, 40]}],
        "categories": [{"id": 3, "name": "text"}]
    }"#;

    #[test]
    fn minimal_document() {
        let out = ingest_coco(MINIMAL, None).unwrap();
        assert_eq!(out.layouts.len(), 1);
        let l = &out.layouts[0];
        assert_eq!(l.page(), PageSize::new(100, 200));
        assert_eq!(l.elements(), &[LayoutElement::new(0, 10, 20, 30, 40)]);
        assert_eq!(l.id(), Some("a.png"));
        assert_eq!(out.schema.names(), &["text"]);
    }

    #[test]
    fn zero_width_dropped() {
        let doc = MINIMAL.replace("[10, 20, 30, 40]", "[10, 20, 0, 40]");
        let out = ingest_coco(&doc, None).unwrap();
        assert!(out.layouts[0].is_empty());
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn overhanging_box_is_clipped() {
        let doc = MINIMAL.replace("[10, 20, 30, 40]", "[90, -5, 30, 40]");
        let out = ingest_coco(&doc, None).unwrap();
        assert_eq!(out.layouts[0].elements(), &[LayoutElement::new(0, 90, 0, 10, 35)]);
        assert_eq!(out.clipped, 1);
    }

    #[test]
    fn missing_arrays_are_format_errors() {
        let err = ingest_coco(r#"{"images": [], "annotations": []}"#, None).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("categories")));
    }

    #[test]
    fn remaps_onto_named_schema() {
        let doc = r#"{
            "images": [{"id": 1, "width": 50, "height": 50}],
            "annotations": [
                {"image_id": 1, "category_id": 5, "bbox": [0, 0, 5, 5]},
                {"image_id": 1, "category_id": 4, "bbox": [1, 1, 5, 5]},
                {"image_id": 1, "category_id": 1, "bbox": [2, 2, 5, 5]}
            ],
            "categories": [{"id": 1, "name": "text"}, {"id": 4, "name": "table"}, {"id": 5, "name": "figure"}]
        }"#;
        let out = ingest_coco(doc, Some(Arc::new(ClassSchema::publaynet()))).unwrap();
        let classes: Vec<_> = out.layouts[0].elements().iter().map(|e| e.class_id).collect();
        // annotation order preserved, ids follow the publaynet schema order
        assert_eq!(classes, vec![3, 4, 0]);
        assert_eq!(out.layouts[0].id(), Some("1"));
    }
}
