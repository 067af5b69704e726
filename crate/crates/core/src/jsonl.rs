//! Native line-delimited interchange format.
//!
//! One JSON object per line:
//! `{"page":[w,h],"schema":["text",...],"boxes":[[c,x,y,w,h],...]}` with an
//! optional trailing `"id"` key.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{ClassSchema, Layout, LayoutElement, PageSize};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    page: [u32; 2],
    schema: Vec<String>,
    boxes: Vec<[u64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

pub fn layout_to_line(layout: &Layout) -> Result<String> {
    let rec = Record {
        page: [layout.page().width, layout.page().height],
        schema: layout.schema().names().to_vec(),
        boxes: layout
            .elements()
            .iter()
            .map(|e| [e.class_id as u64, e.x as u64, e.y as u64, e.w as u64, e.h as u64])
            .collect(),
        id: layout.id().map(str::to_owned),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn emit_jsonl<W: Write>(layouts: &[Layout], mut out: W) -> Result<()> {
    for l in layouts {
        writeln!(out, "{}", layout_to_line(l)?)?;
    }
    Ok(())
}

/// Reads layouts back. With `strict`, every record's class names must exist
/// in that schema and class ids are remapped onto it.
pub fn ingest_jsonl<R: BufRead>(input: R, strict: Option<&Arc<ClassSchema>>) -> Result<Vec<Layout>> {
    let mut schemas: HashMap<Vec<String>, Arc<ClassSchema>> = HashMap::new();
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        let ctx = |e: Error| match e {
            Error::Validation(m) => Error::Validation(format!("line {lineno}: {m}")),
            other => other,
        };

        let (schema, remap): (Arc<ClassSchema>, Option<Vec<usize>>) = match strict {
            Some(s) => {
                let remap = rec
                    .schema
                    .iter()
                    .map(|name| {
                        s.index_of(name).ok_or_else(|| {
                            Error::Validation(format!("line {lineno}: unknown class name {name:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (s.clone(), Some(remap))
            }
            None => {
                let s = match schemas.get(&rec.schema) {
                    Some(s) => s.clone(),
                    None => {
                        let s = Arc::new(ClassSchema::new(rec.schema.clone()).map_err(ctx)?);
                        schemas.insert(rec.schema.clone(), s.clone());
                        s
                    }
                };
                (s, None)
            }
        };

        let mut els = Vec::with_capacity(rec.boxes.len());
        for b in &rec.boxes {
            let [c, x, y, w, h] = *b;
            let local = c as usize;
            if local >= rec.schema.len() {
                return Err(Error::Validation(format!(
                    "line {lineno}: class index {c} outside record schema"
                )));
            }
            let class_id = remap.as_ref().map_or(local, |m| m[local]);
            let coord = |v: u64| {
                u32::try_from(v).map_err(|_| Error::Validation(format!("line {lineno}: coordinate {v} too large")))
            };
            els.push(LayoutElement::new(class_id, coord(x)?, coord(y)?, coord(w)?, coord(h)?));
        }
        let page = PageSize::new(rec.page[0], rec.page[1]);
        let mut layout = Layout::new(els, page, schema).map_err(ctx)?;
        if let Some(id) = rec.id {
            layout = layout.with_id(id);
        }
        out.push(layout);
    }
    Ok(out)
}

pub fn read_jsonl_file(path: &std::path::Path, strict: Option<&Arc<ClassSchema>>) -> Result<Vec<Layout>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
    ingest_jsonl(std::io::BufReader::new(f), strict)
}

pub fn write_jsonl_file(path: &std::path::Path, layouts: &[Layout]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    emit_jsonl(layouts, &mut w)?;
    w.flush()?;
    Ok(())
}
