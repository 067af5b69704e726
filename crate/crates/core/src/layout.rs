//! Layout domain model: class-labelled boxes on a page.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Ordered, duplicate-free list of class names. `K` is its length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassSchema {
    names: Vec<String>,
}

impl ClassSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Text, Title, List, Figure, Table.
    pub fn publaynet() -> Self {
        Self::new(["text", "title", "list", "figure", "table"]).unwrap()
    }

    pub fn docbank() -> Self {
        Self::new([
            "abstract",
            "author",
            "caption",
            "equation",
            "figure",
            "footer",
            "list",
            "paragraph",
            "reference",
            "section",
            "table",
            "title",
        ])
        .unwrap()
    }

    pub fn magazine() -> Self {
        Self::new([
            "text",
            "image",
            "headline",
            "text-over-image",
            "headline-over-image",
            "background",
        ])
        .unwrap()
    }

    /// Schema of the synthetic two-column grammar in [`crate::synth`].
    pub fn toy() -> Self {
        Self::new(["text", "title", "figure"]).unwrap()
    }

    /// Resolves a preset name or a comma-separated list of class names.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec {
            "publaynet" => Ok(Self::publaynet()),
            "docbank" => Ok(Self::docbank()),
            "magazine" => Ok(Self::magazine()),
            "toy" => Ok(Self::toy()),
            other => {
                let names: Vec<&str> = other.split(',').map(str::trim).collect();
                if names.iter().any(|n| n.is_empty()) {
                    return Err(Error::Validation(format!("bad schema spec {spec:?}")));
                }
                Self::new(names)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class_id: usize) -> Option<&str> {
        self.names.get(class_id).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One box in integer page pixels, `(x, y)` is the upper-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayoutElement {
    pub class_id: usize,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl LayoutElement {
    pub fn new(class_id: usize, x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { class_id, x, y, w, h }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    fn check(&self, index: usize, page: PageSize, classes: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::Validation(format!("element {index}: zero width or height")));
        }
        if self.right() > page.width as u64 || self.bottom() > page.height as u64 {
            return Err(Error::Validation(format!(
                "element {index}: box ({}, {}, {}, {}) exceeds page {}x{}",
                self.x, self.y, self.w, self.h, page.width, page.height
            )));
        }
        if self.class_id >= classes {
            return Err(Error::Validation(format!(
                "element {index}: class {} outside schema of {classes} classes",
                self.class_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PageSize {
    pub width: u32,
    pub height: u32,
}

impl PageSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

impl fmt::Display for PageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A validated document layout. Element order is kept exactly as given.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    elements: Vec<LayoutElement>,
    page: PageSize,
    schema: Arc<ClassSchema>,
    id: Option<String>,
}

impl Layout {
    pub fn new(
        elements: Vec<LayoutElement>,
        page: PageSize,
        schema: Arc<ClassSchema>,
    ) -> Result<Self> {
        if page.width == 0 || page.height == 0 {
            return Err(Error::Validation(format!("degenerate page {page}")));
        }
        for (i, e) in elements.iter().enumerate() {
            e.check(i, page, schema.len())?;
        }
        Ok(Self { elements, page, schema, id: None })
    }

    pub fn empty(page: PageSize, schema: Arc<ClassSchema>) -> Result<Self> {
        Self::new(Vec::new(), page, schema)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn elements(&self) -> &[LayoutElement] {
        &self.elements
    }

    pub fn page(&self) -> PageSize {
        self.page
    }

    pub fn schema(&self) -> &Arc<ClassSchema> {
        &self.schema
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.schema.len()
    }

    pub fn of_class(&self, class_id: usize) -> impl Iterator<Item = &LayoutElement> {
        self.elements.iter().filter(move |e| e.class_id == class_id)
    }

    pub fn has_class(&self, class_id: usize) -> bool {
        self.elements.iter().any(|e| e.class_id == class_id)
    }

    /// Copy with elements sorted top-to-bottom, then left-to-right.
    pub fn sorted_reading_order(&self) -> Self {
        let mut out = self.clone();
        out.elements.sort_by_key(|e| (e.y, e.x));
        out
    }

    /// Copy without any element of `class_id`.
    pub fn without_class(&self, class_id: usize) -> Self {
        let mut out = self.clone();
        out.elements.retain(|e| e.class_id != class_id);
        out
    }

    pub(crate) fn same_schema(&self, other: &Layout) -> bool {
        Arc::ptr_eq(&self.schema, &other.schema) || *self.schema == *other.schema
    }
}

/// Fails unless every layout in both slices uses one schema.
pub fn check_shared_schema<'a>(layouts: impl IntoIterator<Item = &'a Layout>) -> Result<()> {
    let mut first: Option<&Layout> = None;
    for l in layouts {
        match first {
            None => first = Some(l),
            Some(f) if !f.same_schema(l) => {
                return Err(Error::Validation(format!(
                    "schema mismatch: {:?} vs {:?}",
                    f.schema().names(),
                    l.schema().names()
                )))
            }
            _ => {}
        }
    }
    Ok(())
}
