//! Flattened token serialization of layouts.
//!
//! A layout of `N` boxes becomes `BOS, (class, x, y, w, h) * N, EOS, PAD*`.
//! Geometry ids occupy `[0, G)`, class ids `[G, G + K)` and the three control
//! tokens follow. Coordinates are quantized on a `(G - 1)` denominator grid,
//! so `0` and the page extent are exact fixed points.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::layout::{ClassSchema, Layout, LayoutElement, PageSize};

pub type TokenId = u32;

pub const DEFAULT_GRID: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    grid: usize,
    classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Geometry(u32),
    Class(usize),
    Bos,
    Eos,
    Pad,
}

impl Vocabulary {
    pub fn new(grid: usize, classes: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::Validation(format!("geometry grid must be >= 2, got {grid}")));
        }
        if grid + classes + 3 > TokenId::MAX as usize {
            return Err(Error::Validation("vocabulary does not fit in u32 ids".into()));
        }
        let v = Self { grid, classes };
        debug_assert!(v.class_token(0) as usize >= grid);
        Ok(v)
    }

    pub fn for_schema(grid: usize, schema: &ClassSchema) -> Result<Self> {
        Self::new(grid, schema.len())
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn size(&self) -> usize {
        self.grid + self.classes + 3
    }

    pub fn class_token(&self, class_id: usize) -> TokenId {
        (self.grid + class_id) as TokenId
    }

    pub fn bos(&self) -> TokenId {
        (self.grid + self.classes) as TokenId
    }

    pub fn eos(&self) -> TokenId {
        self.bos() + 1
    }

    pub fn pad(&self) -> TokenId {
        self.bos() + 2
    }

    pub fn kind(&self, token: TokenId) -> Option<TokenKind> {
        let t = token as usize;
        if t < self.grid {
            Some(TokenKind::Geometry(token))
        } else if t < self.grid + self.classes {
            Some(TokenKind::Class(t - self.grid))
        } else if token == self.bos() {
            Some(TokenKind::Bos)
        } else if token == self.eos() {
            Some(TokenKind::Eos)
        } else if token == self.pad() {
            Some(TokenKind::Pad)
        } else {
            None
        }
    }

    /// `round(v / extent * (G - 1))`, ties rounding up.
    pub fn quantize_coord(&self, v: u32, extent: u32) -> TokenId {
        let g1 = (self.grid - 1) as u64;
        let num = 2 * v as u64 * g1 + extent as u64;
        (num / (2 * extent as u64)).min(g1) as TokenId
    }

    /// Inverse of [`Self::quantize_coord`], to the nearest pixel.
    pub fn dequantize_coord(&self, q: TokenId, extent: u32) -> u32 {
        let g1 = (self.grid - 1) as u64;
        ((2 * q as u64 * extent as u64 + g1) / (2 * g1)) as u32
    }
}

/// Vocabulary ids plus the page the geometry was quantized against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<TokenId>,
    pub page: PageSize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Right-pads with PAD to `len`. Fails if the sequence is already longer.
    pub fn padded(mut self, len: usize, vocab: &Vocabulary) -> Result<Self> {
        if self.tokens.len() > len {
            return Err(Error::Validation(format!(
                "sequence of {} tokens does not fit max length {len}",
                self.tokens.len()
            )));
        }
        self.tokens.resize(len, vocab.pad());
        Ok(self)
    }

    pub fn with_page(mut self, page: PageSize) -> Self {
        self.page = page;
        self
    }
}

/// Serialize a layout into `BOS, groups..., EOS` (length `5N + 2`).
pub fn quantize(layout: &Layout, vocab: &Vocabulary) -> Result<TokenSequence> {
    if layout.num_classes() > vocab.classes() {
        return Err(Error::Validation(format!(
            "layout schema has {} classes, vocabulary only {}",
            layout.num_classes(),
            vocab.classes()
        )));
    }
    let page = layout.page();
    let mut tokens = Vec::with_capacity(5 * layout.len() + 2);
    tokens.push(vocab.bos());
    for e in layout.elements() {
        tokens.push(vocab.class_token(e.class_id));
        tokens.push(vocab.quantize_coord(e.x, page.width));
        tokens.push(vocab.quantize_coord(e.y, page.height));
        tokens.push(vocab.quantize_coord(e.w, page.width));
        tokens.push(vocab.quantize_coord(e.h, page.height));
    }
    tokens.push(vocab.eos());
    Ok(TokenSequence { tokens, page })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Any framing or typing problem is an error.
    Strict,
    /// Offending groups are dropped and counted.
    Repair,
}

/// What [`dequantize`] had to fix up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeReport {
    /// 5-token groups discarded for wrong token types.
    pub dropped_groups: usize,
    /// Missing BOS / EOS or non-PAD tokens after EOS.
    pub frame_issues: usize,
    /// Boxes whose decoded extent had to be clamped into the page.
    pub clipped: usize,
}

impl DecodeReport {
    /// True when the token stream was structurally well formed.
    pub fn is_well_formed(&self) -> bool {
        self.dropped_groups == 0 && self.frame_issues == 0
    }
}

fn decode_box(
    vocab: &Vocabulary,
    page: PageSize,
    class_id: usize,
    q: [TokenId; 4],
    report: &mut DecodeReport,
) -> LayoutElement {
    let mut x = vocab.dequantize_coord(q[0], page.width);
    let mut y = vocab.dequantize_coord(q[1], page.height);
    let w0 = vocab.dequantize_coord(q[2], page.width);
    let h0 = vocab.dequantize_coord(q[3], page.height);
    x = x.min(page.width - 1);
    y = y.min(page.height - 1);
    let w = w0.clamp(1, page.width - x);
    let h = h0.clamp(1, page.height - y);
    if w != w0 || h != h0 {
        report.clipped += 1;
    }
    LayoutElement::new(class_id, x, y, w, h)
}

/// Decode a token sequence back into a layout on `seq.page`.
pub fn dequantize(
    seq: &TokenSequence,
    vocab: &Vocabulary,
    schema: &Arc<ClassSchema>,
    mode: DecodeMode,
) -> Result<(Layout, DecodeReport)> {
    let strict = mode == DecodeMode::Strict;
    let fail = |msg: String| -> Result<()> {
        if strict {
            Err(Error::Format(msg))
        } else {
            Ok(())
        }
    };
    if schema.len() > vocab.classes() {
        return Err(Error::Validation("schema larger than vocabulary".into()));
    }
    let page = seq.page;
    if page.width == 0 || page.height == 0 {
        return Err(Error::Validation(format!("degenerate page {page}")));
    }
    let toks = &seq.tokens;
    let mut report = DecodeReport::default();
    let mut elements = Vec::new();

    let mut pos = 0;
    if toks.first() == Some(&vocab.bos()) {
        pos = 1;
    } else {
        fail("sequence does not start with BOS".into())?;
        report.frame_issues += 1;
    }

    let mut saw_eos = false;
    while pos < toks.len() {
        match vocab.kind(toks[pos]) {
            Some(TokenKind::Eos) => {
                saw_eos = true;
                pos += 1;
                break;
            }
            Some(TokenKind::Pad) => {
                // PAD before EOS: treat as a truncated frame.
                fail(format!("PAD at position {pos} before EOS"))?;
                report.frame_issues += 1;
                break;
            }
            _ => {}
        }
        let group = &toks[pos..(pos + 5).min(toks.len())];
        let kinds: Vec<Option<TokenKind>> = group.iter().map(|&t| vocab.kind(t)).collect();
        let hit_control = kinds[1..]
            .iter()
            .position(|k| matches!(k, Some(TokenKind::Eos | TokenKind::Pad | TokenKind::Bos)));
        let typed = group.len() == 5
            && matches!(kinds[0], Some(TokenKind::Class(c)) if c < schema.len())
            && kinds[1..].iter().all(|k| matches!(k, Some(TokenKind::Geometry(_))));
        if typed {
            let Some(TokenKind::Class(class_id)) = kinds[0] else { unreachable!() };
            let q = [group[1], group[2], group[3], group[4]];
            elements.push(decode_box(vocab, page, class_id, q, &mut report));
            pos += 5;
            continue;
        }
        fail(format!("malformed group at position {pos}: {group:?}"))?;
        report.dropped_groups += 1;
        match hit_control {
            // Resume at the control token so EOS/PAD still terminate the frame.
            Some(off) => pos += 1 + off,
            None => pos += group.len(),
        }
    }
    if !saw_eos {
        fail("missing EOS".into())?;
        report.frame_issues += 1;
    }
    if toks[pos.min(toks.len())..].iter().any(|&t| t != vocab.pad()) {
        fail("non-PAD tokens after EOS".into())?;
        report.frame_issues += 1;
    }
    let layout = Layout::new(elements, page, schema.clone())?;
    Ok((layout, report))
}
