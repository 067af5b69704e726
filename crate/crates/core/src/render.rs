//! SVG rendering of layouts: one colored rectangle per box plus a class
//! legend drawn as text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::layout::Layout;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
    "#393b79", "#637939",
];

/// Color of the `class_id`-th schema class.
pub fn class_color(class_id: usize) -> String {
    match PALETTE.get(class_id) {
        Some(c) => (*c).to_owned(),
        None => format!("hsl({}, 60%, 45%)", (class_id * 137) % 360),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG document whose `viewBox` is the page in pixels. Boxes are the only
/// `<rect>` elements; the legend is text.
pub fn render_svg(layout: &Layout) -> String {
    let page = layout.page();
    let schema = layout.schema();
    let display_w = 600.0;
    let display_h = display_w * page.height as f64 / page.width as f64;
    let stroke = (page.width.max(page.height) as f64 / 400.0).max(0.5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" width="{display_w}" height="{display_h:.1}" style="background:#ffffff">"#,
        page.width, page.height
    );
    if let Some(id) = layout.id() {
        let _ = writeln!(s, "  <title>{}</title>", escape(id));
    }
    for e in layout.elements() {
        let color = class_color(e.class_id);
        let name = escape(schema.name(e.class_id).unwrap_or("?"));
        let _ = writeln!(
            s,
            r#"  <rect class="box" data-class="{name}" x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="{stroke}"/>"#,
            e.x, e.y, e.w, e.h
        );
    }
    let font = page.height as f64 / 60.0;
    let _ = writeln!(s, r#"  <g class="legend" font-family="sans-serif" font-size="{font:.1}">"#);
    for (i, name) in schema.names().iter().enumerate() {
        let y = page.height as f64 - font * (schema.len() - i) as f64;
        let _ = writeln!(
            s,
            r#"    <text x="{:.1}" y="{y:.1}" fill="{}">&#9632; {}</text>"#,
            font / 2.0,
            class_color(i),
            escape(name)
        );
    }
    s.push_str("  </g>\n</svg>\n");
    s
}

/// Writes one SVG per layout into `dir` (created if missing) and returns the
/// paths in corpus order.
pub fn render_corpus(layouts: &[Layout], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(layouts.len());
    for (i, l) in layouts.iter().enumerate() {
        let stem: String = l
            .id()
            .unwrap_or("layout")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let path = dir.join(format!("{i:05}-{stem}.svg"));
        std::fs::write(&path, render_svg(l))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ClassSchema, LayoutElement, PageSize};
    use std::sync::Arc;

    #[test]
    fn empty_page() {
        let l = Layout::empty(PageSize::new(100, 200), Arc::new(ClassSchema::toy())).unwrap();
        let svg = render_svg(&l);
        assert!(svg.contains(r#"viewBox="0 0 100 200""#));
        assert!(!svg.contains("<rect"));
        assert_eq!(svg.matches("<text").count(), 3);
    }

    #[test]
    fn full_page_box() {
        let e = LayoutElement::new(1, 0, 0, 100, 200);
        let l = Layout::new(vec![e], PageSize::new(100, 200), Arc::new(ClassSchema::toy())).unwrap();
        let svg = render_svg(&l);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(svg.contains(r#"data-class="title" x="0" y="0" width="100" height="200""#));
    }
}
