//! Bond-line SVG output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::layout::Layout2D;
use crate::chem::selfies::kekulize;
use crate::chem::{BondOrder, MolecularGraph, ValenceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepictStyle {
    pub width: u32,
    pub height: u32,
    /// Upper bound on the drawn bond length; small molecules are not blown up.
    pub max_bond_px: f64,
    pub margin_px: f64,
    pub stroke_width: f64,
    pub font_size: f64,
    /// Gap between the strokes of a double bond.
    pub multiple_bond_gap: f64,
}

impl Default for DepictStyle {
    fn default() -> Self {
        DepictStyle {
            width: 384,
            height: 384,
            max_bond_px: 40.0,
            margin_px: 28.0,
            stroke_width: 2.0,
            font_size: 22.0,
            multiple_bond_gap: 6.0,
        }
    }
}

/// Text drawn at an atom, or `None` for a plain skeletal carbon.
pub fn atom_label(graph: &MolecularGraph, atom: usize) -> Option<String> {
    let a = &graph.atoms()[atom];
    let isolated = graph.degree(atom) == 0;
    if a.element.symbol() == "C" && a.formal_charge == 0 && a.isotope.is_none() && !isolated {
        return None;
    }
    let mut s = String::new();
    if let Some(iso) = a.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(a.element.symbol());
    match graph.hydrogen_count(atom) {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "{c}+");
        }
        c => {
            let _ = write!(s, "{}-", -c);
        }
    }
    Some(s)
}

fn num(v: f64) -> String {
    // fixed precision keeps output byte-stable; avoid "-0.00"
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Renders `graph` with `layout` as a standalone SVG document.
pub fn render_svg(graph: &MolecularGraph, layout: &Layout2D, style: &DepictStyle) -> Vec<u8> {
    let drawn = kekulize(graph, &ValenceModel::default()).unwrap_or_else(|_| graph.clone());
    let atoms: Vec<usize> = (0..graph.atom_count()).filter(|&a| layout.is_placed(a)).collect();

    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &a in &atoms {
        let (x, y) = layout.coords[a];
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let (w, h) = (f64::from(style.width), f64::from(style.height));
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let scale = style
        .max_bond_px
        .min((w - 2.0 * style.margin_px) / span_x)
        .min((h - 2.0 * style.margin_px) / span_y);
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let to_px = |p: (f64, f64)| (w / 2.0 + (p.0 - cx) * scale, h / 2.0 - (p.1 - cy) * scale);

    let labels: Vec<Option<String>> = (0..graph.atom_count()).map(|a| atom_label(graph, a)).collect();
    let clearance = style.font_size * 0.55;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
        style.width, style.height
    );
    for bond in drawn.bonds() {
        if !layout.is_placed(bond.begin) {
            continue;
        }
        let mut p = to_px(layout.coords[bond.begin]);
        let mut q = to_px(layout.coords[bond.end]);
        let d = (q.0 - p.0, q.1 - p.1);
        let len = d.0.hypot(d.1).max(1e-9);
        let unit = (d.0 / len, d.1 / len);
        if labels[bond.begin].is_some() {
            p = (p.0 + unit.0 * clearance, p.1 + unit.1 * clearance);
        }
        if labels[bond.end].is_some() {
            q = (q.0 - unit.0 * clearance, q.1 - unit.1 * clearance);
        }
        let normal = (-unit.1, unit.0);
        let offsets: &[f64] = match bond.order {
            BondOrder::Double => &[-0.5, 0.5],
            BondOrder::Triple => &[-1.0, 0.0, 1.0],
            _ => &[0.0],
        };
        for &o in offsets {
            let off = (normal.0 * o * style.multiple_bond_gap, normal.1 * o * style.multiple_bond_gap);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000000" stroke-width="{}"/>"##,
                num(p.0 + off.0),
                num(p.1 + off.1),
                num(q.0 + off.0),
                num(q.1 + off.1),
                num(style.stroke_width)
            );
        }
    }
    for &a in &atoms {
        if let Some(text) = &labels[a] {
            let (x, y) = to_px(layout.coords[a]);
            let _ = writeln!(
                out,
                r##"<text x="{}" y="{}" font-size="{}" fill="#000000" text-anchor="middle" dominant-baseline="central">{}</text>"##,
                num(x),
                num(y),
                num(style.font_size),
                text
            );
        }
    }
    out.push_str("</svg>\n");
    out.into_bytes()
}
