//! Rasterizer for the SVG subset emitted by [`super::render_svg`], plus PNG
//! encoding.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DepictError;

const GLYPHS: &str = include_str!("../../assets/glyphs_6x11.txt");

/// Row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

pub const WHITE: [u8; 3] = [255, 255, 255];

impl RasterImage {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> RasterImage {
        let pixels = fill.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        RasterImage { width, height, pixels }
    }

    pub fn white(width: u32, height: u32) -> RasterImage {
        RasterImage::new(width, height, WHITE)
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Pixels that are not pure white.
    pub fn ink_pixels(&self) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p != WHITE).count()
    }

    pub fn to_png(&self) -> Result<Vec<u8>, DepictError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(|e| DepictError::Png(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| DepictError::Png(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<RasterImage, DepictError> {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().map_err(|e| DepictError::Png(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| DepictError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(|e| DepictError::Png(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(DepictError::Png(format!(
                "expected 8-bit RGB, found {:?} {:?}",
                info.color_type, info.bit_depth
            )));
        }
        buf.truncate(info.buffer_size());
        Ok(RasterImage {
            width: info.width,
            height: info.height,
            pixels: buf,
        })
    }
}

struct Font {
    width: usize,
    height: usize,
    glyphs: HashMap<char, Vec<bool>>,
}

fn font() -> &'static Font {
    static FONT: OnceLock<Font> = OnceLock::new();
    FONT.get_or_init(|| {
        let mut lines = GLYPHS.lines().filter(|l| !l.starts_with("# ") && !l.is_empty());
        let mut width = 0;
        let mut height = 0;
        let mut glyphs = HashMap::new();
        while let Some(line) = lines.next() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("version") => {}
                Some("size") => {
                    width = parts.next().and_then(|v| v.parse().ok()).expect("glyph width");
                    height = parts.next().and_then(|v| v.parse().ok()).expect("glyph height");
                }
                Some("glyph") => {
                    let code: u32 = parts.next().and_then(|v| v.parse().ok()).expect("glyph code");
                    let mut bits = Vec::with_capacity(width * height);
                    for _ in 0..height {
                        let row = lines.next().expect("glyph row");
                        bits.extend(row.chars().map(|c| c == '#'));
                    }
                    glyphs.insert(char::from_u32(code).expect("glyph code"), bits);
                }
                other => panic!("bad glyph table line {other:?}"),
            }
        }
        Font { width, height, glyphs }
    })
}

fn parse_color(v: Option<&str>) -> Result<Option<[u8; 3]>, DepictError> {
    match v {
        None | Some("none") => Ok(None),
        Some(hex) if hex.len() == 7 && hex.starts_with('#') => {
            let c = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16);
            match (c(1), c(3), c(5)) {
                (Ok(r), Ok(g), Ok(b)) => Ok(Some([r, g, b])),
                _ => Err(DepictError::UnsupportedSvgFeature(format!("color {hex}"))),
            }
        }
        Some(other) => Err(DepictError::UnsupportedSvgFeature(format!("color {other}"))),
    }
}

fn attr_f64(node: roxmltree::Node<'_, '_>, name: &str) -> Result<f64, DepictError> {
    node.attribute(name)
        .unwrap_or("0")
        .parse()
        .map_err(|_| DepictError::UnsupportedSvgFeature(format!("non-numeric {name} on <{}>", node.tag_name().name())))
}

struct Canvas {
    img: RasterImage,
    sx: f64,
    sy: f64,
}

impl Canvas {
    fn fill_rect(&mut self, x: f64, y: f64, w: f64, h: f64, rgb: [u8; 3]) {
        let x0 = (x * self.sx).round().max(0.0) as u32;
        let y0 = (y * self.sy).round().max(0.0) as u32;
        let x1 = (((x + w) * self.sx).round().max(0.0) as u32).min(self.img.width);
        let y1 = (((y + h) * self.sy).round().max(0.0) as u32).min(self.img.height);
        for py in y0..y1 {
            for px in x0..x1 {
                self.img.set(px, py, rgb);
            }
        }
    }

    /// Pixels whose centre lies within half the stroke width of the segment.
    fn stroke_segment(&mut self, a: (f64, f64), b: (f64, f64), width: f64, rgb: [u8; 3]) {
        let (ax, ay) = (a.0 * self.sx, a.1 * self.sy);
        let (bx, by) = (b.0 * self.sx, b.1 * self.sy);
        let half = (width * self.sx.min(self.sy) / 2.0).max(0.5);
        let min_x = (ax.min(bx) - half).floor().max(0.0) as i64;
        let max_x = ((ax.max(bx) + half).ceil() as i64).min(i64::from(self.img.width) - 1);
        let min_y = (ay.min(by) - half).floor().max(0.0) as i64;
        let max_y = ((ay.max(by) + half).ceil() as i64).min(i64::from(self.img.height) - 1);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        for py in min_y..=max_y {
            for px in min_x..=max_x {
                let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((cx - ax) * dx + (cy - ay) * dy) / len2).clamp(0.0, 1.0)
                };
                let (qx, qy) = (ax + t * dx, ay + t * dy);
                if (cx - qx).powi(2) + (cy - qy).powi(2) <= half * half {
                    self.img.set(px as u32, py as u32, rgb);
                }
            }
        }
    }

    /// Draws text centred on (x, y) with nearest-neighbour glyph scaling.
    fn text(&mut self, x: f64, y: f64, size: f64, text: &str, rgb: [u8; 3]) -> Result<(), DepictError> {
        let f = font();
        let scale = ((size * self.sy / f.height as f64).round() as usize).max(1);
        let chars: Vec<char> = text.chars().collect();
        let total_w = chars.len() * f.width * scale;
        let total_h = f.height * scale;
        let left = (x * self.sx - total_w as f64 / 2.0).round() as i64;
        let top = (y * self.sy - total_h as f64 / 2.0).round() as i64;
        for (k, ch) in chars.iter().enumerate() {
            let bits = f
                .glyphs
                .get(ch)
                .ok_or_else(|| DepictError::UnsupportedSvgFeature(format!("glyph {ch:?}")))?;
            for gy in 0..f.height {
                for gx in 0..f.width {
                    if !bits[gy * f.width + gx] {
                        continue;
                    }
                    for oy in 0..scale {
                        for ox in 0..scale {
                            let px = left + ((k * f.width + gx) * scale + ox) as i64;
                            let py = top + (gy * scale + oy) as i64;
                            if px >= 0 && py >= 0 && px < i64::from(self.img.width) && py < i64::from(self.img.height) {
                                self.img.set(px as u32, py as u32, rgb);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rasterizes the supported SVG subset (`rect`, `line`, `polyline`, `text`)
/// onto a white canvas of the requested size.
pub fn rasterize(svg: &[u8], width: u32, height: u32) -> Result<RasterImage, DepictError> {
    let text = std::str::from_utf8(svg).map_err(|_| DepictError::UnsupportedSvgFeature("non-UTF-8 document".into()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| DepictError::UnsupportedSvgFeature(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(DepictError::UnsupportedSvgFeature(format!("root <{}>", root.tag_name().name())));
    }
    let svg_w = attr_f64(root, "width")?;
    let svg_h = attr_f64(root, "height")?;
    if svg_w <= 0.0 || svg_h <= 0.0 {
        return Err(DepictError::UnsupportedSvgFeature("missing document size".into()));
    }
    let mut canvas = Canvas {
        img: RasterImage::white(width, height),
        sx: f64::from(width) / svg_w,
        sy: f64::from(height) / svg_h,
    };
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "rect" => {
                if let Some(rgb) = parse_color(node.attribute("fill"))? {
                    canvas.fill_rect(
                        attr_f64(node, "x")?,
                        attr_f64(node, "y")?,
                        attr_f64(node, "width")?,
                        attr_f64(node, "height")?,
                        rgb,
                    );
                }
            }
            "line" => {
                if let Some(rgb) = parse_color(node.attribute("stroke"))? {
                    let w = node.attribute("stroke-width").map_or(Ok(1.0), |_| attr_f64(node, "stroke-width"))?;
                    canvas.stroke_segment(
                        (attr_f64(node, "x1")?, attr_f64(node, "y1")?),
                        (attr_f64(node, "x2")?, attr_f64(node, "y2")?),
                        w,
                        rgb,
                    );
                }
            }
            "polyline" => {
                if let Some(rgb) = parse_color(node.attribute("stroke"))? {
                    let w = node.attribute("stroke-width").map_or(Ok(1.0), |_| attr_f64(node, "stroke-width"))?;
                    let nums: Vec<f64> = node
                        .attribute("points")
                        .unwrap_or("")
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|_| DepictError::UnsupportedSvgFeature(format!("point {s}"))))
                        .collect::<Result<_, _>>()?;
                    for pair in nums.chunks_exact(2).collect::<Vec<_>>().windows(2) {
                        canvas.stroke_segment((pair[0][0], pair[0][1]), (pair[1][0], pair[1][1]), w, rgb);
                    }
                }
            }
            "text" => {
                let rgb = parse_color(node.attribute("fill"))?.unwrap_or([0, 0, 0]);
                let size = node.attribute("font-size").map_or(Ok(16.0), |_| attr_f64(node, "font-size"))?;
                let content: String = node.children().filter_map(|c| c.text()).collect();
                canvas.text(attr_f64(node, "x")?, attr_f64(node, "y")?, size, content.trim(), rgb)?;
            }
            other => return Err(DepictError::UnsupportedSvgFeature(format!("element <{other}>"))),
        }
    }
    Ok(canvas.img)
}
