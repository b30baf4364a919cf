//! Image augmentations used to build positive pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::raster::{RasterImage, WHITE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Transform {
    Rotate45,
    Rotate90,
    Rotate135,
    Rotate180,
    Rotate225,
    Rotate270,
    Rotate315,
    FlipH,
    FlipV,
    Solarize(u8),
    Posterize(u8),
    AutoContrast,
}

impl Transform {
    /// The twelve augmentations sampled for positive pairs.
    pub const AUGMENTATIONS: [Transform; 12] = [
        Transform::Rotate45,
        Transform::Rotate90,
        Transform::Rotate135,
        Transform::Rotate180,
        Transform::Rotate225,
        Transform::Rotate270,
        Transform::Rotate315,
        Transform::FlipH,
        Transform::FlipV,
        Transform::Solarize(128),
        Transform::Posterize(4),
        Transform::AutoContrast,
    ];

    fn degrees(self) -> Option<u32> {
        Some(match self {
            Transform::Rotate45 => 45,
            Transform::Rotate90 => 90,
            Transform::Rotate135 => 135,
            Transform::Rotate180 => 180,
            Transform::Rotate225 => 225,
            Transform::Rotate270 => 270,
            Transform::Rotate315 => 315,
            _ => return None,
        })
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Solarize(t) => write!(f, "solarize{t}"),
            Transform::Posterize(b) => write!(f, "posterize{b}"),
            Transform::FlipH => f.write_str("flip_h"),
            Transform::FlipV => f.write_str("flip_v"),
            Transform::AutoContrast => f.write_str("autocontrast"),
            t => write!(f, "rotate{}", t.degrees().expect("rotation")),
        }
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown transform {s:?}");
        Ok(match s {
            "flip_h" => Transform::FlipH,
            "flip_v" => Transform::FlipV,
            "autocontrast" => Transform::AutoContrast,
            _ => {
                if let Some(v) = s.strip_prefix("rotate") {
                    match v {
                        "45" => Transform::Rotate45,
                        "90" => Transform::Rotate90,
                        "135" => Transform::Rotate135,
                        "180" => Transform::Rotate180,
                        "225" => Transform::Rotate225,
                        "270" => Transform::Rotate270,
                        "315" => Transform::Rotate315,
                        _ => return Err(bad()),
                    }
                } else if let Some(v) = s.strip_prefix("solarize") {
                    Transform::Solarize(v.parse().map_err(|_| bad())?)
                } else if let Some(v) = s.strip_prefix("posterize") {
                    let bits: u8 = v.parse().map_err(|_| bad())?;
                    if !(1..=8).contains(&bits) {
                        return Err(bad());
                    }
                    Transform::Posterize(bits)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl From<Transform> for String {
    fn from(t: Transform) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Transform {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Applies `t`. Rotations are counter-clockwise; right angles permute pixels
/// exactly, other angles enlarge the canvas and sample bilinearly with white
/// outside the source.
pub fn apply_transform(image: &RasterImage, t: Transform) -> RasterImage {
    match t {
        Transform::Rotate90 => rotate_quarter(image, 1),
        Transform::Rotate180 => rotate_quarter(image, 2),
        Transform::Rotate270 => rotate_quarter(image, 3),
        Transform::Rotate45 | Transform::Rotate135 | Transform::Rotate225 | Transform::Rotate315 => {
            rotate_bilinear(image, f64::from(t.degrees().expect("rotation")))
        }
        Transform::FlipH => remap(image, image.width, image.height, |x, y| (image.width - 1 - x, y)),
        Transform::FlipV => remap(image, image.width, image.height, |x, y| (x, image.height - 1 - y)),
        Transform::Solarize(threshold) => map_values(image, |v| if v >= threshold { 255 - v } else { v }),
        Transform::Posterize(bits) => {
            assert!((1..=8).contains(&bits), "posterize bits must be in 1..=8");
            let mask = 0xFFu8 << (8 - bits);
            map_values(image, |v| v & mask)
        }
        Transform::AutoContrast => autocontrast(image),
    }
}

fn map_values(image: &RasterImage, f: impl Fn(u8) -> u8) -> RasterImage {
    RasterImage {
        width: image.width,
        height: image.height,
        pixels: image.pixels.iter().map(|&v| f(v)).collect(),
    }
}

/// Builds a `w`×`h` image whose pixel (x, y) is `image[src(x, y)]`.
fn remap(image: &RasterImage, w: u32, h: u32, src: impl Fn(u32, u32) -> (u32, u32)) -> RasterImage {
    let mut out = RasterImage::white(w, h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x, y);
            out.set(x, y, image.get(sx, sy));
        }
    }
    out
}

fn rotate_quarter(image: &RasterImage, quarters: u32) -> RasterImage {
    let (w, h) = (image.width, image.height);
    match quarters % 4 {
        // counter-clockwise on screen: the top row becomes the left column
        1 => remap(image, h, w, |x, y| (w - 1 - y, x)),
        2 => remap(image, w, h, |x, y| (w - 1 - x, h - 1 - y)),
        3 => remap(image, h, w, |x, y| (y, h - 1 - x)),
        _ => image.clone(),
    }
}

fn rotate_bilinear(image: &RasterImage, degrees: f64) -> RasterImage {
    let theta = degrees.to_radians();
    let (s, c) = theta.sin_cos();
    let (w, h) = (f64::from(image.width), f64::from(image.height));
    let new_w = (w * c.abs() + h * s.abs() - 1e-9).ceil() as u32;
    let new_h = (w * s.abs() + h * c.abs() - 1e-9).ceil() as u32;
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ncx, ncy) = (f64::from(new_w) / 2.0, f64::from(new_h) / 2.0);
    let mut out = RasterImage::white(new_w, new_h);
    for y in 0..new_h {
        for x in 0..new_w {
            // inverse map the output pixel centre; screen y points down, so a
            // counter-clockwise turn on screen is clockwise in these axes
            let dx = f64::from(x) + 0.5 - ncx;
            let dy = f64::from(y) + 0.5 - ncy;
            let sx = c * dx - s * dy + cx - 0.5;
            let sy = s * dx + c * dy + cy - 0.5;
            out.set(x, y, sample_bilinear(image, sx, sy));
        }
    }
    out
}

fn sample_bilinear(image: &RasterImage, x: f64, y: f64) -> [u8; 3] {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let fetch = |xi: f64, yi: f64| -> [f64; 3] {
        if xi < 0.0 || yi < 0.0 || xi >= f64::from(image.width) || yi >= f64::from(image.height) {
            WHITE.map(f64::from)
        } else {
            image.get(xi as u32, yi as u32).map(f64::from)
        }
    };
    let p00 = fetch(x0, y0);
    let p10 = fetch(x0 + 1.0, y0);
    let p01 = fetch(x0, y0 + 1.0);
    let p11 = fetch(x0 + 1.0, y0 + 1.0);
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = p00[ch] * (1.0 - fx) + p10[ch] * fx;
        let bottom = p01[ch] * (1.0 - fx) + p11[ch] * fx;
        out[ch] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Stretches each channel so the darkest and brightest ink values span
/// 0..=255. White background pixels do not count as ink; channels with no
/// spread are left alone.
fn autocontrast(image: &RasterImage) -> RasterImage {
    let mut lo = [u8::MAX; 3];
    let mut hi = [u8::MIN; 3];
    let mut any = false;
    for px in image.pixels.chunks_exact(3) {
        if px == WHITE {
            continue;
        }
        any = true;
        for ch in 0..3 {
            lo[ch] = lo[ch].min(px[ch]);
            hi[ch] = hi[ch].max(px[ch]);
        }
    }
    if !any {
        return image.clone();
    }
    let mut out = image.clone();
    for (i, v) in out.pixels.iter_mut().enumerate() {
        let ch = i % 3;
        if hi[ch] > lo[ch] {
            let scaled = (f64::from(*v) - f64::from(lo[ch])) * 255.0 / f64::from(hi[ch] - lo[ch]);
            *v = scaled.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RasterImage {
        let mut img = RasterImage::white(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, [(x * 10) as u8, (y * 20) as u8, ((x + y) * 5) as u8]);
            }
        }
        img
    }

    #[test]
    fn solarize_pixel() {
        let img = RasterImage::new(1, 1, [200, 127, 128]);
        assert_eq!(apply_transform(&img, Transform::Solarize(128)).get(0, 0), [55, 127, 127]);
    }

    #[test]
    fn posterize_masks_low_bits() {
        let img = RasterImage::new(1, 1, [0b1011_0111, 255, 15]);
        assert_eq!(apply_transform(&img, Transform::Posterize(4)).get(0, 0), [0b1011_0000, 240, 0]);
    }

    #[test]
    fn involutions() {
        let img = gradient(7, 5);
        for t in [Transform::Rotate180, Transform::FlipH, Transform::FlipV] {
            assert_eq!(apply_transform(&apply_transform(&img, t), t), img);
        }
    }

    #[test]
    fn quarter_turns_compose() {
        let img = gradient(6, 6);
        let twice = apply_transform(&apply_transform(&img, Transform::Rotate90), Transform::Rotate90);
        assert_eq!(twice, apply_transform(&img, Transform::Rotate180));
        let four = (0..4).fold(img.clone(), |acc, _| apply_transform(&acc, Transform::Rotate90));
        assert_eq!(four, img);
    }

    #[test]
    fn rotate90_is_counter_clockwise() {
        let mut img = RasterImage::white(3, 2);
        img.set(2, 0, [0, 0, 0]); // top right
        let r = apply_transform(&img, Transform::Rotate90);
        assert_eq!((r.width, r.height), (2, 3));
        assert_eq!(r.get(0, 0), [0, 0, 0]); // now top left
    }

    #[test]
    fn rotate45_expands_canvas() {
        let img = RasterImage::white(100, 100);
        let r = apply_transform(&img, Transform::Rotate45);
        assert_eq!((r.width, r.height), (142, 142));
        assert_eq!(r.ink_pixels(), 0);
    }

    #[test]
    fn autocontrast_rules() {
        let flat = RasterImage::new(4, 4, [90, 90, 90]);
        assert_eq!(apply_transform(&flat, Transform::AutoContrast), flat);
        let white = RasterImage::white(4, 4);
        assert_eq!(apply_transform(&white, Transform::AutoContrast), white);
        let mut img = RasterImage::white(3, 1);
        img.set(0, 0, [50, 50, 50]);
        img.set(1, 0, [150, 150, 150]);
        let out = apply_transform(&img, Transform::AutoContrast);
        assert_eq!(out.get(0, 0), [0, 0, 0]);
        assert_eq!(out.get(1, 0), [255, 255, 255]);
        assert_eq!(out.get(2, 0), WHITE);
    }

    #[test]
    fn names_round_trip() {
        for t in Transform::AUGMENTATIONS {
            assert_eq!(t.to_string().parse::<Transform>().unwrap(), t);
        }
        assert!("posterize9".parse::<Transform>().is_err());
    }
}
