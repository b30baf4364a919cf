use molbench_core::chem::parse_smiles;
use molbench_core::corpus::reference_corpus;
use molbench_core::depict::{apply_transform, depict, rasterize, DepictStyle, RasterImage, Transform};

fn images() -> Vec<(String, RasterImage)> {
    let style = DepictStyle::default();
    reference_corpus()
        .into_iter()
        .step_by(10)
        .take(20)
        .map(|(name, s)| (name.to_string(), depict(&parse_smiles(s).unwrap(), &style).unwrap().image))
        .collect()
}

fn ap(img: &RasterImage, ts: &[Transform]) -> RasterImage {
    ts.iter().fold(img.clone(), |acc, &t| apply_transform(&acc, t))
}

#[test]
fn geometric_identities_hold_pixel_exact() {
    use Transform::*;
    for (name, img) in images() {
        assert!(img.ink_pixels() > 0, "{name} rendered blank");
        for t in [Rotate180, FlipH, FlipV] {
            assert_eq!(ap(&img, &[t, t]), img, "{name}: {t} twice");
        }
        assert_eq!(ap(&img, &[Rotate90; 4]), img, "{name}");
        assert_eq!(ap(&img, &[Rotate90, Rotate90]), ap(&img, &[Rotate180]), "{name}");
        assert_eq!(ap(&img, &[Rotate90, Rotate270]), img, "{name}");
        assert_eq!(ap(&img, &[Rotate270, Rotate90]), img, "{name}");
        assert_eq!(ap(&img, &[FlipH, FlipV]), ap(&img, &[Rotate180]), "{name}");
        assert_eq!(ap(&img, &[FlipH, Rotate90]), ap(&img, &[Rotate270, FlipH]), "{name}");
    }
}

#[test]
fn pointwise_maps_commute_with_geometry_and_are_idempotent() {
    use Transform::*;
    for (name, img) in images() {
        for p in [Solarize(128), Posterize(4)] {
            assert_eq!(ap(&img, &[p, p]), ap(&img, &[p]), "{name}: {p}");
            for g in [Rotate90, Rotate180, FlipH, FlipV] {
                assert_eq!(ap(&img, &[p, g]), ap(&img, &[g, p]), "{name}: {p} vs {g}");
            }
        }
        let ac = ap(&img, &[AutoContrast]);
        for g in [Rotate90, FlipV] {
            assert_eq!(ap(&img, &[AutoContrast, g]), ap(&img, &[g, AutoContrast]), "{name}");
        }
        assert_eq!((ac.width, ac.height), (img.width, img.height));
    }
}

#[test]
fn diagonal_rotations_expand_and_keep_ink() {
    for (name, img) in images().into_iter().take(5) {
        for t in [Transform::Rotate45, Transform::Rotate135, Transform::Rotate225, Transform::Rotate315] {
            let r = apply_transform(&img, t);
            assert!(r.width > img.width && r.height > img.height, "{name}");
            let ratio = r.ink_pixels() as f64 / img.ink_pixels() as f64;
            assert!((0.7..2.5).contains(&ratio), "{name} {t}: {ratio}");
        }
    }
}

#[test]
fn blank_svg_rasterizes_white() {
    let svg = br##"<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"><rect x="0" y="0" width="10" height="10" fill="#ffffff"/></svg>"##;
    let img = rasterize(svg, 10, 10).unwrap();
    assert_eq!(img.ink_pixels(), 0);
}

#[test]
fn png_round_trip() {
    let (_, img) = images().remove(0);
    let bytes = img.to_png().unwrap();
    assert_eq!(RasterImage::from_png(&bytes).unwrap(), img);
}

#[test]
fn depiction_is_deterministic() {
    let g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    let style = DepictStyle::default();
    assert_eq!(depict(&g, &style).unwrap(), depict(&g, &style).unwrap());
}
