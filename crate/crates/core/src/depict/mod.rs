//! Skeletal depictions (layout, SVG, raster) and image augmentations.

pub mod layout;
pub mod raster;
pub mod svg;
pub mod transform;

use thiserror::Error;

pub use layout::{layout_2d, Layout2D};
pub use raster::{rasterize, RasterImage};
pub use svg::{render_svg, DepictStyle};
pub use transform::{apply_transform, Transform};

use crate::chem::{parse_smiles, write_canonical_smiles, MolecularGraph};

#[derive(Debug, Error)]
pub enum DepictError {
    #[error("cannot depict an empty graph")]
    EmptyGraph,
    #[error("layout produced non-finite coordinates for {0}")]
    LayoutFailure(String),
    #[error("unsupported SVG feature: {0}")]
    UnsupportedSvgFeature(String),
    #[error("PNG codec error: {0}")]
    Png(String),
}

/// An SVG document and its rasterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Depiction {
    pub svg: Vec<u8>,
    pub image: RasterImage,
}

/// Depicts `graph` via its canonical form, so that any two inputs with the
/// same canonical SMILES give byte-identical output.
pub fn depict(graph: &MolecularGraph, style: &DepictStyle) -> Result<Depiction, DepictError> {
    if graph.is_empty() {
        return Err(DepictError::EmptyGraph);
    }
    let canonical = write_canonical_smiles(graph);
    let normalized = parse_smiles(&canonical)
        .map_err(|e| DepictError::LayoutFailure(format!("{canonical}: {e}")))?;
    let layout = layout_2d(&normalized)?;
    let svg = render_svg(&normalized, &layout, style);
    let image = rasterize(&svg, style.width, style.height)?;
    Ok(Depiction { svg, image })
}
