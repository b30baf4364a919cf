//! Molecular graphs and their string representations.

pub mod canon;
pub mod element;
pub mod graph;
pub mod selfies;
pub mod smiles;

pub use canon::{canonical_labels, canonical_ranks, canonical_smiles_with_order, write_canonical_smiles};
pub use element::Element;
pub use graph::{Atom, Bond, BondDirection, BondOrder, GraphError, MolecularGraph, ValenceModel};
pub use selfies::{decode_selfies, encode_selfies, SelfiesError};
pub use smiles::{parse_smiles, parse_smiles_with, SmilesError};
