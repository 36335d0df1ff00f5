//! Analytics engine for rooted, time-calibrated phylogenies whose nodes carry
//! multivariate traits: measured at the leaves, uncertain at ancestors.
//!
//! The crate is organised bottom-up:
//!
//! - [`tree`]: the immutable tree model, node times and O(1) MRCA queries.
//! - [`newick`]: Newick parsing and serialization.
//! - [`traits`]: the long-format trait table and the node × trait matrix.
//! - [`dataset`]: datasets on disk and their validation diagnostics.
//! - [`summaries`]: subtree selection, time binning and per-bin summaries.
//! - [`pattern`]: all-pairs scoring against evolutionary patterns.
//! - [`synth`]: seeded synthetic trees and Brownian-motion traits.

pub mod dataset;
pub mod newick;
pub mod pattern;
pub mod summaries;
pub mod synth;
pub mod traits;
pub mod tree;

pub use dataset::{validate_dataset, Dataset, DatasetError, Diagnostic, RawDataset, Severity};
pub use traits::{Strictness, TraitKind, TraitMatrix, TraitRow};
pub use tree::{NodeId, PhyloTree, TreeError};
