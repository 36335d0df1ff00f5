//! Datasets: a Newick tree plus its trait table, on disk and in memory.
//!
//! A dataset directory holds `tree.nwk`, `traits.csv` and an optional
//! free-text `meta.txt` that is written by the simulator and ignored on load.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::newick::{parse_newick, serialize_newick};
use crate::traits::{check_traits, load_traits, read_trait_csv, write_trait_csv, Strictness, TraitError, TraitMatrix, TraitRow};
use crate::tree::{PhyloTree, TreeError};

pub const TREE_FILE: &str = "tree.nwk";
pub const TRAITS_FILE: &str = "traits.csv";
pub const META_FILE: &str = "meta.txt";

/// Leaves further than this fraction of the tree depth from the present are
/// reported as non-ultrametric.
pub const ULTRAMETRIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Traits(#[from] TraitError),
    #[error("{}", .0.first().map(|d| d.message.as_str()).unwrap_or("invalid dataset"))]
    Invalid(Vec<Diagnostic>),
}

/// File contents before any interpretation.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub newick_text: String,
    pub trait_rows: Vec<TraitRow>,
}

impl RawDataset {
    pub fn read_dir(dir: &Path) -> Result<Self, DatasetError> {
        let (newick_text, csv_text) = read_files(dir)?;
        Ok(Self { newick_text, trait_rows: read_trait_csv(&csv_text)? })
    }
}

fn read_files(dir: &Path) -> Result<(String, String), DatasetError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|source| DatasetError::Io { path, source })
    };
    Ok((read(TREE_FILE)?, read(TRAITS_FILE)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    tree: PhyloTree,
    traits: TraitMatrix,
}

impl Dataset {
    pub(crate) fn from_parts(tree: PhyloTree, traits: TraitMatrix) -> Self {
        Self { tree, traits }
    }

    /// Parses and loads a raw dataset. Fails on the first trait problem and
    /// on any error-level structural diagnostic (polytomies in strict mode).
    pub fn from_raw(raw: &RawDataset, strictness: Strictness) -> Result<Self, DatasetError> {
        let tree = parse_newick(&raw.newick_text)?;
        let traits = load_traits(&raw.trait_rows, &tree, strictness)?;
        let structural = structural_diagnostics(&tree, strictness);
        if structural.iter().any(|d| d.severity == Severity::Error) {
            return Err(DatasetError::Invalid(structural));
        }
        Ok(Self { tree, traits })
    }

    pub fn load_dir(dir: &Path, strictness: Strictness) -> Result<Self, DatasetError> {
        Self::from_raw(&RawDataset::read_dir(dir)?, strictness)
    }

    pub fn tree(&self) -> &PhyloTree {
        &self.tree
    }

    pub fn traits(&self) -> &TraitMatrix {
        &self.traits
    }

    pub(crate) fn traits_mut(&mut self) -> &mut TraitMatrix {
        &mut self.traits
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset { newick_text: serialize_newick(&self.tree), trait_rows: self.traits.to_rows(&self.tree) }
    }

    /// Writes `tree.nwk`, `traits.csv` and, when given, `meta.txt`.
    pub fn write_dir(&self, dir: &Path, meta: Option<&str>) -> Result<(), DatasetError> {
        let io_err = |path: PathBuf| move |source| DatasetError::Io { path, source };
        fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
        let raw = self.to_raw();
        let mut files = vec![(TREE_FILE, raw.newick_text + "\n"), (TRAITS_FILE, write_trait_csv(&raw.trait_rows))];
        if let Some(m) = meta {
            files.push((META_FILE, m.to_string()));
        }
        for (name, content) in files {
            let path = dir.join(name);
            fs::write(&path, content).map_err(io_err(path))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    Io,
    Syntax,
    MissingBranchLength,
    NonPositiveBranchLength,
    DuplicateLabel,
    MalformedTree,
    Polytomy,
    UnaryNode,
    NonUltrametric,
    CsvFormat,
    CsvHeader,
    UnknownNode,
    MissingTrait,
    ProbabilitySum,
    Strictness,
    InvalidRow,
    KindConflict,
    DuplicateRow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub node: Option<String>,
    #[serde(rename = "trait")]
    pub trait_name: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn error(code: DiagnosticCode, node: Option<String>, trait_name: Option<String>, message: String) -> Self {
        Self { severity: Severity::Error, code, node, trait_name, message }
    }

    fn warning(code: DiagnosticCode, node: Option<String>, message: String) -> Self {
        Self { severity: Severity::Warning, code, node, trait_name: None, message }
    }
}

impl From<&TreeError> for Diagnostic {
    fn from(e: &TreeError) -> Self {
        let (code, node) = match e {
            TreeError::Syntax { .. } => (DiagnosticCode::Syntax, None),
            TreeError::MissingBranchLength { node } => (DiagnosticCode::MissingBranchLength, Some(node.clone())),
            TreeError::NonPositiveBranchLength { node, .. } => {
                (DiagnosticCode::NonPositiveBranchLength, Some(node.clone()))
            }
            TreeError::DuplicateLabel(l) => (DiagnosticCode::DuplicateLabel, Some(l.clone())),
            _ => (DiagnosticCode::MalformedTree, None),
        };
        Diagnostic::error(code, node, None, e.to_string())
    }
}

impl From<&TraitError> for Diagnostic {
    fn from(e: &TraitError) -> Self {
        use DiagnosticCode as C;
        let (code, node, t) = match e {
            TraitError::Csv { .. } => (C::CsvFormat, None, None),
            TraitError::Header { .. } => (C::CsvHeader, None, None),
            TraitError::UnknownNode { node } => (C::UnknownNode, Some(node), None),
            TraitError::MissingTrait { node, trait_name } => (C::MissingTrait, Some(node), Some(trait_name)),
            TraitError::ProbabilitySum { node, trait_name, .. } => (C::ProbabilitySum, Some(node), Some(trait_name)),
            TraitError::Strictness { node, trait_name, .. } => (C::Strictness, Some(node), Some(trait_name)),
            TraitError::InvalidRow { node, trait_name, .. } => (C::InvalidRow, Some(node), Some(trait_name)),
            TraitError::KindConflict { trait_name } => (C::KindConflict, None, Some(trait_name)),
            TraitError::DuplicateRow { node, trait_name, .. } => (C::DuplicateRow, Some(node), Some(trait_name)),
            TraitError::UnknownTrait(name) => (C::InvalidRow, None, Some(name)),
        };
        Diagnostic::error(code, node.cloned(), t.cloned(), e.to_string())
    }
}

/// Polytomies, unary nodes and non-ultrametric leaves.
pub fn structural_diagnostics(tree: &PhyloTree, strictness: Strictness) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for v in tree.internal_nodes() {
        let k = tree.children(v).len();
        let node = Some(tree.label(v).to_string());
        if k > 2 {
            let message = format!("node '{}' has {k} children; trees must be binary", tree.label(v));
            out.push(match strictness {
                Strictness::Strict => Diagnostic::error(DiagnosticCode::Polytomy, node, None, message),
                Strictness::Lenient => Diagnostic::warning(DiagnosticCode::Polytomy, node, message),
            });
        } else if k == 1 {
            let message = format!("node '{}' has a single child", tree.label(v));
            out.push(Diagnostic::warning(DiagnosticCode::UnaryNode, node, message));
        }
    }
    let present = tree.present_time();
    for &leaf in tree.leaves() {
        let gap = present - tree.time(leaf);
        if gap > ULTRAMETRIC_TOLERANCE * present {
            out.push(Diagnostic::warning(
                DiagnosticCode::NonUltrametric,
                Some(tree.label(leaf).to_string()),
                format!("leaf '{}' ends at time {} but the present is {present}", tree.label(leaf), tree.time(leaf)),
            ));
        }
    }
    out
}

/// Every problem with a raw dataset. Empty iff the dataset loads cleanly and
/// is ultrametric and binary.
pub fn validate_dataset(raw: &RawDataset, strictness: Strictness) -> Vec<Diagnostic> {
    let tree = match parse_newick(&raw.newick_text) {
        Ok(t) => t,
        Err(e) => return vec![Diagnostic::from(&e)],
    };
    let (_, issues) = check_traits(&raw.trait_rows, &tree, strictness);
    let mut out: Vec<Diagnostic> = issues.iter().map(Diagnostic::from).collect();
    out.extend(structural_diagnostics(&tree, strictness));
    out
}

/// Reads a dataset directory and validates it. Unreadable CSV content is
/// reported as a diagnostic rather than an error.
pub fn validate_dir(dir: &Path, strictness: Strictness) -> Result<Vec<Diagnostic>, DatasetError> {
    let (newick_text, csv_text) = read_files(dir)?;
    match read_trait_csv(&csv_text) {
        Ok(trait_rows) => Ok(validate_dataset(&RawDataset { newick_text, trait_rows }, strictness)),
        Err(e) => {
            let mut out = vec![Diagnostic::from(&e)];
            if let Err(t) = parse_newick(&newick_text) {
                out.insert(0, Diagnostic::from(&t));
            }
            Ok(out)
        }
    }
}
