//! Trait-view backend: subtree selection, equal-width time bins and the
//! per-bin summaries (interval marks, KDE, histograms, state dot plots,
//! outliers).

pub mod kde;
pub mod stats;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::traits::{TraitColumn, TraitKind};
use crate::tree::{NodeId, PhyloTree, TreeError};

pub use kde::{kde, silverman_bandwidth, KdeCurve};
pub use stats::{find_outliers, histogram, jitter, Histogram};

pub const DEFAULT_BIN_COUNT: usize = 8;
pub const MAX_BIN_COUNT: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SummaryError {
    #[error("no leaf matches the selection")]
    EmptySelection,
    #[error("trait '{trait_name}' is {actual}, expected {expected}")]
    KindMismatch { trait_name: String, expected: TraitKind, actual: TraitKind },
    #[error("unknown trait '{0}'")]
    UnknownTrait(String),
    #[error("trait '{trait_name}' has no state '{state}'")]
    UnknownState { trait_name: String, state: String },
    #[error("invalid range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("bin count must be between 1 and {MAX_BIN_COUNT}, got {0}")]
    InvalidBinCount(usize),
    #[error("bin index {index} out of range (last bin is {last})")]
    InvalidBin { index: usize, last: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionOrigin {
    Clade,
    TraitFilter,
    Brush,
}

/// Leaf filter for [`select_by_trait`].
#[derive(Clone, Debug, PartialEq)]
pub enum TraitPredicate {
    /// Discrete trait: the leaf's observed state is one of these.
    States(Vec<String>),
    /// Continuous trait: the leaf value lies in `[min, max]`.
    Range { min: f64, max: f64 },
}

/// A set of leaves and the internal nodes that connect them below their
/// collective MRCA.
#[derive(Clone, Debug, PartialEq)]
pub struct SubtreeSelection {
    pub label: String,
    pub origin: SelectionOrigin,
    /// Selected leaves in preorder.
    pub leaves: Vec<NodeId>,
    /// Internal nodes on the paths from `mrca` to the selected leaves, in preorder.
    pub induced: Vec<NodeId>,
    pub mrca: NodeId,
    pub color_key: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionView {
    pub label: String,
    pub origin: SelectionOrigin,
    pub leaves: Vec<String>,
    pub induced: Vec<String>,
    pub mrca: String,
    pub color_key: Option<String>,
}

impl SubtreeSelection {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_color_key(mut self, key: Option<String>) -> Self {
        self.color_key = key;
        self
    }

    pub fn view(&self, tree: &PhyloTree) -> SelectionView {
        let names = |ids: &[NodeId]| ids.iter().map(|&v| tree.label(v).to_string()).collect();
        SelectionView {
            label: self.label.clone(),
            origin: self.origin,
            leaves: names(&self.leaves),
            induced: names(&self.induced),
            mrca: tree.label(self.mrca).to_string(),
            color_key: self.color_key.clone(),
        }
    }
}

/// Builds a selection from leaves, inducing the internal nodes between them
/// and their collective MRCA.
fn induce(tree: &PhyloTree, leaves: Vec<NodeId>, origin: SelectionOrigin, label: String) -> Result<SubtreeSelection, SummaryError> {
    let mrca = tree.mrca_of_set(leaves.iter().copied()).ok_or(SummaryError::EmptySelection)?;
    let mut marked = vec![false; tree.len()];
    for &leaf in &leaves {
        let mut cur = leaf;
        while cur != mrca && !marked[cur.0] {
            marked[cur.0] = true;
            cur = tree.parent(cur).expect("mrca is an ancestor");
        }
        marked[mrca.0] = true;
    }
    let induced = tree.subtree(mrca).filter(|&v| marked[v.0] && !tree.is_leaf(v)).collect();
    Ok(SubtreeSelection { label, origin, leaves, induced, mrca, color_key: None })
}

pub fn select_by_trait(ds: &Dataset, trait_name: &str, predicate: &TraitPredicate) -> Result<SubtreeSelection, SummaryError> {
    let tree = ds.tree();
    let traits = ds.traits();
    let t = traits.index_of(trait_name).ok_or_else(|| SummaryError::UnknownTrait(trait_name.to_string()))?;
    let def = traits.def(t);
    let mismatch = |expected| SummaryError::KindMismatch { trait_name: trait_name.to_string(), expected, actual: def.kind };
    let leaves: Vec<NodeId> = match (predicate, traits.column(t)) {
        (TraitPredicate::States(states), TraitColumn::Discrete(_)) => {
            let mut wanted = BTreeSet::new();
            for s in states {
                let idx = def.states.iter().position(|x| x == s).ok_or_else(|| SummaryError::UnknownState {
                    trait_name: trait_name.to_string(),
                    state: s.clone(),
                })?;
                wanted.insert(idx);
            }
            tree.leaves()
                .iter()
                .copied()
                .filter(|&l| wanted.contains(&traits.modal_state(t, l).expect("discrete column")))
                .collect()
        }
        (&TraitPredicate::Range { min, max }, TraitColumn::Continuous(col)) => {
            if min.is_nan() || max.is_nan() || min > max {
                return Err(SummaryError::InvalidRange { min, max });
            }
            tree.leaves().iter().copied().filter(|&l| (min..=max).contains(&col[l.0].value)).collect()
        }
        (TraitPredicate::States(_), _) => return Err(mismatch(TraitKind::Discrete)),
        (TraitPredicate::Range { .. }, _) => return Err(mismatch(TraitKind::Continuous)),
    };
    if leaves.is_empty() {
        return Err(SummaryError::EmptySelection);
    }
    let label = match predicate {
        TraitPredicate::States(s) => format!("{trait_name} in {{{}}}", s.join(", ")),
        TraitPredicate::Range { min, max } => format!("{trait_name} in [{min}, {max}]"),
    };
    induce(tree, leaves, SelectionOrigin::TraitFilter, label)
}

/// All leaves below `node`; induced nodes are `node` (when internal) and
/// every internal descendant.
pub fn select_clade(ds: &Dataset, node: &str) -> Result<SubtreeSelection, SummaryError> {
    let tree = ds.tree();
    let id = tree.require(node)?;
    let (leaves, induced) = tree.subtree(id).partition(|&v| tree.is_leaf(v));
    Ok(SubtreeSelection {
        label: format!("clade {node}"),
        origin: SelectionOrigin::Clade,
        leaves,
        induced,
        mrca: id,
        color_key: None,
    })
}

/// Selection from an explicit leaf set, as produced by brushing.
pub fn select_leaves<S: AsRef<str>>(ds: &Dataset, labels: &[S]) -> Result<SubtreeSelection, SummaryError> {
    let tree = ds.tree();
    let mut ids = BTreeSet::new();
    for l in labels {
        ids.insert(tree.require_leaf(l.as_ref())?);
    }
    if ids.is_empty() {
        return Err(SummaryError::EmptySelection);
    }
    induce(tree, ids.into_iter().collect(), SelectionOrigin::Brush, format!("brush ({} leaves)", labels.len()))
}

/// Equal-width time bins over a selection. Internal bins are `0..k`; the
/// selected leaves sit in a dedicated bin with index `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeBins {
    pub edges: Vec<f64>,
    /// Induced internal nodes of each bin, in preorder.
    pub internal: Vec<Vec<NodeId>>,
    pub leaves: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeBinsView {
    pub edges: Vec<f64>,
    pub internal: Vec<Vec<String>>,
    pub leaf_bin: usize,
    pub leaves: Vec<String>,
}

impl TimeBins {
    pub fn k(&self) -> usize {
        self.internal.len()
    }

    pub fn leaf_bin(&self) -> usize {
        self.internal.len()
    }

    /// Internal bin of a node, if it was assigned one.
    pub fn bin_of(&self, id: NodeId) -> Option<usize> {
        self.internal.iter().position(|b| b.contains(&id))
    }

    /// Nodes of a bin, the leaf bin included.
    pub fn nodes(&self, bin: usize) -> Option<&[NodeId]> {
        if bin < self.internal.len() {
            Some(&self.internal[bin])
        } else if bin == self.internal.len() {
            Some(&self.leaves)
        } else {
            None
        }
    }

    pub fn view(&self, tree: &PhyloTree) -> TimeBinsView {
        let names = |ids: &[NodeId]| ids.iter().map(|&v| tree.label(v).to_string()).collect::<Vec<_>>();
        TimeBinsView {
            edges: self.edges.clone(),
            internal: self.internal.iter().map(|b| names(b)).collect(),
            leaf_bin: self.leaf_bin(),
            leaves: names(&self.leaves),
        }
    }
}

pub fn bin_by_time(ds: &Dataset, sel: &SubtreeSelection, k: usize) -> Result<TimeBins, SummaryError> {
    bin_by_time_from(ds, sel, k, ds.tree().time(sel.mrca))
}

/// Bins several selections over one common span (the earliest MRCA time to
/// the present) so their summaries line up for comparison.
pub fn bin_aligned(ds: &Dataset, sels: &[&SubtreeSelection], k: usize) -> Result<Vec<TimeBins>, SummaryError> {
    let start = sels.iter().map(|s| ds.tree().time(s.mrca)).fold(f64::INFINITY, f64::min);
    sels.iter().map(|s| bin_by_time_from(ds, s, k, start)).collect()
}

fn bin_by_time_from(ds: &Dataset, sel: &SubtreeSelection, k: usize, start: f64) -> Result<TimeBins, SummaryError> {
    if !(1..=MAX_BIN_COUNT).contains(&k) {
        return Err(SummaryError::InvalidBinCount(k));
    }
    let tree = ds.tree();
    let present = tree.present_time();
    // A selection that starts at the present (a single leaf) still gets
    // strictly increasing edges.
    let span = if present > start { present - start } else { 1.0 };
    let end = start + span;
    let width = span / k as f64;
    let mut edges: Vec<f64> = (0..k).map(|i| start + i as f64 * width).collect();
    edges.push(end);
    let mut internal = vec![Vec::new(); k];
    for &v in &sel.induced {
        let b = edges[1..k].partition_point(|&e| e <= tree.time(v));
        internal[b].push(v);
    }
    Ok(TimeBins { edges, internal, leaves: sel.leaves.clone() })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SummaryOptions {
    pub jitter_seed: u64,
    /// Discrete trait whose modal state splits the bin into categories.
    pub color_key: Option<String>,
    /// Histogram bins for the leaf bin; Sturges when unset.
    pub histogram_bins: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalMark {
    pub node: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousSummary {
    pub intervals: Vec<IntervalMark>,
    pub median: Option<f64>,
    /// Internal bins only.
    pub kde: Option<KdeCurve>,
    /// Leaf bin only.
    pub histogram: Option<Histogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateDots {
    pub state: String,
    pub nodes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub mean: Option<f64>,
    pub jitter: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteSummary {
    pub states: Vec<StateDots>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategorySummary {
    pub state: String,
    pub summary: BinSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinSummary {
    pub bin: usize,
    pub leaf_bin: bool,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub kind: TraitKind,
    pub nodes: Vec<String>,
    pub continuous: Option<ContinuousSummary>,
    pub discrete: Option<DiscreteSummary>,
    pub outliers: Vec<String>,
    /// Per-category summaries when a color key is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<CategorySummary>>,
}

pub fn summarize_bin(
    ds: &Dataset,
    bins: &TimeBins,
    bin: usize,
    trait_name: &str,
    opts: &SummaryOptions,
) -> Result<BinSummary, SummaryError> {
    let nodes = bins.nodes(bin).ok_or(SummaryError::InvalidBin { index: bin, last: bins.leaf_bin() })?;
    let traits = ds.traits();
    let t = traits.index_of(trait_name).ok_or_else(|| SummaryError::UnknownTrait(trait_name.to_string()))?;
    let mut summary = summarize_nodes(ds, nodes, bin, bin == bins.leaf_bin(), t, opts);
    if let Some(key) = &opts.color_key {
        let c = traits.index_of(key).ok_or_else(|| SummaryError::UnknownTrait(key.clone()))?;
        let def = traits.def(c);
        if def.kind != TraitKind::Discrete {
            return Err(SummaryError::KindMismatch {
                trait_name: key.clone(),
                expected: TraitKind::Discrete,
                actual: def.kind,
            });
        }
        let categories = def
            .states
            .iter()
            .enumerate()
            .map(|(s, state)| {
                let members: Vec<NodeId> =
                    nodes.iter().copied().filter(|&v| traits.modal_state(c, v) == Some(s)).collect();
                CategorySummary {
                    state: state.clone(),
                    summary: summarize_nodes(ds, &members, bin, bin == bins.leaf_bin(), t, opts),
                }
            })
            .collect();
        summary.categories = Some(categories);
    }
    Ok(summary)
}

fn summarize_nodes(ds: &Dataset, nodes: &[NodeId], bin: usize, leaf_bin: bool, t: usize, opts: &SummaryOptions) -> BinSummary {
    let tree = ds.tree();
    let def = ds.traits().def(t);
    let labels: Vec<String> = nodes.iter().map(|&v| tree.label(v).to_string()).collect();
    let mut out = BinSummary {
        bin,
        leaf_bin,
        trait_name: def.name.clone(),
        kind: def.kind,
        nodes: labels.clone(),
        continuous: None,
        discrete: None,
        outliers: Vec::new(),
        categories: None,
    };
    match ds.traits().column(t) {
        TraitColumn::Continuous(col) => {
            let values: Vec<f64> = nodes.iter().map(|&v| col[v.0].value).collect();
            let intervals = nodes
                .iter()
                .zip(&labels)
                .map(|(&v, l)| IntervalMark {
                    node: l.clone(),
                    estimate: col[v.0].value,
                    lower: col[v.0].lower,
                    upper: col[v.0].upper,
                })
                .collect();
            out.outliers = find_outliers(&values).into_iter().map(|i| labels[i].clone()).collect();
            out.continuous = Some(ContinuousSummary {
                intervals,
                median: stats::median(&values),
                kde: if leaf_bin { None } else { kde(&values, None).ok() },
                histogram: if leaf_bin { histogram(&values, opts.histogram_bins) } else { None },
            });
        }
        TraitColumn::Discrete(col) => {
            let states = def
                .states
                .iter()
                .enumerate()
                .map(|(s, state)| {
                    let probabilities: Vec<f64> = nodes.iter().map(|&v| col[v.0][s]).collect();
                    StateDots {
                        state: state.clone(),
                        nodes: labels.clone(),
                        mean: stats::mean(&probabilities),
                        jitter: labels.iter().map(|l| jitter(opts.jitter_seed, l, state)).collect(),
                        probabilities,
                    }
                })
                .collect();
            out.discrete = Some(DiscreteSummary { states });
        }
    }
    out
}
