//! Request and response types and the logic behind them. The HTTP handlers
//! and the command line both go through here, so a CLI run and an API call
//! with the same parameters produce the same JSON.

use serde::{Deserialize, Serialize};
use trevo_core::pattern::{
    preset, sort_by_rank_frequency, trajectory, PairTable, PatternQuery, RankedPair, Trajectory,
};
use trevo_core::summaries::{
    bin_aligned, bin_by_time, select_by_trait, select_clade, select_leaves, summarize_bin, BinSummary, SelectionOrigin,
    SelectionView, SubtreeSelection, SummaryOptions, TimeBinsView, TraitPredicate, DEFAULT_BIN_COUNT,
};
use trevo_core::traits::TraitDef;
use trevo_core::tree::NestedNode;
use trevo_core::{Dataset, TraitKind};

use crate::error::ApiError;

pub const DEFAULT_TOP: usize = 50;

/// A loaded dataset with its query-independent pair metrics.
pub struct Session {
    pub dataset: Dataset,
    /// `None` when the dataset cannot be ranked (no continuous trait or a
    /// single leaf); rank requests then fail with the build error.
    table: Result<PairTable, trevo_core::pattern::PatternError>,
}

impl Session {
    pub fn new(dataset: Dataset) -> Self {
        let table = PairTable::build(&dataset);
        Self { dataset, table }
    }

    pub fn table(&self) -> Result<&PairTable, ApiError> {
        self.table.as_ref().map_err(|e| e.clone().into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub leaves: usize,
    pub internal_count: usize,
    pub present_time: f64,
    /// Number of leaf pairs ranked by pattern queries.
    pub pairs: usize,
    pub trait_defs: Vec<TraitDef>,
    pub tree: NestedNode,
}

pub fn dataset_summary(ds: &Dataset) -> DatasetSummary {
    let tree = ds.tree();
    let n = tree.leaves().len();
    DatasetSummary {
        leaves: n,
        internal_count: tree.len() - n,
        present_time: tree.present_time(),
        pairs: n * n.saturating_sub(1) / 2,
        trait_defs: ds.traits().defs().to_vec(),
        tree: tree.to_nested(),
    }
}

/// Leaf filter of a trait-defined selection: `states` for a discrete trait,
/// `min`/`max` for a continuous one.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateSpec {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub states: Option<Vec<String>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Exactly one of `predicate`, `node` (a clade) or `leaves` (a brush).
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    pub name: String,
    pub origin: Option<SelectionOrigin>,
    pub predicate: Option<PredicateSpec>,
    pub node: Option<String>,
    pub leaves: Option<Vec<String>>,
    pub color_key: Option<String>,
}

fn predicate_of(spec: &PredicateSpec) -> Result<TraitPredicate, ApiError> {
    match (&spec.states, spec.min, spec.max) {
        (Some(states), None, None) => Ok(TraitPredicate::States(states.clone())),
        (None, min, max) if min.is_some() || max.is_some() => Ok(TraitPredicate::Range {
            min: min.unwrap_or(f64::NEG_INFINITY),
            max: max.unwrap_or(f64::INFINITY),
        }),
        _ => Err(ApiError::invalid("a predicate needs either `states` or `min`/`max`")),
    }
}

/// Checks that `key` names a discrete trait.
fn check_color_key(ds: &Dataset, key: &str) -> Result<(), ApiError> {
    let traits = ds.traits();
    let t = traits.require(key).map_err(|_| trevo_core::summaries::SummaryError::UnknownTrait(key.to_string()))?;
    let kind = traits.def(t).kind;
    if kind != TraitKind::Discrete {
        return Err(trevo_core::summaries::SummaryError::KindMismatch {
            trait_name: key.to_string(),
            expected: TraitKind::Discrete,
            actual: kind,
        }
        .into());
    }
    Ok(())
}

pub fn build_selection(ds: &Dataset, req: &SelectionRequest) -> Result<SubtreeSelection, ApiError> {
    if req.name.trim().is_empty() {
        return Err(ApiError::invalid("selection name must be non-empty"));
    }
    let (sel, origin) = match (&req.predicate, &req.node, &req.leaves) {
        (Some(p), None, None) => (select_by_trait(ds, &p.trait_name, &predicate_of(p)?)?, SelectionOrigin::TraitFilter),
        (None, Some(node), None) => (select_clade(ds, node)?, SelectionOrigin::Clade),
        (None, None, Some(leaves)) => (select_leaves(ds, leaves)?, SelectionOrigin::Brush),
        _ => return Err(ApiError::invalid("give exactly one of `predicate`, `node` or `leaves`")),
    };
    if let Some(o) = req.origin {
        if o != origin {
            return Err(ApiError::invalid(format!("origin {o:?} does not match the selection's definition")));
        }
    }
    if let Some(key) = &req.color_key {
        check_color_key(ds, key)?;
    }
    Ok(sel.with_label(req.name.clone()).with_color_key(req.color_key.clone()))
}

fn default_k() -> usize {
    DEFAULT_BIN_COUNT
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsRequest {
    pub selection: String,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Traits to summarize, all of them when absent.
    pub traits: Option<Vec<String>>,
    /// Overrides the selection's color key.
    pub color_key: Option<String>,
    #[serde(default)]
    pub jitter_seed: u64,
    /// Histogram bins for the leaf bin; Sturges when absent.
    pub histogram_bins: Option<usize>,
    /// Another selection whose bins should line up with this one's.
    pub align_with: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraitBins {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub kind: TraitKind,
    /// One summary per internal bin, then the leaf bin.
    pub summaries: Vec<BinSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinsResponse {
    pub selection: SelectionView,
    pub k: usize,
    pub bins: TimeBinsView,
    pub traits: Vec<TraitBins>,
}

/// Bins `sel` and summarizes every requested trait in every bin. `align`
/// is the other selection of an aligned comparison.
pub fn bins_response(
    ds: &Dataset,
    sel: &SubtreeSelection,
    align: Option<&SubtreeSelection>,
    req: &BinsRequest,
) -> Result<BinsResponse, ApiError> {
    let bins = match align {
        Some(other) => bin_aligned(ds, &[sel, other], req.k)?.swap_remove(0),
        None => bin_by_time(ds, sel, req.k)?,
    };
    let color_key = req.color_key.clone().or_else(|| sel.color_key.clone());
    if let Some(key) = &color_key {
        check_color_key(ds, key)?;
    }
    if req.histogram_bins == Some(0) {
        return Err(ApiError::invalid("histogram_bins must be at least 1"));
    }
    let opts = SummaryOptions { jitter_seed: req.jitter_seed, color_key, histogram_bins: req.histogram_bins };
    let names: Vec<String> = match &req.traits {
        Some(t) => t.clone(),
        None => ds.traits().defs().iter().map(|d| d.name.clone()).collect(),
    };
    let mut traits = Vec::with_capacity(names.len());
    for name in names {
        let summaries = (0..=bins.k())
            .map(|b| summarize_bin(ds, &bins, b, &name, &opts))
            .collect::<Result<Vec<_>, _>>()?;
        let kind = summaries[0].kind;
        traits.push(TraitBins { trait_name: name, kind, summaries });
    }
    Ok(BinsResponse { selection: sel.view(ds.tree()), k: bins.k(), bins: bins.view(ds.tree()), traits })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    #[default]
    Score,
    /// Number of traits that put the pair in their top 1%.
    Frequency,
}

fn yes() -> bool {
    true
}

/// Either a preset id or an explicit query. `trait` and `min_distance`
/// override the corresponding query fields.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRequest {
    pub preset: Option<String>,
    pub query: Option<PatternQuery>,
    #[serde(rename = "trait")]
    pub trait_name: Option<String>,
    pub min_distance: Option<f64>,
    pub top: Option<usize>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub sort: SortKey,
    #[serde(default = "yes")]
    pub trajectories: bool,
}

impl RankRequest {
    pub fn preset(id: &str) -> Self {
        Self {
            preset: Some(id.to_string()),
            query: None,
            trait_name: None,
            min_distance: None,
            top: None,
            offset: 0,
            sort: SortKey::Score,
            trajectories: true,
        }
    }

    /// The effective query.
    pub fn resolve(&self) -> Result<PatternQuery, ApiError> {
        let mut q = match (&self.preset, &self.query) {
            (Some(id), None) => preset(id)?.query,
            (None, Some(q)) => q.clone(),
            (None, None) => return Err(ApiError::invalid("give a `preset` or a `query`")),
            (Some(_), Some(_)) => return Err(ApiError::invalid("give a `preset` or a `query`, not both")),
        };
        if let Some(t) = &self.trait_name {
            q.primary_trait = Some(t.clone());
        }
        if self.min_distance.is_some() {
            q.min_distance = self.min_distance;
        }
        q.validate()?;
        Ok(q)
    }
}

/// Primary-trait trajectories of a pair, each from the MRCA down to the leaf.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairTrajectories {
    pub a: Trajectory,
    pub b: Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCard {
    #[serde(flatten)]
    pub pair: RankedPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PairTrajectories>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankResponse {
    #[serde(rename = "trait")]
    pub trait_name: String,
    /// Heatmap columns.
    pub traits: Vec<String>,
    pub total_pairs: usize,
    pub top_threshold: usize,
    pub query: PatternQuery,
    pub sort: SortKey,
    pub offset: usize,
    pub pairs: Vec<PairCard>,
}

pub fn rank_response(session: &Session, req: &RankRequest) -> Result<RankResponse, ApiError> {
    let query = req.resolve()?;
    let top = req.top.unwrap_or(DEFAULT_TOP);
    if top == 0 {
        return Err(ApiError::invalid("top must be at least 1"));
    }
    let ds = &session.dataset;
    let ranking = session.table()?.rank(ds, &query)?;
    let ordered = match req.sort {
        SortKey::Score => ranking.pairs,
        SortKey::Frequency => sort_by_rank_frequency(ranking.pairs),
    };
    let pairs = ordered
        .into_iter()
        .skip(req.offset)
        .take(top)
        .map(|pair| {
            let trajectories = if req.trajectories {
                let t = &ranking.trait_name;
                Some(PairTrajectories {
                    a: trajectory(ds, &pair.mrca, &pair.a, t)?,
                    b: trajectory(ds, &pair.mrca, &pair.b, t)?,
                })
            } else {
                None
            };
            Ok(PairCard { pair, trajectories })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(RankResponse {
        trait_name: ranking.trait_name,
        traits: ranking.traits,
        total_pairs: ranking.total_pairs,
        top_threshold: ranking.top_threshold,
        query: ranking.query,
        sort: req.sort,
        offset: req.offset,
        pairs,
    })
}
