use rayon::prelude::*;
use serde::Serialize;

use super::metrics::continuous_index;
use super::{PatternError, PatternQuery};
use crate::dataset::Dataset;
use crate::tree::NodeId;

/// Scores are reported on this grid; scores that agree on it rank as ties.
pub const SCORE_TIE_RESOLUTION: f64 = 1e-9;

/// Query-independent metrics of every leaf pair for every continuous trait.
///
/// Building the table is the expensive step; ranking against a query only
/// normalizes, scores and sorts.
#[derive(Clone, Debug)]
pub struct PairTable {
    /// Leaf pairs `(a, b)` with `label(a) < label(b)`, in lexicographic order.
    pairs: Vec<(NodeId, NodeId)>,
    distance_time: Vec<f64>,
    topo_edges: Vec<u32>,
    /// Continuous trait indices, in declaration order.
    traits: Vec<usize>,
    /// `delta[k][p]` for trait `traits[k]` and pair `p`.
    delta: Vec<Vec<f64>>,
    closeness: Vec<Vec<f64>>,
}

/// One evaluation time of a pair's gap function: each side is
/// `v[from] + (v[to] − v[from])·w`.
#[derive(Clone, Copy, Debug)]
struct Breakpoint {
    a_from: u32,
    a_to: u32,
    a_w: f64,
    b_from: u32,
    b_to: u32,
    b_w: f64,
}

impl PairTable {
    pub fn build(ds: &Dataset) -> Result<Self, PatternError> {
        let tree = ds.tree();
        let traits = ds.traits().continuous_indices();
        if traits.is_empty() {
            return Err(PatternError::NoContinuousTrait);
        }
        let mut leaves = tree.leaves().to_vec();
        if leaves.len() < 2 {
            return Err(PatternError::TooFewLeaves(leaves.len()));
        }
        leaves.sort_by(|&x, &y| tree.label(x).cmp(tree.label(y)));
        let n = leaves.len();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((leaves[i], leaves[j]));
            }
        }
        let present = tree.present_time();
        let distance_time = pairs.iter().map(|&(a, b)| present - tree.time(tree.mrca(a, b))).collect();
        let topo_edges = pairs.iter().map(|&(a, b)| tree.topo_edges(a, b)).collect();

        let columns: Vec<Vec<f64>> = traits
            .iter()
            .map(|&t| ds.traits().continuous(t).expect("continuous").iter().map(|e| e.value).collect())
            .collect();
        // per_pair[p] = (delta per trait, closeness per trait)
        let per_pair: Vec<(Vec<f64>, Vec<f64>)> = pairs
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(path_a, path_b, bps), &(a, b)| {
                    breakpoints(ds, a, b, path_a, path_b, bps);
                    let deltas = columns.iter().map(|v| gap_max(v, bps)).collect();
                    let close = columns.iter().map(|v| (v[a.0] - v[b.0]).abs()).collect();
                    (deltas, close)
                },
            )
            .collect();
        let mut delta = vec![Vec::with_capacity(pairs.len()); traits.len()];
        let mut closeness = vec![Vec::with_capacity(pairs.len()); traits.len()];
        for (d, c) in per_pair {
            for k in 0..traits.len() {
                delta[k].push(d[k]);
                closeness[k].push(c[k]);
            }
        }
        Ok(Self { pairs, distance_time, topo_edges, traits, delta, closeness })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Scores every pair against `query`, ranks by the primary trait and
    /// builds the per-trait top-1% heatmap.
    pub fn rank(&self, ds: &Dataset, query: &PatternQuery) -> Result<Ranking, PatternError> {
        query.validate()?;
        let tree = ds.tree();
        let primary_trait = match &query.primary_trait {
            Some(name) => continuous_index(ds, name)?,
            None => self.traits[0],
        };
        let primary = self.traits.iter().position(|&t| t == primary_trait).expect("continuous traits are tabulated");

        let keep: Vec<usize> = match query.min_distance {
            Some(min) => (0..self.pairs.len()).filter(|&p| self.distance_time[p] >= min).collect(),
            None => (0..self.pairs.len()).collect(),
        };
        if keep.is_empty() {
            return Err(PatternError::NoPairs);
        }
        let total = keep.len();
        let gather = |v: &[f64]| keep.iter().map(|&p| v[p]).collect::<Vec<f64>>();
        let dist_time_n = normalize(&gather(&self.distance_time));
        let topo: Vec<f64> = keep.iter().map(|&p| self.topo_edges[p] as f64).collect();
        let topo_n = normalize(&topo);
        let alpha = query.distance_mix;
        let distance_n: Vec<f64> = dist_time_n.iter().zip(&topo_n).map(|(&t, &e)| alpha * t + (1.0 - alpha) * e).collect();

        let per_trait: Vec<TraitRanking> = (0..self.traits.len())
            .into_par_iter()
            .map(|k| {
                let delta_n = normalize(&gather(&self.delta[k]));
                let close_n = normalize(&gather(&self.closeness[k]));
                let scores: Vec<f64> =
                    (0..total).map(|i| snap(score(query, distance_n[i], delta_n[i], close_n[i]).0)).collect();
                let mut order: Vec<u32> = (0..total as u32).collect();
                order.sort_unstable_by(|&x, &y| scores[y as usize].total_cmp(&scores[x as usize]).then(x.cmp(&y)));
                let mut rank_of = vec![0u32; total];
                for (r, &i) in order.iter().enumerate() {
                    rank_of[i as usize] = r as u32 + 1;
                }
                TraitRanking { delta_n, close_n, order, rank_of }
            })
            .collect();

        let threshold = top_threshold(total);
        let main = &per_trait[primary];
        let pairs = main
            .order
            .iter()
            .map(|&i| {
                let i = i as usize;
                let p = keep[i];
                let (a, b) = self.pairs[p];
                let heatmap: Vec<HeatCell> = per_trait
                    .iter()
                    .map(|tr| {
                        let rank = tr.rank_of[i];
                        HeatCell {
                            rank,
                            top1pct: rank as usize <= threshold,
                            saturation: 1.0 - (rank - 1) as f64 / total as f64,
                        }
                    })
                    .collect();
                let (score, desirability) = score(query, distance_n[i], main.delta_n[i], main.close_n[i]);
                RankedPair {
                    a: tree.label(a).to_string(),
                    b: tree.label(b).to_string(),
                    mrca: tree.label(tree.mrca(a, b)).to_string(),
                    score: snap(score),
                    rank: main.rank_of[i],
                    metrics: RawMetrics {
                        distance_time: self.distance_time[p],
                        topo_edges: self.topo_edges[p],
                        delta: self.delta[primary][p],
                        closeness: self.closeness[primary][p],
                    },
                    desirability,
                    top_rank_frequency: heatmap.iter().filter(|c| c.top1pct).count() as u32,
                    heatmap,
                }
            })
            .collect();

        let mut resolved = query.clone();
        resolved.primary_trait = Some(ds.traits().def(primary_trait).name.clone());
        Ok(Ranking {
            trait_name: ds.traits().def(primary_trait).name.clone(),
            traits: self.traits.iter().map(|&t| ds.traits().def(t).name.clone()).collect(),
            total_pairs: total,
            top_threshold: threshold,
            query: resolved,
            pairs,
        })
    }
}

struct TraitRanking {
    delta_n: Vec<f64>,
    close_n: Vec<f64>,
    order: Vec<u32>,
    rank_of: Vec<u32>,
}

/// Rounds a score to [`SCORE_TIE_RESOLUTION`] so the order does not depend
/// on floating-point noise (e.g. after an affine change of units).
#[inline]
fn snap(score: f64) -> f64 {
    (score * 1e9).round() / 1e9
}

/// Size of the top-1% band for `total` pairs; never empty.
pub(crate) fn top_threshold(total: usize) -> usize {
    ((total as f64 * 0.01).ceil() as usize).max(1)
}

/// Min-max normalization; a constant metric maps to 0.5.
fn normalize(v: &[f64]) -> Vec<f64> {
    let (min, max) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if max == min {
        return vec![0.5; v.len()];
    }
    v.iter().map(|&x| (x - min) / (max - min)).collect()
}

/// Weighted mean of the active desirabilities, in distance, delta,
/// closeness order.
#[inline]
fn score(q: &PatternQuery, distance: f64, delta: f64, closeness: f64) -> (f64, Desirability) {
    let d = Desirability {
        distance: q.distance.target.orient(distance),
        delta: q.delta.target.orient(delta),
        closeness: q.closeness.target.orient(closeness),
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for (des, w) in [(d.distance, q.distance.weight), (d.delta, q.delta.weight), (d.closeness, q.closeness.weight)] {
        if let Some(x) = des {
            num += w * x;
            den += w;
        }
    }
    (num / den, d)
}

/// Fills `bps` with the evaluation points of the gap between the trajectories
/// of `a` and `b` below their MRCA.
fn breakpoints(ds: &Dataset, a: NodeId, b: NodeId, path_a: &mut Vec<NodeId>, path_b: &mut Vec<NodeId>, bps: &mut Vec<Breakpoint>) {
    let tree = ds.tree();
    let m = tree.mrca(a, b);
    for (leaf, path) in [(a, &mut *path_a), (b, &mut *path_b)] {
        path.clear();
        let mut cur = leaf;
        path.push(cur);
        while cur != m {
            cur = tree.parent(cur).expect("mrca is an ancestor");
            path.push(cur);
        }
        path.reverse();
    }
    bps.clear();
    let (mut i, mut j) = (0usize, 0usize); // next unconsumed sample on each path
    let (mut ia, mut ib) = (0usize, 0usize); // segment start on each path
    while i < path_a.len() || j < path_b.len() {
        let ta = path_a.get(i).map_or(f64::INFINITY, |&v| tree.time(v));
        let tb = path_b.get(j).map_or(f64::INFINITY, |&v| tree.time(v));
        let t = ta.min(tb);
        if ta == t {
            ia = i;
            i += 1;
        }
        if tb == t {
            ib = j;
            j += 1;
        }
        let side = |path: &[NodeId], s: usize| -> (u32, u32, f64) {
            let t0 = tree.time(path[s]);
            if t0 == t || s + 1 == path.len() {
                (path[s].0 as u32, path[s].0 as u32, 0.0)
            } else {
                let t1 = tree.time(path[s + 1]);
                (path[s].0 as u32, path[s + 1].0 as u32, (t - t0) / (t1 - t0))
            }
        };
        let (a_from, a_to, a_w) = side(path_a, ia);
        let (b_from, b_to, b_w) = side(path_b, ib);
        bps.push(Breakpoint { a_from, a_to, a_w, b_from, b_to, b_w });
    }
}

#[inline]
fn gap_max(v: &[f64], bps: &[Breakpoint]) -> f64 {
    bps.iter()
        .map(|bp| {
            let (a0, a1) = (v[bp.a_from as usize], v[bp.a_to as usize]);
            let (b0, b1) = (v[bp.b_from as usize], v[bp.b_to as usize]);
            ((a0 + (a1 - a0) * bp.a_w) - (b0 + (b1 - b0) * bp.b_w)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn score_all_pairs(ds: &Dataset, query: &PatternQuery) -> Result<Ranking, PatternError> {
    query.validate()?;
    PairTable::build(ds)?.rank(ds, query)
}

/// Orders pairs by how many traits rank them in the top 1%, then by
/// primary score, then lexicographically. Rank order already encodes the
/// last two keys.
pub fn sort_by_rank_frequency(mut pairs: Vec<RankedPair>) -> Vec<RankedPair> {
    pairs.sort_by(|x, y| y.top_rank_frequency.cmp(&x.top_rank_frequency).then(x.rank.cmp(&y.rank)));
    pairs
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RawMetrics {
    pub distance_time: f64,
    pub topo_edges: u32,
    pub delta: f64,
    pub closeness: f64,
}

/// Oriented, normalized metric values; `None` for ignored metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Desirability {
    pub distance: Option<f64>,
    pub delta: Option<f64>,
    pub closeness: Option<f64>,
}

/// A pair's standing under the query applied to one trait.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatCell {
    pub rank: u32,
    pub top1pct: bool,
    /// `1 − (rank − 1)/P`.
    pub saturation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedPair {
    pub a: String,
    pub b: String,
    pub mrca: String,
    pub score: f64,
    pub rank: u32,
    /// Raw metrics for the primary trait.
    pub metrics: RawMetrics,
    pub desirability: Desirability,
    /// One cell per continuous trait, in [`Ranking::traits`] order.
    pub heatmap: Vec<HeatCell>,
    pub top_rank_frequency: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ranking {
    #[serde(rename = "trait")]
    pub trait_name: String,
    /// Heatmap columns.
    pub traits: Vec<String>,
    pub total_pairs: usize,
    pub top_threshold: usize,
    pub query: PatternQuery,
    pub pairs: Vec<RankedPair>,
}
