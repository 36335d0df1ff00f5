//! Brute-force reference for pair ranking. Walks parent pointers for every
//! pair, enumerates breakpoints per pair and sorts with a stable sort.

use trevo_core::pattern::{PatternQuery, Target};
use trevo_core::traits::TraitColumn;
use trevo_core::{Dataset, NodeId, PhyloTree};

#[derive(Debug, Clone, PartialEq)]
pub struct NaivePair {
    pub a: String,
    pub b: String,
    pub mrca: String,
    pub score: f64,
    pub rank: u32,
    pub distance_time: f64,
    pub topo_edges: u32,
    pub delta: f64,
    pub closeness: f64,
    /// Rank of this pair under each continuous trait.
    pub heat_ranks: Vec<u32>,
    pub top_rank_frequency: u32,
}

fn ancestors(tree: &PhyloTree, v: NodeId) -> Vec<NodeId> {
    let mut out = vec![v];
    let mut cur = v;
    while let Some(p) = tree.node(cur).parent {
        out.push(p);
        cur = p;
    }
    out
}

pub fn brute_mrca(tree: &PhyloTree, a: NodeId, b: NodeId) -> NodeId {
    let up_b = ancestors(tree, b);
    *ancestors(tree, a).iter().find(|x| up_b.contains(x)).unwrap()
}

/// Time from the root by summing branch lengths top-down.
pub fn brute_time(tree: &PhyloTree, v: NodeId) -> f64 {
    ancestors(tree, v).iter().rev().skip(1).fold(0.0, |t, &x| t + tree.node(x).branch_length)
}

/// Path from `m` down to `leaf`, both included.
fn path_down(tree: &PhyloTree, m: NodeId, leaf: NodeId) -> Vec<NodeId> {
    let mut up = ancestors(tree, leaf);
    let cut = up.iter().position(|&x| x == m).unwrap();
    up.truncate(cut + 1);
    up.reverse();
    up
}

fn value_at(times: &[f64], values: &[f64], t: f64) -> f64 {
    for i in 0..times.len() {
        if times[i] == t {
            return values[i];
        }
        if i + 1 < times.len() && times[i] < t && t < times[i + 1] {
            let (t0, t1, v0, v1) = (times[i], times[i + 1], values[i], values[i + 1]);
            return v0 + (v1 - v0) * ((t - t0) / (t1 - t0));
        }
    }
    *values.last().unwrap()
}

fn naive_delta(tree: &PhyloTree, col: &[f64], a: NodeId, b: NodeId) -> f64 {
    let m = brute_mrca(tree, a, b);
    let pa = path_down(tree, m, a);
    let pb = path_down(tree, m, b);
    let ta: Vec<f64> = pa.iter().map(|&v| brute_time(tree, v)).collect();
    let tb: Vec<f64> = pb.iter().map(|&v| brute_time(tree, v)).collect();
    let va: Vec<f64> = pa.iter().map(|&v| col[v.0]).collect();
    let vb: Vec<f64> = pb.iter().map(|&v| col[v.0]).collect();
    let mut best = 0.0f64;
    for &t in ta.iter().chain(&tb) {
        best = best.max((value_at(&ta, &va, t) - value_at(&tb, &vb, t)).abs());
    }
    best
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|&x| if max == min { 0.5 } else { (x - min) / (max - min) }).collect()
}

fn orient(t: Target, x: f64) -> Option<f64> {
    match t {
        Target::High => Some(x),
        Target::Low => Some(1.0 - x),
        Target::Ignore => None,
    }
}

/// Scores under one trait, in pair order.
fn scores_for(q: &PatternQuery, dist: &[f64], delta: &[f64], close: &[f64]) -> Vec<f64> {
    let dn = normalize(delta);
    let cn = normalize(close);
    (0..dist.len())
        .map(|i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (des, w) in [
                (orient(q.distance.target, dist[i]), q.distance.weight),
                (orient(q.delta.target, dn[i]), q.delta.weight),
                (orient(q.closeness.target, cn[i]), q.closeness.weight),
            ] {
                if let Some(x) = des {
                    num += w * x;
                    den += w;
                }
            }
            // Reported scores live on a 1e-9 grid.
            (num / den * 1e9).round() / 1e9
        })
        .collect()
}

fn ranks_of(scores: &[f64]) -> (Vec<usize>, Vec<u32>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable: equal scores keep lexicographic pair order.
    order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap());
    let mut rank = vec![0u32; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32 + 1;
    }
    (order, rank)
}

/// Full ranking, best first.
pub fn naive_rank(ds: &Dataset, q: &PatternQuery) -> Vec<NaivePair> {
    let tree = ds.tree();
    let traits = ds.traits();
    let cont: Vec<usize> = (0..traits.len()).filter(|&t| matches!(traits.column(t), TraitColumn::Continuous(_))).collect();
    let primary = match &q.primary_trait {
        Some(name) => cont.iter().position(|&t| traits.def(t).name == *name).unwrap(),
        None => 0,
    };
    let cols: Vec<Vec<f64>> = cont.iter().map(|&t| traits.continuous(t).unwrap().iter().map(|e| e.value).collect()).collect();

    let mut leaves: Vec<NodeId> = tree.ids().filter(|&v| tree.node(v).children.is_empty()).collect();
    leaves.sort_by(|&x, &y| tree.label(x).cmp(tree.label(y)));
    let present = leaves.iter().map(|&l| brute_time(tree, l)).fold(0.0, f64::max);
    let mut pairs = Vec::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let (a, b) = (leaves[i], leaves[j]);
            let m = brute_mrca(tree, a, b);
            let dt = present - brute_time(tree, m);
            if q.min_distance.is_some_and(|min| dt < min) {
                continue;
            }
            pairs.push((a, b, m, dt));
        }
    }
    let topo: Vec<f64> = pairs
        .iter()
        .map(|&(a, b, m, _)| (path_down(tree, m, a).len() + path_down(tree, m, b).len() - 2) as f64)
        .collect();
    let dtn = normalize(&pairs.iter().map(|p| p.3).collect::<Vec<_>>());
    let ton = normalize(&topo);
    let alpha = q.distance_mix;
    let dist: Vec<f64> = dtn.iter().zip(&ton).map(|(&t, &e)| alpha * t + (1.0 - alpha) * e).collect();

    let deltas: Vec<Vec<f64>> = cols.iter().map(|c| pairs.iter().map(|&(a, b, _, _)| naive_delta(tree, c, a, b)).collect()).collect();
    let closes: Vec<Vec<f64>> = cols.iter().map(|c| pairs.iter().map(|&(a, b, _, _)| (c[a.0] - c[b.0]).abs()).collect()).collect();
    let per_trait: Vec<(Vec<usize>, Vec<u32>)> =
        (0..cols.len()).map(|k| ranks_of(&scores_for(q, &dist, &deltas[k], &closes[k]))).collect();
    let scores = scores_for(q, &dist, &deltas[primary], &closes[primary]);
    let threshold = ((pairs.len() as f64 * 0.01).ceil() as u32).max(1);

    per_trait[primary]
        .0
        .iter()
        .map(|&i| {
            let (a, b, m, dt) = pairs[i];
            let heat_ranks: Vec<u32> = per_trait.iter().map(|(_, r)| r[i]).collect();
            NaivePair {
                a: tree.label(a).into(),
                b: tree.label(b).into(),
                mrca: tree.label(m).into(),
                score: scores[i],
                rank: per_trait[primary].1[i],
                distance_time: dt,
                topo_edges: topo[i] as u32,
                delta: deltas[primary][i],
                closeness: closes[primary][i],
                top_rank_frequency: heat_ranks.iter().filter(|&&r| r <= threshold).count() as u32,
                heat_ranks,
            }
        })
        .collect()
}
