use serde::Serialize;

use super::PatternError;
use crate::dataset::Dataset;
use crate::traits::TraitKind;
use crate::tree::{NodeId, PhyloTree};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub node: String,
    pub time: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Trait values along the path from an ancestor down to a leaf.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub leaf: String,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    /// Piecewise-linear interpolation of the estimates; constant after the
    /// last sample.
    pub fn estimate_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let i = s.partition_point(|x| x.time <= t);
        if i == s.len() {
            return s[i - 1].estimate;
        }
        if i == 0 {
            return s[0].estimate;
        }
        let k = i - 1;
        if s[k].time == t {
            s[k].estimate
        } else {
            lerp(s[k].estimate, s[i].estimate, s[k].time, s[i].time, t)
        }
    }
}

#[inline]
pub(crate) fn lerp(v0: f64, v1: f64, t0: f64, t1: f64, t: f64) -> f64 {
    v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
}

pub(crate) fn continuous_index(ds: &Dataset, name: &str) -> Result<usize, PatternError> {
    let t = ds.traits().index_of(name).ok_or_else(|| PatternError::UnknownTrait(name.to_string()))?;
    if ds.traits().def(t).kind != TraitKind::Continuous {
        return Err(PatternError::KindMismatch(name.to_string()));
    }
    Ok(t)
}

pub(crate) fn trajectory_of(ds: &Dataset, ancestor: NodeId, leaf: NodeId, t: usize) -> Result<Trajectory, PatternError> {
    let tree = ds.tree();
    let col = ds.traits().continuous(t).ok_or_else(|| PatternError::KindMismatch(ds.traits().def(t).name.clone()))?;
    let samples = tree
        .path_from(ancestor, leaf)?
        .into_iter()
        .map(|v| TrajectorySample {
            node: tree.label(v).to_string(),
            time: tree.time(v),
            estimate: col[v.0].value,
            lower: col[v.0].lower,
            upper: col[v.0].upper,
        })
        .collect();
    Ok(Trajectory { leaf: tree.label(leaf).to_string(), samples })
}

/// Samples of `trait_name` from `ancestor` down to `leaf`.
pub fn trajectory(ds: &Dataset, ancestor: &str, leaf: &str, trait_name: &str) -> Result<Trajectory, PatternError> {
    let tree = ds.tree();
    let t = continuous_index(ds, trait_name)?;
    trajectory_of(ds, tree.require(ancestor)?, tree.require_leaf(leaf)?, t)
}

/// `(present − time(mrca), edges between the leaves)`.
pub fn metric_distance(tree: &PhyloTree, a: &str, b: &str) -> Result<(f64, u32), PatternError> {
    let (ia, ib) = (tree.require_leaf(a)?, tree.require_leaf(b)?);
    if ia == ib {
        return Err(PatternError::SamePair(a.to_string()));
    }
    let m = tree.mrca(ia, ib);
    Ok((tree.present_time() - tree.time(m), tree.topo_edges(ia, ib)))
}

/// Maximum absolute gap between two trajectories that start at the same
/// ancestor. The gap is piecewise linear, so evaluating it at the union of
/// both trajectories' sample times is exact.
pub fn metric_delta(a: &Trajectory, b: &Trajectory) -> Result<f64, PatternError> {
    let (Some(fa), Some(fb)) = (a.samples.first(), b.samples.first()) else {
        return Err(PatternError::MismatchedRoot);
    };
    if fa.node != fb.node || fa.time != fb.time {
        return Err(PatternError::MismatchedRoot);
    }
    let mut times: Vec<f64> = a.samples.iter().chain(&b.samples).map(|s| s.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times.into_iter().map(|t| (a.estimate_at(t) - b.estimate_at(t)).abs()).fold(0.0, f64::max))
}

/// Absolute difference of two leaf values.
pub fn metric_closeness(ds: &Dataset, a: &str, b: &str, trait_name: &str) -> Result<f64, PatternError> {
    let t = continuous_index(ds, trait_name)?;
    let col = ds.traits().continuous(t).expect("checked continuous");
    let (ia, ib) = (ds.tree().require_leaf(a)?, ds.tree().require_leaf(b)?);
    Ok((col[ia.0].value - col[ib.0].value).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraitPairMetrics {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub delta: f64,
    pub closeness: f64,
}

/// All raw metrics of one leaf pair; `a < b` lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMetrics {
    pub a: String,
    pub b: String,
    pub mrca: String,
    pub distance_time: f64,
    pub topo_edges: u32,
    pub traits: Vec<TraitPairMetrics>,
}

pub fn pair_metrics(ds: &Dataset, a: &str, b: &str) -> Result<PairMetrics, PatternError> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let tree = ds.tree();
    let (distance_time, topo_edges) = metric_distance(tree, a, b)?;
    let (ia, ib) = (tree.require_leaf(a)?, tree.require_leaf(b)?);
    let m = tree.mrca(ia, ib);
    let mut traits = Vec::new();
    for t in ds.traits().continuous_indices() {
        let ta = trajectory_of(ds, m, ia, t)?;
        let tb = trajectory_of(ds, m, ib, t)?;
        let col = ds.traits().continuous(t).expect("continuous");
        traits.push(TraitPairMetrics {
            trait_name: ds.traits().def(t).name.clone(),
            delta: metric_delta(&ta, &tb)?,
            closeness: (col[ia.0].value - col[ib.0].value).abs(),
        });
    }
    Ok(PairMetrics { a: a.into(), b: b.into(), mrca: tree.label(m).into(), distance_time, topo_edges, traits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RawDataset;
    use crate::traits::{Strictness, TraitRow};

    pub(crate) fn fixture() -> Dataset {
        let mut rows = Vec::new();
        for (l, v) in [("A", 14.0), ("B", 13.0), ("C", 6.0), ("D", 7.0)] {
            rows.push(TraitRow::continuous(l, "svl", v, None));
            rows.push(TraitRow::discrete(l, "island", if v > 10.0 { "Cuba" } else { "Hispaniola" }, 1.0));
        }
        for (l, v, lo, hi) in [("R", 10.0, 8.0, 12.0), ("N1", 12.0, 10.0, 14.0), ("N2", 8.0, 6.0, 10.0)] {
            rows.push(TraitRow::continuous(l, "svl", v, Some((lo, hi))));
            rows.push(TraitRow::discrete(l, "island", "Cuba", 0.5));
            rows.push(TraitRow::discrete(l, "island", "Hispaniola", 0.5));
        }
        let raw = RawDataset { newick_text: "((A:1,B:1)N1:1,(C:1.5,D:1.5)N2:0.5)R;".into(), trait_rows: rows };
        Dataset::from_raw(&raw, Strictness::Strict).unwrap()
    }

    fn tuples(t: &Trajectory) -> Vec<(f64, f64, f64, f64)> {
        t.samples.iter().map(|s| (s.time, s.estimate, s.lower, s.upper)).collect()
    }

    #[test]
    fn trajectory_read_through() {
        let ds = fixture();
        let t = trajectory(&ds, "R", "A", "svl").unwrap();
        assert_eq!(tuples(&t), [(0.0, 10.0, 8.0, 12.0), (1.0, 12.0, 10.0, 14.0), (2.0, 14.0, 14.0, 14.0)]);
        let single = trajectory(&ds, "A", "A", "svl").unwrap();
        assert_eq!(tuples(&single), [(2.0, 14.0, 14.0, 14.0)]);
        assert!(matches!(trajectory(&ds, "R", "A", "island"), Err(PatternError::KindMismatch(_))));
        assert!(matches!(trajectory(&ds, "N2", "A", "svl"), Err(PatternError::Tree(_))));
    }

    #[test]
    fn distance_on_fixture() {
        let ds = fixture();
        assert_eq!(metric_distance(ds.tree(), "A", "C").unwrap(), (2.0, 4));
        assert_eq!(metric_distance(ds.tree(), "A", "B").unwrap(), (1.0, 2));
        assert_eq!(metric_distance(ds.tree(), "C", "D").unwrap().1, 2);
        assert!(matches!(metric_distance(ds.tree(), "A", "A"), Err(PatternError::SamePair(_))));
    }

    #[test]
    fn delta_on_fixture() {
        let ds = fixture();
        let ta = trajectory(&ds, "R", "A", "svl").unwrap();
        let tc = trajectory(&ds, "R", "C", "svl").unwrap();
        // Gaps at t = 0, 0.5, 1, 2 are 0, 3, 4.667, 8.
        assert_eq!(metric_delta(&ta, &tc).unwrap(), 8.0);
        assert!((ta.estimate_at(1.0) - tc.estimate_at(1.0) - 14.0 / 3.0).abs() < 1e-12);
        assert_eq!(metric_delta(&ta, &ta).unwrap(), 0.0);
        let tn = trajectory(&ds, "N1", "A", "svl").unwrap();
        assert_eq!(metric_delta(&ta, &tn), Err(PatternError::MismatchedRoot));
    }

    #[test]
    fn delta_of_shifted_copy_is_the_shift() {
        let ds = fixture();
        let ta = trajectory(&ds, "R", "C", "svl").unwrap();
        for c in [0.25, 3.0, 17.5] {
            let mut tb = ta.clone();
            tb.samples.iter_mut().for_each(|s| s.estimate += c);
            assert!((metric_delta(&ta, &tb).unwrap() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn closeness() {
        let ds = fixture();
        assert_eq!(metric_closeness(&ds, "A", "C", "svl").unwrap(), 8.0);
        assert_eq!(metric_closeness(&ds, "A", "A", "svl").unwrap(), 0.0);
        let pm = pair_metrics(&ds, "C", "A").unwrap();
        assert_eq!((pm.a.as_str(), pm.b.as_str(), pm.mrca.as_str()), ("A", "C", "R"));
        assert!(pm.traits[0].closeness <= pm.traits[0].delta);
    }
}
