//! Pattern engine: scores every leaf pair against a target profile over three
//! metrics and ranks the pairs.
//!
//! - **distance**: time from the pair's MRCA to the present, mixed with the
//!   number of edges between the two leaves.
//! - **delta**: largest gap between the two ancestry trajectories of a
//!   continuous trait after the split.
//! - **closeness**: trait gap between the two extant leaves.
//!
//! Each metric is min-max normalized across all pairs, oriented by its
//! target (`high`, `low` or `ignore`) and combined as a weighted mean.

mod metrics;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::TreeError;

pub use metrics::{
    metric_closeness, metric_delta, metric_distance, pair_metrics, trajectory, PairMetrics, Trajectory,
    TrajectorySample, TraitPairMetrics,
};
pub use rank::{
    score_all_pairs, sort_by_rank_frequency, SCORE_TIE_RESOLUTION, Desirability, HeatCell, PairTable, RankedPair, Ranking, RawMetrics,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("dataset has no continuous trait")]
    NoContinuousTrait,
    #[error("at least two leaves are needed, found {0}")]
    TooFewLeaves(usize),
    #[error("unknown trait '{0}'")]
    UnknownTrait(String),
    #[error("trait '{0}' is not continuous")]
    KindMismatch(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("a pair needs two distinct leaves, got '{0}' twice")]
    SamePair(String),
    #[error("trajectories start at different nodes or times")]
    MismatchedRoot,
    #[error("no pair passes the minimum distance filter")]
    NoPairs,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    High,
    Low,
    Ignore,
}

impl Target {
    /// Desirability of a normalized metric value.
    #[inline]
    pub fn orient(self, normalized: f64) -> Option<f64> {
        match self {
            Target::High => Some(normalized),
            Target::Low => Some(1.0 - normalized),
            Target::Ignore => None,
        }
    }
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub target: Target,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

impl MetricSpec {
    pub const fn new(target: Target, weight: f64) -> Self {
        Self { target, weight }
    }

    fn is_active(&self) -> bool {
        self.target != Target::Ignore
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternQuery {
    /// Continuous trait that drives the ranking; the first continuous trait when unset.
    #[serde(default, rename = "trait")]
    pub primary_trait: Option<String>,
    pub distance: MetricSpec,
    pub delta: MetricSpec,
    pub closeness: MetricSpec,
    /// Share of MRCA time (vs edge count) inside the distance metric.
    #[serde(default = "half", rename = "alpha")]
    pub distance_mix: f64,
    #[serde(default, rename = "preset", skip_serializing_if = "Option::is_none")]
    pub preset_id: Option<String>,
    /// Drop pairs whose MRCA is more recent than this many time units before the present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
}

impl PatternQuery {
    pub fn new(distance: Target, delta: Target, closeness: Target) -> Self {
        Self {
            primary_trait: None,
            distance: MetricSpec::new(distance, 1.0),
            delta: MetricSpec::new(delta, 1.0),
            closeness: MetricSpec::new(closeness, 1.0),
            distance_mix: 0.5,
            preset_id: None,
            min_distance: None,
        }
    }

    pub fn with_trait(mut self, name: impl Into<String>) -> Self {
        self.primary_trait = Some(name.into());
        self
    }

    pub fn targets(&self) -> (Target, Target, Target) {
        (self.distance.target, self.delta.target, self.closeness.target)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |m: &str| Err(PatternError::InvalidQuery(m.to_string()));
        let specs = [("distance", self.distance), ("delta", self.delta), ("closeness", self.closeness)];
        for (name, s) in specs {
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return bad(&format!("{name} weight must be a finite non-negative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.distance_mix) {
            return bad("alpha must lie in [0, 1]");
        }
        if specs.iter().all(|(_, s)| !s.is_active()) {
            return bad("at least one metric target must be high or low");
        }
        if specs.iter().filter(|(_, s)| s.is_active()).map(|(_, s)| s.weight).sum::<f64>() <= 0.0 {
            return bad("active weights must sum to a positive value");
        }
        if let Some(m) = self.min_distance {
            if !(m >= 0.0 && m.is_finite()) {
                return bad("min_distance must be a finite non-negative number");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
    pub query: PatternQuery,
}

/// The six feasible high/low target triples over (distance, delta,
/// closeness). Triples with low delta and high closeness cannot occur since
/// closeness never exceeds delta.
pub fn presets() -> Vec<Preset> {
    use Target::{High as H, Low as L};
    let table = [
        ("convergence", "Convergence", "Old split, large divergence along the way, similar today", (H, H, L)),
        ("deep-divergence", "Deep divergence", "Old split and increasingly distinct values", (H, H, H)),
        ("ancient-stasis", "Ancient stasis", "Old split, yet values stayed close throughout", (H, L, L)),
        ("recent-rapid-divergence", "Recent rapid divergence", "Recent split with already distinct values", (L, H, H)),
        ("transient-excursion", "Transient excursion", "Recent split, a temporary gap that closed again", (L, H, L)),
        ("recent-stasis", "Recent stasis", "Recent split and little change", (L, L, L)),
    ];
    table
        .into_iter()
        .map(|(id, name, description, (d, dl, c))| {
            let mut query = PatternQuery::new(d, dl, c);
            query.preset_id = Some(id.to_string());
            Preset { id, name, description, query }
        })
        .collect()
}

pub fn preset(id: &str) -> Result<Preset, PatternError> {
    presets().into_iter().find(|p| p.id == id).ok_or_else(|| PatternError::UnknownPreset(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Target::*;

    #[test]
    fn convergence_preset_targets() {
        assert_eq!(preset("convergence").unwrap().query.targets(), (High, High, Low));
    }

    #[test]
    fn presets_are_the_feasible_grid() {
        let p = presets();
        assert_eq!(p.len(), 6);
        let triples: std::collections::HashSet<_> = p.iter().map(|x| x.query.targets()).collect();
        assert_eq!(triples.len(), 6);
        assert!(triples.iter().all(|&(_, d, c)| !(d == Low && c == High)));
        assert!(triples.iter().all(|&(a, b, c)| [a, b, c].iter().all(|t| *t != Ignore)));
        for x in &p {
            assert_eq!(x.query.distance_mix, 0.5);
            assert_eq!([x.query.distance.weight, x.query.delta.weight, x.query.closeness.weight], [1.0; 3]);
            x.query.validate().unwrap();
        }
        assert!(matches!(preset("nope"), Err(PatternError::UnknownPreset(_))));
    }

    #[test]
    fn query_validation() {
        let mut q = PatternQuery::new(Ignore, Ignore, Ignore);
        assert!(q.validate().is_err());
        q.delta = MetricSpec::new(High, 0.0);
        assert!(q.validate().is_err());
        q.delta.weight = 2.0;
        q.validate().unwrap();
        q.distance_mix = 1.5;
        assert!(q.validate().is_err());
        q.distance_mix = 0.0;
        q.closeness = MetricSpec::new(Low, -1.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn query_json_defaults() {
        let q: PatternQuery = serde_json::from_str(
            r#"{"distance":{"target":"high"},"delta":{"target":"high"},"closeness":{"target":"low","weight":2}}"#,
        )
        .unwrap();
        assert_eq!(q.distance_mix, 0.5);
        assert_eq!(q.delta.weight, 1.0);
        assert_eq!(q.closeness.weight, 2.0);
        assert_eq!(q.primary_trait, None);
    }
}
