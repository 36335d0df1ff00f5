mod common;

use proptest::prelude::*;
use rand::Rng;
use trevo_core::pattern::{
    metric_delta, pair_metrics, preset, presets, score_all_pairs, sort_by_rank_frequency, trajectory, MetricSpec,
    PairTable, PatternQuery, Ranking, Target,
};
use trevo_core::{Dataset, RawDataset, Strictness, TraitRow};

use common::naive::naive_rank;
use common::{fixture, random_dataset, rng};

fn random_query(r: &mut rand_chacha::ChaCha8Rng, n_traits: usize) -> PatternQuery {
    let targets = [Target::High, Target::Low, Target::Ignore];
    loop {
        let mut spec = || MetricSpec::new(targets[r.random_range(0..3)], [0.0, 0.5, 1.0, 2.0][r.random_range(0..4)]);
        let mut q = PatternQuery::new(Target::High, Target::High, Target::High);
        q.distance = spec();
        q.delta = spec();
        q.closeness = spec();
        q.distance_mix = [0.0, 0.5, 1.0, 0.3][r.random_range(0..4)];
        q.primary_trait = Some(format!("t{}", r.random_range(0..n_traits)));
        if r.random_bool(0.2) {
            q.min_distance = Some(r.random_range(0.0..1.0));
        }
        if q.validate().is_ok() {
            return q;
        }
    }
}

fn assert_matches_naive(ds: &Dataset, q: &PatternQuery, r: &Ranking) {
    let naive = naive_rank(ds, q);
    assert_eq!(r.pairs.len(), naive.len());
    assert_eq!(r.total_pairs, naive.len());
    for (got, want) in r.pairs.iter().zip(&naive) {
        assert_eq!((&got.a, &got.b, &got.mrca), (&want.a, &want.b, &want.mrca));
        assert_eq!(got.score.to_bits(), want.score.to_bits(), "{} {}", got.a, got.b);
        assert_eq!(got.rank, want.rank);
        assert_eq!(got.metrics.distance_time.to_bits(), want.distance_time.to_bits());
        assert_eq!(got.metrics.topo_edges, want.topo_edges);
        assert_eq!(got.metrics.delta.to_bits(), want.delta.to_bits());
        assert_eq!(got.metrics.closeness.to_bits(), want.closeness.to_bits());
        assert_eq!(got.heatmap.iter().map(|c| c.rank).collect::<Vec<_>>(), want.heat_ranks);
        assert_eq!(got.top_rank_frequency, want.top_rank_frequency);
    }
}

#[test]
fn ranking_matches_naive_oracle() {
    let mut r = rng(2024);
    for _ in 0..100 {
        let ds = random_dataset(&mut r, 10, 3);
        let q = random_query(&mut r, 3);
        match score_all_pairs(&ds, &q) {
            Ok(ranking) => assert_matches_naive(&ds, &q, &ranking),
            Err(e) => assert!(naive_rank(&ds, &q).is_empty(), "{e}"),
        }
        for p in presets() {
            assert_matches_naive(&ds, &p.query, &score_all_pairs(&ds, &p.query).unwrap());
        }
    }
}

fn check_ranking_invariants(r: &Ranking) {
    let p = r.total_pairs;
    let mut ranks: Vec<u32> = r.pairs.iter().map(|x| x.rank).collect();
    ranks.sort();
    assert_eq!(ranks, (1..=p as u32).collect::<Vec<_>>());
    assert!(r.pairs.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(r.pairs.iter().all(|x| (0.0..=1.0).contains(&x.score)));
    for col in 0..r.traits.len() {
        let mut rs: Vec<u32> = r.pairs.iter().map(|x| x.heatmap[col].rank).collect();
        rs.sort();
        assert_eq!(rs, (1..=p as u32).collect::<Vec<_>>());
        assert_eq!(r.pairs.iter().filter(|x| x.heatmap[col].top1pct).count(), r.top_threshold);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closeness_never_exceeds_delta(seed in any::<u64>(), n in 2usize..=25) {
        let ds = random_dataset(&mut rng(seed), n, 2);
        let table = PairTable::build(&ds).unwrap();
        prop_assert_eq!(table.len(), n * (n - 1) / 2);
        let r = table.rank(&ds, &preset("convergence").unwrap().query).unwrap();
        for p in &r.pairs {
            prop_assert!(p.metrics.closeness <= p.metrics.delta + 1e-9);
            prop_assert!(p.metrics.delta >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn invariants_hold_for_every_preset(seed in any::<u64>(), n in 2usize..=30) {
        let ds = random_dataset(&mut rng(seed), n, 3);
        for p in presets() {
            check_ranking_invariants(&score_all_pairs(&ds, &p.query).unwrap());
        }
    }

    /// v' = a·v + b on every node (a > 0) leaves the ranked order unchanged.
    #[test]
    fn affine_invariance(seed in any::<u64>(), a in 0.01f64..100.0, b in -1e3f64..1e3) {
        let ds = random_dataset(&mut rng(seed), 12, 2);
        let scaled = affine(&ds, "t0", a, b);
        for p in presets() {
            let q = p.query.clone().with_trait("t0");
            let x = score_all_pairs(&ds, &q).unwrap();
            let y = score_all_pairs(&scaled, &q).unwrap();
            let order = |r: &Ranking| r.pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect::<Vec<_>>();
            prop_assert_eq!(order(&x), order(&y));
            for (u, v) in x.pairs.iter().zip(&y.pairs) {
                prop_assert!((u.score - v.score).abs() < 1e-9);
            }
        }
    }
}

fn affine(ds: &Dataset, name: &str, a: f64, b: f64) -> Dataset {
    let mut raw = ds.to_raw();
    for row in &mut raw.trait_rows {
        if row.trait_name == name {
            row.value = a * row.value + b;
            row.lower = row.lower.map(|v| a * v + b);
            row.upper = row.upper.map(|v| a * v + b);
        }
    }
    Dataset::from_raw(&raw, Strictness::Strict).unwrap()
}

/// Raising one active desirability with the others fixed never lowers the
/// score: checked across every pair of every preset ranking.
#[test]
fn score_is_monotone_in_desirability() {
    let mut r = rng(9);
    for _ in 0..200 {
        let ds = random_dataset(&mut r, 10, 1);
        let table = PairTable::build(&ds).unwrap();
        for p in presets() {
            let ranking = table.rank(&ds, &p.query).unwrap();
            for x in &ranking.pairs {
                for y in &ranking.pairs {
                    let d = |p: &trevo_core::pattern::RankedPair| [p.desirability.distance, p.desirability.delta, p.desirability.closeness];
                    let (dx, dy) = (d(x), d(y));
                    let differ: Vec<usize> = (0..3).filter(|&i| dx[i] != dy[i]).collect();
                    if let [i] = differ[..] {
                        if dx[i] > dy[i] {
                            assert!(x.score >= y.score, "{:?} vs {:?}", dx, dy);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn delta_matches_dense_sampling() {
    let mut r = rng(31);
    for _ in 0..40 {
        let ds = random_dataset(&mut r, 12, 1);
        let t = ds.tree();
        let leaves: Vec<String> = t.leaves().iter().map(|&l| t.label(l).to_string()).collect();
        for _ in 0..5 {
            let a = &leaves[r.random_range(0..leaves.len())];
            let b = &leaves[r.random_range(0..leaves.len())];
            if a == b {
                continue;
            }
            let m = t.label(t.mrca_of_leaves(a, b).unwrap()).to_string();
            let ta = trajectory(&ds, &m, a, "t0").unwrap();
            let tb = trajectory(&ds, &m, b, "t0").unwrap();
            let delta = metric_delta(&ta, &tb).unwrap();
            let start = t.time(t.id_of(&m).unwrap());
            let end = t.present_time();
            let mut dense = 0.0f64;
            for i in 0..=10_000 {
                let x = start + (end - start) * i as f64 / 10_000.0;
                dense = dense.max((ta.estimate_at(x) - tb.estimate_at(x)).abs());
            }
            assert!(dense <= delta + 1e-9);
            // Every breakpoint is itself a sample point of the gap.
            let at_breaks = ta
                .samples
                .iter()
                .chain(&tb.samples)
                .map(|s| (ta.estimate_at(s.time) - tb.estimate_at(s.time)).abs())
                .fold(0.0, f64::max);
            assert!((at_breaks - delta).abs() < 1e-9);
            // Dense sampling converges to the exact value.
            assert!(delta - dense < (delta.max(1.0)) * 1e-2);
        }
    }
}

#[test]
fn fixture_examples() {
    let ds = fixture();
    let pm = pair_metrics(&ds, "A", "C").unwrap();
    assert_eq!((pm.distance_time, pm.topo_edges), (2.0, 4));
    assert_eq!(pm.traits[0].delta, 8.0);
    assert_eq!(pm.traits[0].closeness, 8.0);
    for p in presets() {
        check_ranking_invariants(&score_all_pairs(&ds, &p.query).unwrap());
    }
    let r = score_all_pairs(&ds, &preset("convergence").unwrap().query).unwrap();
    let freq = sort_by_rank_frequency(r.pairs.clone());
    assert!(freq.windows(2).all(|w| w[0].top_rank_frequency >= w[1].top_rank_frequency));
}

#[test]
fn two_leaf_tree_scores_one_half() {
    let rows = vec![
        TraitRow::continuous("A", "x", 1.0, None),
        TraitRow::continuous("B", "x", 2.0, None),
        TraitRow::continuous("R", "x", 1.5, Some((1.0, 2.0))),
    ];
    let ds = Dataset::from_raw(&RawDataset { newick_text: "(A:1,B:1)R;".into(), trait_rows: rows }, Strictness::Strict).unwrap();
    for p in presets() {
        let r = score_all_pairs(&ds, &p.query).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].score, 0.5);
        assert_eq!(r.pairs[0].rank, 1);
    }
}
