//! Random inputs shared by the integration tests.
#![allow(dead_code)]

pub mod naive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trevo_core::newick::parse_newick;
use trevo_core::{Dataset, PhyloTree, RawDataset, Strictness, TraitRow};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct TreeShape {
    /// Chance that an internal node gets an explicit label.
    pub internal_label_p: f64,
    /// Chance that a merge takes three children instead of two.
    pub polytomy_p: f64,
    /// Chance that a label needs quoting.
    pub quoted_p: f64,
}

impl Default for TreeShape {
    fn default() -> Self {
        Self { internal_label_p: 0.5, polytomy_p: 0.0, quoted_p: 0.0 }
    }
}

fn branch_length(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(1..20) as f64 * 0.25,
        _ => rng.random_range(1e-3..3.0),
    }
}

fn label(rng: &mut ChaCha8Rng, base: String, shape: &TreeShape) -> String {
    if rng.random_bool(shape.quoted_p) {
        format!("'{} x''{}'", base, rng.random_range(0..9))
    } else {
        base
    }
}

/// Random rooted tree in Newick form with `n` leaves; branch lengths are
/// positive, times are not ultrametric.
pub fn random_newick(rng: &mut ChaCha8Rng, n: usize, shape: &TreeShape) -> String {
    let mut pool: Vec<String> = (0..n).map(|i| label(rng, format!("L{i}"), shape)).collect();
    pool.shuffle(rng);
    let mut pool: Vec<String> = pool.into_iter().map(|l| format!("{l}:{}", branch_length(rng))).collect();
    let mut next = 0;
    while pool.len() > 1 {
        let take = if pool.len() >= 3 && rng.random_bool(shape.polytomy_p) { 3 } else { 2 };
        let mut kids = Vec::new();
        for _ in 0..take {
            let i = rng.random_range(0..pool.len());
            kids.push(pool.swap_remove(i));
        }
        let name = if rng.random_bool(shape.internal_label_p) {
            next += 1;
            label(rng, format!("N{next}"), shape)
        } else {
            String::new()
        };
        pool.push(format!("({}){name}:{}", kids.join(","), branch_length(rng)));
    }
    let root = pool.pop().unwrap();
    // Drop the root's length about half the time.
    let root = if rng.random_bool(0.5) { root[..root.rfind(':').unwrap()].to_string() } else { root };
    format!("{root};")
}

pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> PhyloTree {
    parse_newick(&random_newick(rng, n, &TreeShape::default())).unwrap()
}

/// Strict-valid dataset on a random binary tree with `n_cont` continuous
/// traits `t0..` and one discrete trait `d` with states `s0..s2`.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, n_cont: usize) -> Dataset {
    let text = random_newick(rng, n, &TreeShape::default());
    let tree = parse_newick(&text).unwrap();
    let mut rows = Vec::new();
    for v in tree.ids() {
        let name = tree.label(v);
        for k in 0..n_cont {
            // Coarse values make ties and constant metrics likely.
            let x = if rng.random_bool(0.3) { rng.random_range(0..4) as f64 } else { rng.random_range(-5.0..5.0) };
            let bounds = (!tree.is_leaf(v)).then(|| (x - rng.random_range(0.0..1.0), x + rng.random_range(0.0..1.0)));
            rows.push(TraitRow::continuous(name, &format!("t{k}"), x, bounds));
        }
        if tree.is_leaf(v) {
            rows.push(TraitRow::discrete(name, "d", &format!("s{}", rng.random_range(0..3)), 1.0));
        } else {
            let a: f64 = rng.random_range(0.0..1.0);
            rows.push(TraitRow::discrete(name, "d", "s0", a));
            rows.push(TraitRow::discrete(name, "d", "s1", 1.0 - a));
        }
    }
    Dataset::from_raw(&RawDataset { newick_text: text, trait_rows: rows }, Strictness::Strict).unwrap()
}

pub const FIXTURE_NEWICK: &str = "((A:1,B:1)N1:1,(C:1.5,D:1.5)N2:0.5)R;";

/// The 7-node fixture with `svl` (continuous) and `island` (discrete).
pub fn fixture() -> Dataset {
    let mut rows = Vec::new();
    for (l, v, island) in [("A", 14.0, "Cuba"), ("B", 13.0, "Cuba"), ("C", 6.0, "Hispaniola"), ("D", 7.0, "Hispaniola")] {
        rows.push(TraitRow::continuous(l, "svl", v, None));
        rows.push(TraitRow::discrete(l, "island", island, 1.0));
    }
    for (l, v) in [("R", 10.0), ("N1", 12.0), ("N2", 8.0)] {
        rows.push(TraitRow::continuous(l, "svl", v, Some((v - 2.0, v + 2.0))));
        rows.push(TraitRow::discrete(l, "island", "Cuba", 0.5));
        rows.push(TraitRow::discrete(l, "island", "Hispaniola", 0.5));
    }
    Dataset::from_raw(&RawDataset { newick_text: FIXTURE_NEWICK.into(), trait_rows: rows }, Strictness::Strict).unwrap()
}
