use std::fs;
use std::path::{Path, PathBuf};

use trevo_core::pattern::{pair_metrics, preset, score_all_pairs};
use trevo_core::synth::{
    default_convergent_pair, inject_convergence, random_tree, simulate, simulate_traits, Injection, SimConfig,
    SynthError, DEFAULT_LAMBDA,
};
use trevo_core::{validate_dataset, Severity, Strictness};

fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixture64_config() -> SimConfig {
    SimConfig { inject: Some(Injection { pair: None, lambda: DEFAULT_LAMBDA }), ..Default::default() }
}

#[test]
fn simulation_is_byte_deterministic_and_matches_the_committed_fixture() {
    let cfg = fixture64_config();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let sim = simulate(&cfg).unwrap();
        sim.dataset.write_dir(d.path(), Some(&sim.meta)).unwrap();
    }
    for file in ["tree.nwk", "traits.csv", "meta.txt"] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        assert_eq!(a, fs::read(dirs[1].path().join(file)).unwrap(), "{file}");
        assert_eq!(a, fs::read(fixture_dir("fixture64").join(file)).unwrap(), "{file} differs from the committed fixture");
    }
}

#[test]
fn injected_pair_ranks_first_on_the_fixture() {
    let sim = simulate(&fixture64_config()).unwrap();
    let (a, b) = sim.injected.clone().unwrap();
    let r = score_all_pairs(&sim.dataset, &preset("convergence").unwrap().query).unwrap();
    assert_eq!((r.pairs[0].a.as_str(), r.pairs[0].b.as_str()), (a.as_str(), b.as_str()));
    let m = &r.pairs[0].metrics;
    assert!(m.closeness / m.delta < 0.05);
}

#[test]
fn ratio_holds_at_lambda_point_nine() {
    let cfg = SimConfig { inject: Some(Injection { pair: None, lambda: 0.9 }), ..Default::default() };
    let sim = simulate(&cfg).unwrap();
    let (a, b) = sim.injected.unwrap();
    let m = &pair_metrics(&sim.dataset, &a, &b).unwrap().traits[0];
    assert!(m.closeness / m.delta < 0.05, "{m:?}");
}

#[test]
fn injection_edge_cases() {
    let sim = simulate(&SimConfig::default()).unwrap();
    let ds = &sim.dataset;
    let (a, b) = default_convergent_pair(ds.tree()).unwrap();
    assert_eq!(&inject_convergence(ds, &a, &b, 0.0).unwrap(), ds);
    assert!(matches!(inject_convergence(ds, &a, &b, -1.0), Err(SynthError::InvalidConfig(_))));
    assert!(matches!(inject_convergence(ds, &a, &b, 1.5), Err(SynthError::InvalidConfig(_))));
    assert!(inject_convergence(ds, &a, &b, 1.0).is_ok());
    assert!(matches!(inject_convergence(ds, &a, &a, 0.9), Err(SynthError::PairTooClose { .. })));
    assert!(matches!(inject_convergence(ds, &a, "nope", 0.9), Err(SynthError::Tree(_))));
    // Nodes off both paths keep their values.
    let injected = inject_convergence(ds, &a, &b, 0.9).unwrap();
    let t = ds.tree();
    let (ia, ib) = (t.id_of(&a).unwrap(), t.id_of(&b).unwrap());
    let before = ds.traits().continuous(0).unwrap();
    let after = injected.traits().continuous(0).unwrap();
    for v in t.ids() {
        if !t.is_ancestor_or_self(v, ia) && !t.is_ancestor_or_self(v, ib) {
            assert_eq!(before[v.0], after[v.0]);
        }
    }
    for k in 1..ds.traits().continuous_indices().len() {
        assert_eq!(ds.traits().continuous(k), injected.traits().continuous(k));
    }
}

/// Leaf variance under BM is sigma² times the root-to-leaf time (1 here).
#[test]
fn brownian_leaf_moments() {
    let sigma = 1.5;
    let n = 10_000;
    let values: Vec<f64> = (0..n as u64)
        .map(|seed| {
            let tree = random_tree(6, seed).unwrap();
            let cfg = SimConfig { n_leaves: 6, n_traits: 1, sigma, seed, inject: None };
            let ds = simulate_traits(&tree, &cfg).unwrap();
            let leaf = tree.id_of("s1").unwrap();
            ds.traits().continuous(0).unwrap()[leaf.0].value
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = sigma * sigma;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var} vs {expected}");
    assert!(mean.abs() < 3.0 * (expected / n as f64).sqrt(), "mean {mean}");
}

#[test]
fn simulated_datasets_validate_cleanly() {
    for seed in 0..1000u64 {
        let cfg = SimConfig { n_leaves: 2 + (seed as usize * 7) % 99, n_traits: 1 + seed as usize % 4, sigma: 0.5, seed, inject: None };
        let sim = simulate(&cfg).unwrap();
        let raw = sim.dataset.to_raw();
        let diags = validate_dataset(&raw, Strictness::Strict);
        assert!(diags.iter().all(|d| d.severity != Severity::Error), "seed {seed}: {diags:?}");
        assert!(diags.is_empty(), "seed {seed}: {diags:?}");
    }
}
