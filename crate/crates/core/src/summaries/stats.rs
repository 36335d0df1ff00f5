//! Small descriptive statistics used by the bin summaries.

use serde::Serialize;

/// Minimum sample size for outlier flagging.
pub const MIN_OUTLIER_SAMPLE: usize = 4;
/// Tukey fence multiplier.
pub const TUKEY_K: f64 = 1.5;
/// Half-range of dot-plot jitter, as a fraction of the lane height.
pub const JITTER_HALF_RANGE: f64 = 0.4;

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| quantile_sorted(&sorted(values), 0.5))
}

pub fn iqr(values: &[f64]) -> f64 {
    let s = sorted(values);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Indices of values outside `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]`. Samples smaller
/// than four never produce outliers.
pub fn find_outliers(values: &[f64]) -> Vec<usize> {
    if values.len() < MIN_OUTLIER_SAMPLE {
        return Vec::new();
    }
    let s = sorted(values);
    let (q1, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75));
    let spread = TUKEY_K * (q3 - q1);
    let (lo, hi) = (q1 - spread, q3 + spread);
    (0..values.len()).filter(|&i| values[i] < lo || values[i] > hi).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Sturges bin count: ⌈log₂ n⌉ + 1.
pub fn sturges_bins(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (n as f64).log2().ceil() as usize + 1
    }
}

/// Equal-width histogram over `[min, max]`; intervals are half-open except
/// the last. A constant sample gets one bin of width 1 centred on the value.
pub fn histogram(values: &[f64], bins: Option<usize>) -> Option<Histogram> {
    if values.is_empty() {
        return None;
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if min == max {
        return Some(Histogram { edges: vec![min - 0.5, max + 0.5], counts: vec![values.len()] });
    }
    let k = bins.unwrap_or_else(|| sturges_bins(values.len())).max(1);
    let width = (max - min) / k as f64;
    let mut edges: Vec<f64> = (0..k).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    let mut counts = vec![0usize; k];
    for &x in values {
        counts[edges[1..k].partition_point(|&e| e <= x)] += 1;
    }
    Some(Histogram { edges, counts })
}

/// Deterministic vertical offset in `[−0.4, 0.4]` for a dot keyed by
/// `(node, state)` under `seed`.
pub fn jitter(seed: u64, node: &str, state: &str) -> f64 {
    // FNV-1a, then the splitmix64 finalizer to spread low-entropy keys.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(node.as_bytes());
    eat(&[0xff]);
    eat(state.as_bytes());
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    let unit = (z >> 11) as f64 / (1u64 << 53) as f64;
    (2.0 * unit - 1.0) * JITTER_HALF_RANGE
}
