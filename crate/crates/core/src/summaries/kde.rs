//! Gaussian kernel density estimate on a fixed grid.

use serde::Serialize;

use super::stats::{iqr, std_dev};
use super::SummaryError;

pub const KDE_GRID_POINTS: usize = 128;
/// Grid padding beyond the data range, in bandwidths.
pub const KDE_PADDING: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl KdeCurve {
    /// Trapezoidal integral of the curve over its own grid.
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Grid point with the highest density.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.density.len() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        self.x[best]
    }
}

/// Silverman's rule `0.9·min(sd, IQR/1.34)·n^(−1/5)`.
///
/// When the IQR is zero but the sd is not, the sd alone is used. A sample
/// with zero sd falls back to `0.1·max(|mean|, 1)`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let sd = std_dev(values);
    if sd == 0.0 {
        let m = values.iter().sum::<f64>() / n;
        return m.abs().max(1.0) * 0.1;
    }
    let robust = iqr(values) / 1.34;
    let spread = if robust > 0.0 { sd.min(robust) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<KdeCurve, SummaryError> {
    if values.is_empty() {
        return Err(SummaryError::EmptyInput);
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(SummaryError::InvalidBandwidth(h)),
        None => silverman_bandwidth(values),
    };
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let lo = min - KDE_PADDING * h;
    let hi = max + KDE_PADDING * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let density = x
        .iter()
        .map(|&g| {
            let s: f64 = values
                .iter()
                .map(|&v| {
                    let u = (g - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * norm
        })
        .collect();
    Ok(KdeCurve { bandwidth: h, x, density })
}
