//! Summary statistics of simulated capacity paths.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::simulator::PathBundle;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(domain("no samples"));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Estimate {
            mean,
            std_error,
            samples: n,
        })
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Renewable share `X²/(X¹+X²)`, undefined for non-positive totals.
pub fn renewable_share(x: [f64; 2]) -> Option<f64> {
    let total = x[0] + x[1];
    (total > 0.0).then(|| x[1] / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 2]>,
    pub q05: Vec<[f64; 2]>,
    pub q95: Vec<[f64; 2]>,
    pub total_mean: Vec<f64>,
    /// Mean over paths of the pathwise renewable share.
    pub share_mean: Vec<f64>,
    /// Renewable share of the mean capacities.
    pub share_of_means: Vec<f64>,
    pub terminal_total: Estimate,
    pub terminal_share: Estimate,
    pub terminal_share_of_means: f64,
    /// Paths on which some capacity drops below zero.
    pub negative_capacity_paths: usize,
}

pub fn path_metrics(bundle: &PathBundle) -> Result<PathMetrics> {
    let n = bundle.n_paths;
    let len = bundle.grid.len();
    let mut mean = Vec::with_capacity(len);
    let mut q05 = Vec::with_capacity(len);
    let mut q95 = Vec::with_capacity(len);
    let mut total_mean = Vec::with_capacity(len);
    let mut share_mean = Vec::with_capacity(len);
    let mut share_of_means = Vec::with_capacity(len);
    let mut column = vec![0.0; n];
    for k in 0..len {
        let mut m = [0.0; 2];
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for j in 0..2 {
            for (p, c) in column.iter_mut().enumerate() {
                *c = bundle.path(p)[k][j];
            }
            m[j] = column.iter().sum::<f64>() / n as f64;
            column.sort_by(f64::total_cmp);
            lo[j] = quantile_sorted(&column, 0.05);
            hi[j] = quantile_sorted(&column, 0.95);
        }
        let shares: Vec<f64> = (0..n)
            .filter_map(|p| renewable_share(bundle.path(p)[k]))
            .collect();
        share_mean.push(if shares.is_empty() {
            f64::NAN
        } else {
            shares.iter().sum::<f64>() / shares.len() as f64
        });
        share_of_means.push(renewable_share(m).unwrap_or(f64::NAN));
        total_mean.push(m[0] + m[1]);
        mean.push(m);
        q05.push(lo);
        q95.push(hi);
    }
    let totals: Vec<f64> = (0..n).map(|p| bundle.terminal(p).iter().sum()).collect();
    let shares: Vec<f64> = (0..n)
        .filter_map(|p| renewable_share(bundle.terminal(p)))
        .collect();
    let negative_capacity_paths = (0..n)
        .filter(|&p| bundle.path(p).iter().any(|x| x[0] < 0.0 || x[1] < 0.0))
        .count();
    Ok(PathMetrics {
        times: bundle.grid.times(),
        terminal_total: Estimate::from_samples(&totals)?,
        terminal_share: Estimate::from_samples(&shares).unwrap_or(Estimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            samples: 0,
        }),
        terminal_share_of_means: *share_of_means.last().unwrap(),
        mean,
        q05,
        q95,
        total_mean,
        share_mean,
        share_of_means,
        negative_capacity_paths,
    })
}
