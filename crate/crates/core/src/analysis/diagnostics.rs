//! Per-chain summaries: jumps, acceptance, moments, histograms and ESS.

use serde::Serialize;

use super::stats::{effective_sample_size, mean_and_variance};
use crate::chain::ChainOutput;

#[derive(Clone, Debug, PartialEq)]
pub struct BinningSpec {
    pub histogram_bins: usize,
    /// Coordinate whose value at the start of each transition bins the step statistics.
    pub by_coordinate: Option<usize>,
    /// Bin edges for `by_coordinate`, increasing.
    pub coordinate_edges: Vec<f64>,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self {
            histogram_bins: 50,
            by_coordinate: None,
            coordinate_edges: Vec::new(),
        }
    }
}

impl BinningSpec {
    /// Funnel axis bins: unit width from -9 to 9.
    pub fn funnel_axis() -> Self {
        Self {
            histogram_bins: 60,
            by_coordinate: Some(0),
            coordinate_edges: (-9..=9).map(f64::from).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub mean_squared_jump: f64,
    pub acceptance_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSummary {
    pub squared_jumps: Vec<f64>,
    pub shift_acceptance_rate: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub ess: Vec<f64>,
    pub histograms: Vec<Histogram>,
    pub binned: Vec<BinStats>,
}

/// Summarizes a non-empty chain.
pub fn chain_diagnostics(chain: &ChainOutput, spec: &BinningSpec) -> ChainSummary {
    assert!(!chain.is_empty(), "diagnostics need at least one step");
    let squared_jumps: Vec<f64> = chain.records.iter().map(|r| r.squared_jump).collect();
    let mut means = Vec::with_capacity(chain.dim);
    let mut variances = Vec::with_capacity(chain.dim);
    let mut ess = Vec::with_capacity(chain.dim);
    let mut histograms = Vec::with_capacity(chain.dim);
    for j in 0..chain.dim {
        let xs = chain.coordinate(j);
        let (m, v) = mean_and_variance(&xs);
        means.push(m);
        variances.push(v);
        ess.push(effective_sample_size(&xs));
        histograms.push(Histogram::new(&xs, spec.histogram_bins));
    }
    let binned = match spec.by_coordinate {
        Some(j) if spec.coordinate_edges.len() >= 2 => {
            let edges = &spec.coordinate_edges;
            let mut acc = vec![(0u64, 0.0f64, 0u64); edges.len() - 1];
            let mut prev = chain.initial_state[j];
            for r in &chain.records {
                if let Some(k) = edges.windows(2).position(|w| prev >= w[0] && prev < w[1]) {
                    acc[k].0 += 1;
                    acc[k].1 += r.squared_jump;
                    acc[k].2 += r.shift_accepted as u64;
                }
                prev = r.next_state[j];
            }
            acc.iter()
                .zip(edges.windows(2))
                .map(|(&(count, jumps, accepted), w)| BinStats {
                    lo: w[0],
                    hi: w[1],
                    count,
                    mean_squared_jump: if count > 0 { jumps / count as f64 } else { f64::NAN },
                    acceptance_rate: if count > 0 { accepted as f64 / count as f64 } else { f64::NAN },
                })
                .collect()
        }
        _ => Vec::new(),
    };
    ChainSummary {
        squared_jumps,
        shift_acceptance_rate: chain.shift_acceptance_rate(),
        means,
        variances,
        ess,
        histograms,
        binned,
    }
}
