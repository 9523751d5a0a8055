//! Goodness-of-fit statistics, moments and effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).expect("df > 0").inverse_cdf(1.0 - alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.statistic <= chi_square_critical(self.df, alpha)
    }
}

/// Pearson goodness of fit of `counts` against `probabilities` (normalized here).
///
/// Adjacent cells are pooled left to right until each expected count is at least 5.
pub fn chi_square_gof(counts: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    assert_eq!(counts.len(), probabilities.len(), "one probability per cell");
    let n: u64 = counts.iter().sum();
    let total_p: f64 = probabilities.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probabilities) {
        obs += c as f64;
        exp += p / total_p * n as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(statistic);
    ChiSquareTest {
        statistic,
        df,
        p_value,
        cells: cells.len(),
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS distance at level `alpha`.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Normalized autocorrelation at lags `0..n`, computed by FFT.
pub fn autocorrelation(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let (mean, var) = mean_and_variance(xs);
    if var == 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Effective sample size with Geyer's initial monotone positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let rho = autocorrelation(xs);
    if rho.iter().skip(1).all(|&r| r == 0.0) {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = rho[2 * k] + rho[2 * k + 1];
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        tau += 2.0 * pair;
        k += 1;
    }
    n as f64 / tau.max(1.0 / n as f64)
}

/// Standard error of the mean using the effective sample size.
pub fn mcse_mean(xs: &[f64]) -> f64 {
    let (_, var) = mean_and_variance(xs);
    (var / effective_sample_size(xs)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn chi_square_critical_values() {
        // tabulated values
        assert!((chi_square_critical(1, 0.05) - 3.841459).abs() < 1e-5);
        assert!((chi_square_critical(10, 0.001) - 29.58830).abs() < 1e-4);
    }

    #[test]
    fn chi_square_pools_small_cells() {
        let t = chi_square_gof(&[50, 48, 1, 1], &[0.5, 0.48, 0.01, 0.01]);
        assert_eq!(t.cells, 2);
        assert!(t.passes(0.001));
    }

    #[test]
    fn ks_of_normal_sample() {
        let mut rng = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.standard_normal()).collect();
        assert!(ks_distance(&xs, normal_cdf) < 0.015);
        assert!(ks_distance(&xs, |x| normal_cdf(x - 0.5)) > 0.15);
    }

    #[test]
    fn ks_two_sample_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample_critical(0.05, 100, 100) - 0.1921).abs() < 1e-3);
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..300).map(|_| rng.standard_normal()).collect();
        let (m, _) = mean_and_variance(&xs);
        let c = |k: usize| (0..xs.len() - k).map(|i| (xs[i] - m) * (xs[i + k] - m)).sum::<f64>();
        let rho = autocorrelation(&xs);
        for k in [0usize, 1, 5, 50] {
            assert!((rho[k] - c(k) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn ess_of_ar1() {
        // AR(1) with coefficient a has integrated autocorrelation time (1 + a) / (1 - a)
        let mut rng = RngStream::new(3, 0);
        let a: f64 = 0.8;
        let n = 200_000;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                x = a * x + (1.0 - a * a).sqrt() * rng.standard_normal();
                x
            })
            .collect();
        let expected = n as f64 * (1.0 - a) / (1.0 + a);
        let ess = effective_sample_size(&xs);
        assert!((ess / expected - 1.0).abs() < 0.1, "{ess} vs {expected}");
    }

    #[test]
    fn ess_of_independent_draws() {
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..50_000).map(|_| rng.standard_normal()).collect();
        let ess = effective_sample_size(&xs);
        assert!((ess / 50_000.0 - 1.0).abs() < 0.1);
    }
}
