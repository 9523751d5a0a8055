//! Log-space helpers shared by the samplers and the analysis layer.

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `base + t * dir`, written into `out`.
#[inline]
pub fn axpy_into(base: &[f64], t: f64, dir: &[f64], out: &mut [f64]) {
    for ((o, b), r) in out.iter_mut().zip(base).zip(dir) {
        *o = b + t * r;
    }
}

/// Residue of `x` modulo `h`, mapped into `[-h/2, h/2)`.
///
/// Ties at the half-cell are rounded down so the closed end of the interval is `-h/2`.
pub fn centered_residue(x: f64, h: f64) -> f64 {
    let r = x - h * (x / h + 0.5).floor();
    if r >= 0.5 * h {
        r - h
    } else if r < -0.5 * h {
        r + h
    } else {
        r
    }
}

/// Residue of `x` modulo `h` in `[0, h)`.
pub fn positive_residue(x: f64, h: f64) -> f64 {
    let r = x - h * (x / h).floor();
    if r >= h {
        r - h
    } else if r < 0.0 {
        r + h
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_huge_spread() {
        let v = [-1000.0, 0.0, -1000.0];
        assert!((log_sum_exp(&v) - 0.0).abs() < 1e-300_f64.max(1e-15));
        let v = [700.0, 700.0];
        assert!((log_sum_exp(&v) - (700.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_add_exp_matches_direct() {
        for &(a, b) in &[(0.0, 0.0), (-3.0, 1.5), (2.0, -40.0)] {
            let direct = (f64::exp(a) + f64::exp(b)).ln();
            assert!((log_add_exp(a, b) - direct).abs() < 1e-12);
        }
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -2.0), -2.0);
    }

    #[test]
    fn residues_land_in_their_intervals() {
        let h = 0.3;
        for k in -50..50 {
            let x = k as f64 * 0.0731 - 0.4;
            let c = centered_residue(x, h);
            assert!((-0.5 * h..0.5 * h).contains(&c), "{x} -> {c}");
            assert!((((x - c) / h).round() * h - (x - c)).abs() < 1e-12);
            let p = positive_residue(x, h);
            assert!((0.0..h).contains(&p));
        }
        assert_eq!(centered_residue(0.5, 1.0), -0.5);
        assert_eq!(centered_residue(-0.5, 1.0), -0.5);
    }
}
