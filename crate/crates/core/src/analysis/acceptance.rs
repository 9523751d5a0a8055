//! Metropolis acceptance of the lattice shift and of random-walk proposals.

use crate::error::{invalid, Result};
use crate::math::axpy_into;
use crate::rng::RngStream;
use crate::target::TargetDensity;

/// Quadratic smoothness profile `psi(r) = L r^2 / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessSpec {
    pub curvature: f64,
}

impl SmoothnessSpec {
    pub fn new(curvature: f64) -> Result<Self> {
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(invalid("L", format!("curvature bound must be > 0, got {curvature}")));
        }
        Ok(Self { curvature })
    }

    pub fn psi(&self, r: f64) -> f64 {
        0.5 * self.curvature * r * r
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Estimate {
            mean,
            std_error: (var / nf).sqrt(),
            draws: n,
        }
    }
}

/// Lower bound `1/2 exp(-psi(h/2))` on the shift acceptance probability.
pub fn shift_acceptance_lower_bound(h: f64, smoothness: &SmoothnessSpec) -> f64 {
    0.5 * (-smoothness.psi(0.5 * h)).exp()
}

/// Lower bound `1/2 exp(-E psi(|xi|))` on the RWM acceptance probability, using `E|xi|^2 = h^2`.
pub fn rwm_acceptance_lower_bound(h: f64, smoothness: &SmoothnessSpec) -> f64 {
    0.5 * (-smoothness.psi(h)).exp()
}

fn min_ratio_mean(n_draws: usize, mut draw: impl FnMut() -> f64) -> Result<Estimate> {
    if n_draws == 0 {
        return Err(invalid("n_draws", "need at least one draw"));
    }
    let (mut s, mut ss) = (0.0, 0.0);
    for _ in 0..n_draws {
        let a = draw();
        s += a;
        ss += a * a;
    }
    Ok(Estimate::from_sums(s, ss, n_draws))
}

/// Estimates `E[1 ∧ µ(θ + s'ρ)/µ(θ)]` over `s' ~ Unif[-h/2, h/2)`.
pub fn acceptance_probability_estimate<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    rho: &[f64],
    h: f64,
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let lp0 = target.log_density(theta);
    let mut buf = vec![0.0; theta.len()];
    min_ratio_mean(n_draws, || {
        let s = rng.uniform_in(-0.5 * h, 0.5 * h);
        axpy_into(theta, s, rho, &mut buf);
        (target.log_density(&buf) - lp0).min(0.0).exp()
    })
}

/// Estimates `E[1 ∧ µ(θ + ξ)/µ(θ)]` over `ξ ~ N(0, h^2/d I)`.
pub fn rwm_acceptance_estimate<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    h: f64,
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let lp0 = target.log_density(theta);
    let scale = h / (theta.len() as f64).sqrt();
    let mut buf = vec![0.0; theta.len()];
    min_ratio_mean(n_draws, || {
        rng.fill_standard_normal(&mut buf);
        buf.iter_mut().zip(theta).for_each(|(b, t)| *b = t + scale * *b);
        (target.log_density(&buf) - lp0).min(0.0).exp()
    })
}
