//! Reference kernels: Random Walk Metropolis, exact Hit-and-Run on Gaussians and the
//! infinite-orbit lattice samplers (uniform shift and Metropolis-adjusted shift).

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::kernel::{sample_direction, shift_with};
use crate::math::{axpy_into, log_sum_exp};
use crate::rng::RngStream;
use crate::target::{GaussianSpec, TargetDensity};

/// Random Walk Metropolis with `xi ~ N(0, h^2/d I)`. Returns `(θ', accepted)`.
pub fn rwm_step<T: TargetDensity + ?Sized>(target: &T, theta: &[f64], h: f64, rng: &mut RngStream) -> (Vec<f64>, bool) {
    let (next, accepted, _) = rwm_step_with(target, theta, target.log_density(theta), h, rng);
    (next, accepted)
}

pub(crate) fn rwm_step_with<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    theta_log_density: f64,
    h: f64,
    rng: &mut RngStream,
) -> (Vec<f64>, bool, f64) {
    let scale = h / (theta.len() as f64).sqrt();
    let mut proposal = vec![0.0; theta.len()];
    rng.fill_standard_normal(&mut proposal);
    proposal.iter_mut().zip(theta).for_each(|(p, t)| *p = t + scale * *p);
    let lp = target.log_density(&proposal);
    let u = rng.uniform();
    if u < (lp - theta_log_density).min(0.0).exp() {
        (proposal, true, lp)
    } else {
        (theta.to_vec(), false, theta_log_density)
    }
}

/// Exact Hit-and-Run for `N(0, C)`: uniform direction, then an exact draw from
/// the target restricted to the line.
pub fn hit_and_run_step_gaussian(spec: &GaussianSpec, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let rho = sample_direction(theta.len(), rng);
    let (mean, var) = spec.displacement_params(theta, &rho);
    let t = mean + var.sqrt() * rng.standard_normal();
    let mut out = vec![0.0; theta.len()];
    axpy_into(theta, t, &rho, &mut out);
    out
}

/// How far an infinite lattice is truncated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Upper bound on the probability mass left outside the window.
    pub tail_mass_tol: f64,
    /// Maximum number of lattice points on each side of the window center.
    pub hard_cap: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_mass_tol: 1e-6,
            hard_cap: 1 << 20,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_mass_tol > 0.0 && self.tail_mass_tol < 1.0) {
            return Err(invalid("tail_mass_tol", format!("must lie in (0, 1), got {}", self.tail_mass_tol)));
        }
        if self.hard_cap < 1 {
            return Err(invalid("hard_cap", "must be at least 1"));
        }
        Ok(())
    }
}

/// Categorical distribution over `offset + i h`, `i` in a window, with weights
/// `N(offset + i h; mean, var)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeCategorical {
    pub spacing: f64,
    pub offset: f64,
    pub lowest_index: i64,
    /// Unnormalized log-weights from `lowest_index` upward.
    pub log_weights: Vec<f64>,
    /// Upper bound on the mass outside the window, relative to the mass inside.
    pub tail_mass: f64,
    log_normalizer: f64,
}

impl LatticeCategorical {
    pub fn highest_index(&self) -> i64 {
        self.lowest_index + self.log_weights.len() as i64 - 1
    }

    pub fn probability(&self, i: i64) -> f64 {
        if i < self.lowest_index || i > self.highest_index() {
            return 0.0;
        }
        (self.log_weights[(i - self.lowest_index) as usize] - self.log_normalizer).exp()
    }

    pub fn sample(&self, rng: &mut RngStream) -> i64 {
        crate::kernel::categorical_select(&self.log_weights, self.lowest_index, rng)
    }
}

/// Standard normal upper tail `P(Z > x)`.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Builds the truncated categorical over `offset + hZ` weighted by `N(mean, var)`.
///
/// The window is centered at the lattice point nearest `mean` and grown until the
/// Gaussian-integral bound on the excluded mass falls below the tolerance.
pub fn lattice_categorical(mean: f64, var: f64, h: f64, offset: f64, policy: &TruncationPolicy) -> Result<LatticeCategorical> {
    policy.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("lattice spacing must be finite and > 0, got {h}")));
    }
    if !(var > 0.0 && var.is_finite() && mean.is_finite()) {
        return Err(invalid("var", format!("displacement law N({mean}, {var}) is not proper")));
    }
    let sd = var.sqrt();
    let center = ((mean - offset) / h).round();
    if !center.is_finite() || center.abs() > i64::MAX as f64 / 4.0 {
        return Err(invalid("mean", "displacement mean is too far from the lattice origin"));
    }
    let center = center as i64;
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - 0.5 * policy.tail_mass_tol);
    let log_w = |i: i64| {
        let t = offset + i as f64 * h - mean;
        -0.5 * t * t / var
    };
    let mut radius = (z * sd / h).ceil() as u64 + 1;
    loop {
        if radius > policy.hard_cap {
            return Err(Error::WindowTooLarge {
                required: radius,
                cap: policy.hard_cap,
            });
        }
        let r = radius as i64;
        let weights: Vec<f64> = (center - r..=center + r).map(log_w).collect();
        let lse = log_sum_exp(&weights);
        // mass beyond each edge is bounded by the integral of the weight from the edge outward
        let right_gap = (offset + (center + r) as f64 * h - mean) / sd;
        let left_gap = (mean - offset - (center - r) as f64 * h) / sd;
        let integral = sd * (2.0 * std::f64::consts::PI).sqrt() / h * (upper_tail(right_gap) + upper_tail(left_gap));
        let tail_mass = integral / lse.exp();
        if tail_mass <= policy.tail_mass_tol {
            return Ok(LatticeCategorical {
                spacing: h,
                offset,
                lowest_index: center - r,
                log_weights: weights,
                tail_mass,
                log_normalizer: lse,
            });
        }
        radius = radius.saturating_mul(2);
    }
}

/// The categorical over `base + (offset + i h) rho` weighted by the target along the line.
pub fn lattice_categorical_gaussian(
    spec: &GaussianSpec,
    base: &[f64],
    rho: &[f64],
    h: f64,
    offset: f64,
    policy: &TruncationPolicy,
) -> Result<LatticeCategorical> {
    let (mean, var) = spec.displacement_params(base, rho);
    lattice_categorical(mean, var, h, offset, policy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfiniteOrbitStep {
    pub next_state: Vec<f64>,
    pub shift: f64,
    pub shift_accepted: bool,
    /// Selected lattice index relative to the shifted base.
    pub index: i64,
    pub tail_mass: f64,
}

#[allow(clippy::too_many_arguments)]
fn lattice_move(
    spec: &GaussianSpec,
    theta: &[f64],
    rho: &[f64],
    h: f64,
    shift: f64,
    accepted: bool,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<InfiniteOrbitStep> {
    let cat = lattice_categorical_gaussian(spec, theta, rho, h, shift, policy)?;
    let index = cat.sample(rng);
    let mut next_state = vec![0.0; theta.len()];
    axpy_into(theta, shift + index as f64 * h, rho, &mut next_state);
    Ok(InfiniteOrbitStep {
        next_state,
        shift,
        shift_accepted: accepted,
        index,
        tail_mass: cat.tail_mass,
    })
}

/// Infinite-orbit step with an unadjusted uniform shift `s ~ Unif[-h/2, h/2)`.
pub fn infinite_orbit_step_uniform(
    spec: &GaussianSpec,
    theta: &[f64],
    h: f64,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<InfiniteOrbitStep> {
    let rho = sample_direction(theta.len(), rng);
    let s = rng.uniform_in(-0.5 * h, 0.5 * h);
    lattice_move(spec, theta, &rho, h, s, true, policy, rng)
}

/// Infinite-orbit step whose shift is Metropolis-filtered; a rejected shift keeps
/// the unshifted lattice through `θ`.
pub fn infinite_orbit_step_adjusted(
    spec: &GaussianSpec,
    theta: &[f64],
    h: f64,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<InfiniteOrbitStep> {
    let rho = sample_direction(theta.len(), rng);
    let shift = shift_with(spec, theta, spec.log_density(theta), &rho, h, rng);
    lattice_move(spec, theta, &rho, h, shift.shift, shift.accepted, policy, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::chi_square_critical;
    use crate::target::FnTarget;

    fn std_normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn rwm_flat_always_accepts() {
        let flat = FnTarget::new(3, |_x: &[f64]| 1.0);
        let mut rng = RngStream::new(1, 0);
        assert!((0..1000).all(|_| rwm_step(&flat, &[0.0, 1.0, 2.0], 0.7, &mut rng).1));
    }

    #[test]
    fn rwm_acceptance_bound() {
        let g = GaussianSpec::isotropic(1);
        let mut rng = RngStream::new(2, 0);
        let n = 1_000_000;
        let h = 0.5;
        let acc = (0..n).filter(|_| rwm_step(&g, &[0.0], h, &mut rng).1).count();
        let p = acc as f64 / n as f64;
        let bound = 0.5 * (-h * h / 2.0f64).exp();
        assert!((bound - 0.4412).abs() < 1e-4);
        assert!(p >= bound - 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn rwm_rejection_returns_input() {
        let g = GaussianSpec::isotropic(2);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            let (x, a) = rwm_step(&g, &[3.0, -3.0], 2.0, &mut rng);
            if !a {
                assert_eq!(x, vec![3.0, -3.0]);
            }
        }
    }

    #[test]
    fn one_dimensional_hit_and_run_is_exact() {
        // the line is the whole space, so every step is an independent N(0,1) draw
        let g = GaussianSpec::isotropic(1);
        let mut rng = RngStream::new(4, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| hit_and_run_step_gaussian(&g, &[7.5], &mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn hit_and_run_moments_two_dimensions() {
        let g = GaussianSpec::isotropic(2);
        let mut rng = RngStream::new(5, 0);
        let mut x = vec![10.0, 10.0];
        let n = 200_000;
        let mut s = [0.0; 2];
        let mut ss = [0.0; 2];
        for k in 0..n + 100 {
            x = hit_and_run_step_gaussian(&g, &x, &mut rng);
            if k >= 100 {
                for j in 0..2 {
                    s[j] += x[j];
                    ss[j] += x[j] * x[j];
                }
            }
        }
        for j in 0..2 {
            let m = s[j] / n as f64;
            let v = ss[j] / n as f64 - m * m;
            assert!(m.abs() < 0.03, "{m}");
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn wide_lattice_has_one_dominant_point() {
        let cat = lattice_categorical(0.0, 1.0, 10.0, 0.0, &TruncationPolicy::default()).unwrap();
        assert!(cat.probability(0) >= 1.0 - 1e-6);
        let mut rng = RngStream::new(6, 0);
        assert!((0..10_000).all(|_| cat.sample(&mut rng) == 0));
    }

    #[test]
    fn symmetric_lattice_probabilities() {
        let cat = lattice_categorical(0.0, 1.0, 0.3, 0.0, &TruncationPolicy::default()).unwrap();
        for i in 1..20 {
            assert_eq!(cat.probability(i), cat.probability(-i));
        }
    }

    #[test]
    fn fine_lattice_matches_discretized_gaussian() {
        let h = 0.01;
        let cat = lattice_categorical(0.0, 1.0, h, 0.0, &TruncationPolicy::default()).unwrap();
        let mut rng = RngStream::new(7, 0);
        let n = 100_000;
        // bin indices into unit-width cells of the displacement
        let edges: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let mut counts = vec![0u64; edges.len() + 1];
        for _ in 0..n {
            let t = cat.sample(&mut rng) as f64 * h;
            counts[edges.iter().filter(|&&e| t >= e).count()] += 1;
        }
        let mut expected = vec![0.0; edges.len() + 1];
        let z: f64 = (-700..=700).map(|i| std_normal_pdf(i as f64 * h)).sum();
        for i in -700..=700 {
            let t = i as f64 * h;
            expected[edges.iter().filter(|&&e| t >= e).count()] += std_normal_pdf(t) / z * n as f64;
        }
        let chi2: f64 = counts.iter().zip(&expected).map(|(&c, &e)| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < chi_square_critical(counts.len() - 1, 0.001), "{chi2}");
    }

    #[test]
    fn tail_mass_is_reported_and_small() {
        let policy = TruncationPolicy::default();
        for &(m, v, h, off) in &[(0.0, 1.0, 0.1, 0.0), (3.7, 0.2, 0.05, 0.02), (-40.0, 9.0, 1.3, -0.4), (0.1, 1e-4, 1.0, 0.3)] {
            let cat = lattice_categorical(m, v, h, off, &policy).unwrap();
            assert!(cat.tail_mass <= policy.tail_mass_tol);
            // brute-force mass outside the window, relative to inside
            let lw = |i: i64| {
                let t = off + i as f64 * h - m;
                -0.5 * t * t / v
            };
            let inside: f64 = cat.log_weights.iter().map(|w| w.exp()).sum();
            let outside: f64 = (1..100_000)
                .map(|k| lw(cat.highest_index() + k).exp() + lw(cat.lowest_index - k).exp())
                .sum();
            assert!(outside / inside <= cat.tail_mass + 1e-300);
        }
    }

    #[test]
    fn window_cap_is_enforced() {
        let policy = TruncationPolicy { tail_mass_tol: 1e-6, hard_cap: 10 };
        match lattice_categorical(0.0, 1.0, 0.001, 0.0, &policy) {
            Err(Error::WindowTooLarge { required, cap: 10 }) => assert!(required > 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn adjusted_flat_region_always_shifts() {
        // a very wide Gaussian is flat on the scale of one shift
        let g = GaussianSpec::diagonal(&[1e12]).unwrap();
        let mut rng = RngStream::new(8, 0);
        let policy = TruncationPolicy { tail_mass_tol: 1e-6, hard_cap: 1 << 30 };
        for _ in 0..100 {
            let st = infinite_orbit_step_adjusted(&g, &[0.0], 1e5, &policy, &mut rng).unwrap();
            assert!(st.shift_accepted);
        }
    }

    #[test]
    fn infinite_orbit_lands_on_shifted_lattice() {
        let g = GaussianSpec::isotropic(1);
        let mut rng = RngStream::new(9, 0);
        let h = 0.37;
        for _ in 0..1000 {
            let st = infinite_orbit_step_uniform(&g, &[0.2], h, &TruncationPolicy::default(), &mut rng).unwrap();
            let t = st.shift + st.index as f64 * h;
            let moved = st.next_state[0] - 0.2;
            assert!((moved - t).abs() < 1e-12 || (moved + t).abs() < 1e-12);
            assert!((-0.5 * h..0.5 * h).contains(&st.shift));
        }
    }

    #[test]
    fn uniform_variant_is_nearly_stationary() {
        let g = GaussianSpec::isotropic(1);
        let mut rng = RngStream::new(10, 0);
        let policy = TruncationPolicy::default();
        let n = 200_000;
        let mut x = vec![0.0];
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            x = infinite_orbit_step_uniform(&g, &x, 0.1, &policy, &mut rng).unwrap().next_state;
            s += x[0];
            ss += x[0] * x[0];
        }
        let m = s / n as f64;
        assert!(m.abs() < 0.02);
        assert!((ss / n as f64 - m * m - 1.0).abs() < 0.05);
    }
}
