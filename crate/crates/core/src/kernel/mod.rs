//! The NURS transition: random direction, Metropolis-adjusted lattice shift,
//! orbit doubling, and categorical state selection.

mod progressive;

pub use progressive::{progressive_select, ProgressiveOutcome, SelectionSource};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{axpy_into, dist_sq, norm_sq};
use crate::orbit::{build_orbit_from, lattice_point, DoublingRule, Termination};
use crate::rng::RngStream;
use crate::target::TargetDensity;

/// Doubling budgets above this are rejected; 2^48 lattice points is far past any memory.
pub const MAX_DOUBLINGS_LIMIT: u32 = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionLaw {
    #[default]
    UniformSphere,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NursParams {
    /// Lattice spacing `h > 0`.
    pub spacing: f64,
    /// Density threshold `eps >= 0`; zero disables the No-Underrun rule.
    pub threshold: f64,
    pub max_doublings: u32,
    pub direction: DirectionLaw,
    /// Check single-point sub-orbits when testing an extension. Turning this off
    /// reproduces the recursive reference listing, which returns early on length < 2.
    pub include_singletons: bool,
}

impl NursParams {
    pub fn new(spacing: f64, threshold: f64, max_doublings: u32) -> Result<Self> {
        let p = Self {
            spacing,
            threshold,
            max_doublings,
            direction: DirectionLaw::UniformSphere,
            include_singletons: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid("h", format!("lattice spacing must be finite and > 0, got {}", self.spacing)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(invalid("eps", format!("threshold must be finite and >= 0, got {}", self.threshold)));
        }
        if self.max_doublings > MAX_DOUBLINGS_LIMIT {
            return Err(invalid(
                "max-doublings",
                format!("at most {MAX_DOUBLINGS_LIMIT}, got {}", self.max_doublings),
            ));
        }
        Ok(())
    }

    pub fn doubling_rule(&self) -> DoublingRule {
        DoublingRule {
            spacing: self.spacing,
            threshold: self.threshold,
            max_doublings: self.max_doublings,
            include_singletons: self.include_singletons,
        }
    }
}

/// How the next state is drawn from the orbit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Materialize all orbit log-weights, then one inverse-CDF draw.
    Batch,
    /// Keep a running log-sum and a candidate index; O(M + d) memory.
    Progressive,
    /// Batch when the largest possible orbit fits in `budget` points.
    Auto { budget: u64 },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Auto { budget: 1 << 20 }
    }
}

impl Strategy {
    fn resolve(self, max_doublings: u32) -> Strategy {
        match self {
            Strategy::Auto { budget } if (1u64 << max_doublings) <= budget => Strategy::Batch,
            Strategy::Auto { .. } => Strategy::Progressive,
            s => s,
        }
    }
}

/// Diagnostics of one transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub next_state: Vec<f64>,
    /// Realized shift `A * s'`, in `[-h/2, h/2)`.
    pub shift: f64,
    pub shift_accepted: bool,
    /// Number of lattice points the state was selected from; 0 for kernels without an orbit,
    /// whose `log_normalizer` is then the log-density of the new state.
    pub orbit_size: u64,
    /// Selected lattice index relative to the post-shift base.
    pub selected_index: i64,
    pub log_normalizer: f64,
    pub termination: Option<Termination>,
    pub doublings: u32,
    pub squared_jump: f64,
}

/// Uniform direction on the unit sphere `S^{d-1}`.
pub fn sample_direction(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    loop {
        rng.fill_standard_normal(&mut v);
        let n = norm_sq(&v).sqrt();
        if n > 0.0 && n.is_finite() {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ShiftOutcome {
    pub shift: f64,
    pub accepted: bool,
    /// Log-density at the post-shift base.
    pub base_log_density: f64,
}

/// Draws `s' ~ Unif[-h/2, h/2)` and accepts it with probability `1 ∧ µ(θ+s'ρ)/µ(θ)`.
/// Returns `(A s', A)`.
pub fn metropolis_shift<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    rho: &[f64],
    h: f64,
    rng: &mut RngStream,
) -> (f64, bool) {
    let out = shift_with(target, theta, target.log_density(theta), rho, h, rng);
    (out.shift, out.accepted)
}

pub(crate) fn shift_with<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    theta_log_density: f64,
    rho: &[f64],
    h: f64,
    rng: &mut RngStream,
) -> ShiftOutcome {
    let proposed = rng.uniform_in(-0.5 * h, 0.5 * h);
    let u = rng.uniform();
    let mut p = vec![0.0; theta.len()];
    axpy_into(theta, proposed, rho, &mut p);
    let lp = target.log_density(&p);
    let accept = u < (lp - theta_log_density).min(0.0).exp();
    if accept {
        ShiftOutcome {
            shift: proposed,
            accepted: true,
            base_log_density: lp,
        }
    } else {
        ShiftOutcome {
            shift: 0.0,
            accepted: false,
            base_log_density: theta_log_density,
        }
    }
}

/// Inverse-CDF draw from `categorical(exp(w))` over indices `lowest_index..`.
///
/// Scans in index order with one uniform; a uniform landing exactly on a CDF
/// boundary selects the higher index.
pub fn categorical_select(log_weights: &[f64], lowest_index: i64, rng: &mut RngStream) -> i64 {
    let u = rng.uniform();
    categorical_from_uniform(log_weights, u) as i64 + lowest_index
}

pub(crate) fn categorical_from_uniform(log_weights: &[f64], u: f64) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let threshold = u * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last_positive = k;
        }
        cum += p;
        if threshold < cum {
            return k;
        }
    }
    last_positive
}

/// One NURS transition with batch selection over the final orbit.
pub fn nurs_step<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    params: &NursParams,
    rng: &mut RngStream,
) -> TransitionRecord {
    transition(target, theta, target.log_density(theta), params, Strategy::Batch, rng).0
}

/// One NURS transition with progressive (low-memory) selection.
pub fn nurs_step_progressive<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    params: &NursParams,
    rng: &mut RngStream,
) -> TransitionRecord {
    transition(target, theta, target.log_density(theta), params, Strategy::Progressive, rng).0
}

/// A full transition given `log µ(θ)`; also returns `log µ(θ')`.
pub(crate) fn transition<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    theta_log_density: f64,
    params: &NursParams,
    strategy: Strategy,
    rng: &mut RngStream,
) -> (TransitionRecord, f64) {
    let h = params.spacing;
    let rho = sample_direction(theta.len(), rng);
    let shift = shift_with(target, theta, theta_log_density, &rho, h, rng);
    let mut base = vec![0.0; theta.len()];
    axpy_into(theta, shift.shift, &rho, &mut base);
    let rule = params.doubling_rule();

    let (index, size, log_normalizer, selected_log_density, termination, doublings) =
        match strategy.resolve(params.max_doublings) {
            Strategy::Progressive => {
                let out = progressive_select(target, &base, Some(shift.base_log_density), &rho, &rule, rng);
                (
                    out.index,
                    out.size(),
                    out.log_normalizer,
                    out.selected_log_weight,
                    out.termination,
                    out.doublings,
                )
            }
            _ => {
                let (orbit, trace) =
                    build_orbit_from(target, &base, Some(shift.base_log_density), &rho, &rule, &mut || rng.bit());
                let i = categorical_select(&orbit.log_weights, orbit.lowest_index(), rng);
                (
                    i,
                    orbit.size() as u64,
                    orbit.log_normalizer(),
                    orbit.log_weight(i),
                    trace.termination,
                    trace.doublings,
                )
            }
        };

    let next_state = lattice_point(&base, &rho, h, index);
    let squared_jump = dist_sq(&next_state, theta);
    (
        TransitionRecord {
            next_state,
            shift: shift.shift,
            shift_accepted: shift.accepted,
            orbit_size: size,
            selected_index: index,
            log_normalizer,
            termination: Some(termination),
            doublings,
            squared_jump,
        },
        selected_log_density,
    )
}
