//! Running chains of any kernel with per-step diagnostics.

use crate::error::{Error, Result};
use crate::kernel::{transition, NursParams, Strategy, TransitionRecord};
use crate::math::dist_sq;
use crate::reference::{
    hit_and_run_step_gaussian, infinite_orbit_step_adjusted, infinite_orbit_step_uniform, rwm_step_with, TruncationPolicy,
};
use crate::rng::RngStream;
use crate::target::{GaussianSpec, TargetDensity};

/// A transition kernel with its settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Nurs { params: NursParams, strategy: Strategy },
    Rwm { step: f64 },
    HitAndRunGaussian,
    InfiniteOrbitUniform { spacing: f64, policy: TruncationPolicy },
    InfiniteOrbitAdjusted { spacing: f64, policy: TruncationPolicy },
}

impl Kernel {
    pub fn nurs(params: NursParams) -> Self {
        Kernel::Nurs {
            params,
            strategy: Strategy::default(),
        }
    }

    pub fn needs_gaussian(&self) -> bool {
        matches!(
            self,
            Kernel::HitAndRunGaussian | Kernel::InfiniteOrbitUniform { .. } | Kernel::InfiniteOrbitAdjusted { .. }
        )
    }
}

/// A target together with its Gaussian form, when it has one.
#[derive(Clone, Copy)]
pub enum Model<'a> {
    General(&'a dyn TargetDensity),
    Gaussian(&'a GaussianSpec),
}

impl<'a> Model<'a> {
    pub fn density(&self) -> &'a dyn TargetDensity {
        match *self {
            Model::General(t) => t,
            Model::Gaussian(g) => g,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub dim: usize,
    pub initial_state: Vec<f64>,
    pub records: Vec<TransitionRecord>,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// State after step `i` (0-based).
    pub fn state(&self, i: usize) -> &[f64] {
        &self.records[i].next_state
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.records.iter().map(|r| r.next_state.as_slice())
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.next_state[j]).collect()
    }

    pub fn shift_acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().filter(|r| r.shift_accepted).count() as f64 / self.records.len() as f64
    }
}

/// One step of `kernel`, carrying `log µ(θ)` between steps.
pub fn step(
    model: Model<'_>,
    kernel: &Kernel,
    theta: &[f64],
    theta_log_density: f64,
    rng: &mut RngStream,
) -> Result<(TransitionRecord, f64)> {
    let target = model.density();
    let gaussian = || match model {
        Model::Gaussian(g) => Ok(g),
        Model::General(_) => Err(Error::Unsupported(
            "this kernel is only available for Gaussian targets".into(),
        )),
    };
    // kernels without an orbit select from a single point
    let plain = |next_state: Vec<f64>, accepted: bool, shift: f64, index: i64, log_density: f64| {
        let squared_jump = dist_sq(&next_state, theta);
        TransitionRecord {
            next_state,
            shift,
            shift_accepted: accepted,
            orbit_size: 0,
            selected_index: index,
            log_normalizer: log_density,
            termination: None,
            doublings: 0,
            squared_jump,
        }
    };
    Ok(match *kernel {
        Kernel::Nurs { params, strategy } => transition(target, theta, theta_log_density, &params, strategy, rng),
        Kernel::Rwm { step } => {
            let (next, accepted, lp) = rwm_step_with(target, theta, theta_log_density, step, rng);
            (plain(next, accepted, 0.0, 0, lp), lp)
        }
        Kernel::HitAndRunGaussian => {
            let g = gaussian()?;
            let next = hit_and_run_step_gaussian(g, theta, rng);
            let lp = g.log_density(&next);
            (plain(next, true, 0.0, 0, lp), lp)
        }
        Kernel::InfiniteOrbitUniform { spacing, policy } | Kernel::InfiniteOrbitAdjusted { spacing, policy } => {
            let g = gaussian()?;
            let st = if matches!(kernel, Kernel::InfiniteOrbitUniform { .. }) {
                infinite_orbit_step_uniform(g, theta, spacing, &policy, rng)?
            } else {
                infinite_orbit_step_adjusted(g, theta, spacing, &policy, rng)?
            };
            let lp = g.log_density(&st.next_state);
            (plain(st.next_state, st.shift_accepted, st.shift, st.index, lp), lp)
        }
    })
}

/// Runs `n_steps` transitions from `theta0` on stream `(seed, stream)`.
pub fn run_kernel_chain(
    model: Model<'_>,
    kernel: &Kernel,
    theta0: &[f64],
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<ChainOutput> {
    let target = model.density();
    if theta0.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: theta0.len(),
        });
    }
    if let Kernel::Nurs { params, .. } = kernel {
        params.validate()?;
    }
    let mut rng = RngStream::new(seed, stream);
    let mut theta = theta0.to_vec();
    let mut lp = target.log_density(&theta);
    let mut records = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let (rec, next_lp) = step(model, kernel, &theta, lp, &mut rng)?;
        theta.clone_from(&rec.next_state);
        lp = next_lp;
        records.push(rec);
    }
    Ok(ChainOutput {
        dim: theta0.len(),
        initial_state: theta0.to_vec(),
        records,
    })
}

/// A NURS chain with the default selection strategy, on stream 0.
pub fn run_chain<T: TargetDensity>(
    target: &T,
    theta0: &[f64],
    params: &NursParams,
    n_steps: usize,
    seed: u64,
) -> Result<ChainOutput> {
    run_kernel_chain(Model::General(target), &Kernel::nurs(*params), theta0, n_steps, seed, 0)
}

/// Independent chains on streams `0..n_chains`, in parallel when enabled.
/// Output order and contents do not depend on the number of worker threads.
pub fn run_chains(
    model: Model<'_>,
    kernel: &Kernel,
    theta0: &[f64],
    n_steps: usize,
    seed: u64,
    n_chains: usize,
) -> Result<Vec<ChainOutput>> {
    let one = |c: usize| run_kernel_chain(model, kernel, theta0, n_steps, seed, c as u64);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chains).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chains).map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::make_funnel;

    #[test]
    fn chain_is_reproducible() {
        let g = GaussianSpec::isotropic(3);
        let p = NursParams::new(0.4, 0.05, 6).unwrap();
        let a = run_chain(&g, &[1.0, 0.0, -1.0], &p, 300, 42).unwrap();
        let b = run_chain(&g, &[1.0, 0.0, -1.0], &p, 300, 42).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&g, &[1.0, 0.0, -1.0], &p, 300, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn squared_jumps_match_states() {
        let f = make_funnel(3).unwrap();
        let p = NursParams::new(0.1, 0.01, 5).unwrap();
        let out = run_chain(&f, &[0.0; 4], &p, 200, 1).unwrap();
        let mut prev = out.initial_state.clone();
        for r in &out.records {
            assert_eq!(r.squared_jump, dist_sq(&r.next_state, &prev));
            prev.clone_from(&r.next_state);
        }
    }

    #[test]
    fn gaussian_only_kernels_reject_general_targets() {
        let f = make_funnel(2).unwrap();
        let r = run_kernel_chain(Model::General(&f), &Kernel::HitAndRunGaussian, &[0.0; 3], 3, 1, 0);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn dimension_is_checked() {
        let g = GaussianSpec::isotropic(2);
        let r = run_kernel_chain(Model::Gaussian(&g), &Kernel::Rwm { step: 1.0 }, &[0.0], 3, 1, 0);
        assert_eq!(r.unwrap_err(), Error::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn parallel_chains_match_serial_streams() {
        let g = GaussianSpec::isotropic(2);
        let k = Kernel::Rwm { step: 1.0 };
        let all = run_chains(Model::Gaussian(&g), &k, &[0.0, 0.0], 100, 7, 4).unwrap();
        for (c, out) in all.iter().enumerate() {
            let single = run_kernel_chain(Model::Gaussian(&g), &k, &[0.0, 0.0], 100, 7, c as u64).unwrap();
            assert_eq!(out, &single);
        }
        assert_ne!(all[0], all[1]);
    }
}
