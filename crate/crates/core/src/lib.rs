//! The No-Underrun Sampler (NURS) and its reference kernels.
//!
//! NURS is a gradient-free MCMC method. Each transition picks a random direction,
//! shifts a lattice along it with a Metropolis test, grows an orbit of lattice
//! points by doubling until the No-Underrun rule fires, and draws the next state
//! from the orbit in proportion to the target density.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod kernel;
pub mod math;
pub mod orbit;
pub mod reference;
pub mod rng;
pub mod target;

pub use chain::{run_chain, run_chains, run_kernel_chain, ChainOutput, Kernel, Model};
pub use error::{Error, Result};
pub use kernel::{nurs_step, nurs_step_progressive, NursParams, Strategy, TransitionRecord};
pub use orbit::{build_orbit, sub_stop, stop_condition, DoublingRule, Orbit, Termination};
pub use reference::TruncationPolicy;
pub use rng::RngStream;
pub use target::{make_funnel, make_gaussian, Funnel, GaussianSpec, TargetDensity};
