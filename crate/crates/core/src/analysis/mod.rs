//! Numerical checks of the sampler's theory and chain diagnostics.

pub mod acceptance;
pub mod coupling;
pub mod diagnostics;
pub mod enumerate;
pub mod stats;
pub mod tv;

pub use acceptance::{
    acceptance_probability_estimate, rwm_acceptance_estimate, rwm_acceptance_lower_bound,
    shift_acceptance_lower_bound, Estimate, SmoothnessSpec,
};
pub use coupling::{
    contraction_rate_estimate, contraction_rate_isotropic, coupled_hit_and_run_pair, coupled_infinite_orbit_pair,
    CoupledStep, CouplingPair,
};
pub use diagnostics::{chain_diagnostics, BinningSpec, ChainSummary};
pub use enumerate::{orbit_distribution_enumerate, orbit_symmetry_check, OrbitDistribution, OrbitSymmetry, SymmetryReport};
pub use tv::{
    gaussian_log_tv_shift_kernel, pwu_density, tv_numeric_1d, tv_nurs_vs_har_1d, tv_shift_kernel_lattice_1d, GridSpec,
    Pwu, TvBound, TvEstimate,
};
