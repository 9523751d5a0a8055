//! Synchronous couplings of the Gaussian Hit-and-Run and uniform-shift
//! infinite-orbit kernels, and their contraction rates.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::kernel::sample_direction;
use crate::math::{axpy_into, centered_residue, dot, norm_sq, positive_residue};
use crate::reference::{lattice_categorical, TruncationPolicy};
use crate::rng::RngStream;
use crate::target::GaussianSpec;

/// Shared randomness and derived quantities of one coupled transition.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPair {
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub rho: Vec<f64>,
    pub shift: f64,
    pub shift_tilde: f64,
    /// Common lattice offset in `[0, h)`.
    pub sigma: f64,
    /// Shared categorical draw on `hZ`.
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledStep {
    pub next: Vec<f64>,
    pub next_tilde: Vec<f64>,
    pub pair: CouplingPair,
    /// `|C^{-1/2}(θ'-θ̃') - Π_w C^{-1/2}(θ-θ̃)|`, relative to `|C^{-1/2}(θ-θ̃)|` when that is nonzero.
    pub residual: f64,
    /// `|θ'-θ̃'|_{C^{-1/2}} / |θ-θ̃|_{C^{-1/2}}`, NaN for identical inputs.
    pub contraction: f64,
}

fn projection_residual(spec: &GaussianSpec, theta: &[f64], theta_tilde: &[f64], rho: &[f64], next: &[f64], next_tilde: &[f64]) -> (f64, f64) {
    let d = theta.len();
    let diff: Vec<f64> = theta.iter().zip(theta_tilde).map(|(a, b)| a - b).collect();
    let diff_next: Vec<f64> = next.iter().zip(next_tilde).map(|(a, b)| a - b).collect();
    let (mut z, mut z_next, mut w) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    spec.apply_inv_sqrt(&diff, &mut z);
    spec.apply_inv_sqrt(&diff_next, &mut z_next);
    spec.apply_inv_sqrt(rho, &mut w);
    let c = dot(&z, &w) / norm_sq(&w);
    let gap: f64 = z_next
        .iter()
        .zip(&z)
        .zip(&w)
        .map(|((a, b), wi)| (a - (b - c * wi)).powi(2))
        .sum::<f64>()
        .sqrt();
    let before = norm_sq(&z).sqrt();
    let after = norm_sq(&z_next).sqrt();
    let residual = if before > 0.0 { gap / before } else { gap };
    let contraction = if before > 0.0 { after / before } else { f64::NAN };
    (residual, contraction)
}

/// One coupled transition of uniform-shift infinite-orbit NURS from `θ` and `θ̃`.
///
/// Both chains use the same direction. The second shift is chosen so that both
/// lattices have the same offset `σ` from the displacement means, after which
/// the categorical draw `W` is shared.
pub fn coupled_infinite_orbit_pair(
    spec: &GaussianSpec,
    theta: &[f64],
    theta_tilde: &[f64],
    h: f64,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<CoupledStep> {
    let rho = sample_direction(theta.len(), rng);
    let s = rng.uniform_in(-0.5 * h, 0.5 * h);
    coupled_lattice_move(spec, theta, theta_tilde, h, rho, s, policy, rng)
}

#[allow(clippy::too_many_arguments)]
fn coupled_lattice_move(
    spec: &GaussianSpec,
    theta: &[f64],
    theta_tilde: &[f64],
    h: f64,
    rho: Vec<f64>,
    s: f64,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<CoupledStep> {
    let (m, var) = spec.displacement_params(theta, &rho);
    let (m_tilde, _) = spec.displacement_params(theta_tilde, &rho);
    // lattice through θ + sρ sits at offset σ below the mean m - s
    let sigma = positive_residue(m - s, h);
    let s_tilde = centered_residue(s + (m_tilde - m), h);
    let cat = lattice_categorical(sigma, var, h, 0.0, policy)?;
    let w = cat.sample(rng) as f64 * h;
    let t = h * ((m - s - sigma) / h).round() + w;
    let t_tilde = h * ((m_tilde - s_tilde - sigma) / h).round() + w;
    let mut next = vec![0.0; theta.len()];
    let mut next_tilde = vec![0.0; theta.len()];
    axpy_into(theta, s + t, &rho, &mut next);
    axpy_into(theta_tilde, s_tilde + t_tilde, &rho, &mut next_tilde);
    let (residual, contraction) = projection_residual(spec, theta, theta_tilde, &rho, &next, &next_tilde);
    Ok(CoupledStep {
        next,
        next_tilde,
        pair: CouplingPair {
            theta: theta.to_vec(),
            theta_tilde: theta_tilde.to_vec(),
            rho,
            shift: s,
            shift_tilde: s_tilde,
            sigma,
            w,
        },
        residual,
        contraction,
    })
}

/// Synchronous coupling of exact Hit-and-Run: shared direction and shared
/// standard normal for the displacement.
pub fn coupled_hit_and_run_pair(spec: &GaussianSpec, theta: &[f64], theta_tilde: &[f64], rng: &mut RngStream) -> CoupledStep {
    let rho = sample_direction(theta.len(), rng);
    let xi = rng.standard_normal();
    let (m, var) = spec.displacement_params(theta, &rho);
    let (m_tilde, _) = spec.displacement_params(theta_tilde, &rho);
    let mut next = vec![0.0; theta.len()];
    let mut next_tilde = vec![0.0; theta.len()];
    axpy_into(theta, m + var.sqrt() * xi, &rho, &mut next);
    axpy_into(theta_tilde, m_tilde + var.sqrt() * xi, &rho, &mut next_tilde);
    let (residual, contraction) = projection_residual(spec, theta, theta_tilde, &rho, &next, &next_tilde);
    CoupledStep {
        next,
        next_tilde,
        pair: CouplingPair {
            theta: theta.to_vec(),
            theta_tilde: theta_tilde.to_vec(),
            rho,
            shift: 0.0,
            shift_tilde: 0.0,
            sigma: 0.0,
            w: xi,
        },
        residual,
        contraction,
    }
}

/// Contraction rate for `C = I` with uniform directions: `1/(2d)`.
pub fn contraction_rate_isotropic(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    0.5 / d as f64
}

/// Monte Carlo estimate of `1/2 inf_|ζ|=1 E(ζ·ŵ)^2` with `ŵ = C^{-1/2}ρ / |C^{-1/2}ρ|`.
///
/// The infimum of the quadratic form is the smallest eigenvalue of `E[ŵŵᵀ]`;
/// for diagonal `C` that matrix is diagonal and the infimum is attained on an axis.
pub fn contraction_rate_estimate(spec: &GaussianSpec, n_draws: usize, rng: &mut RngStream) -> f64 {
    let d = spec.dim();
    let mut m = DMatrix::<f64>::zeros(d, d);
    let mut w = vec![0.0; d];
    for _ in 0..n_draws {
        let rho = sample_direction(d, rng);
        spec.apply_inv_sqrt(&rho, &mut w);
        let n2 = norm_sq(&w);
        for i in 0..d {
            for j in 0..=i {
                m[(i, j)] += w[i] * w[j] / n2;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    m /= n_draws as f64;
    let smallest = SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    0.5 * smallest
}
