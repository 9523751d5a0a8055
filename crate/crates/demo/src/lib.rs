//! Browser demo: orbit explorer, 2D chain runs and acceptance-vs-spacing curves.
//!
//! Each exported function takes plain numbers and a target name and returns a
//! JSON string, so the page needs no bindings beyond `JSON.parse`.

use nalgebra::dmatrix;
use nurs::analysis::{
    acceptance_probability_estimate, rwm_acceptance_estimate, rwm_acceptance_lower_bound,
    shift_acceptance_lower_bound, SmoothnessSpec,
};
use nurs::kernel::{categorical_select, metropolis_shift, sample_direction};
use nurs::{
    build_orbit, make_funnel, run_kernel_chain, Funnel, GaussianSpec, Kernel, Model, NursParams, RngStream, Strategy,
    TargetDensity,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const TARGETS: [&str; 3] = ["correlated", "ill-conditioned", "funnel"];

#[allow(clippy::large_enum_variant)]
pub enum DemoTarget {
    Gaussian(GaussianSpec),
    Funnel(Funnel),
}

impl DemoTarget {
    pub fn parse(name: &str) -> Result<Self, String> {
        let g = |r: nurs::Result<GaussianSpec>| r.map(DemoTarget::Gaussian).map_err(|e| e.to_string());
        match name {
            "correlated" => g(GaussianSpec::new(dmatrix![1.0, 0.95; 0.95, 1.0])),
            "ill-conditioned" => g(GaussianSpec::diagonal(&[1.0, 0.01])),
            // coordinates (omega, x)
            "funnel" => make_funnel(1).map(DemoTarget::Funnel).map_err(|e| e.to_string()),
            other => Err(format!("unknown target `{other}`; expected one of {}", TARGETS.join(", "))),
        }
    }

    fn density(&self) -> &dyn TargetDensity {
        match self {
            DemoTarget::Gaussian(g) => g,
            DemoTarget::Funnel(f) => f,
        }
    }

    /// Global curvature bound, when the target has one.
    fn smoothness(&self) -> Option<SmoothnessSpec> {
        match self {
            DemoTarget::Gaussian(g) => {
                SmoothnessSpec::new(1.0 / g.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)).ok()
            }
            DemoTarget::Funnel(_) => None,
        }
    }
}

#[derive(Serialize)]
pub struct OrbitView {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub shift: f64,
    pub shift_accepted: bool,
    /// Lattice points in index order.
    pub points: Vec<Vec<f64>>,
    pub lowest_index: i64,
    /// Selection probabilities, aligned with `points`.
    pub probabilities: Vec<f64>,
    pub selected_index: i64,
    pub next_state: Vec<f64>,
    pub termination: String,
    pub doublings: u32,
}

fn params(h: f64, eps: f64, max_doublings: u32) -> Result<NursParams, String> {
    let p = NursParams::new(h, eps, max_doublings).map_err(|e| e.to_string())?;
    if max_doublings > 14 {
        return Err("the demo caps max doublings at 14".into());
    }
    Ok(p)
}

/// One batch NURS transition from `(x, y)` with every intermediate exposed.
/// Consumes randomness exactly as `nurs_step` does.
pub fn explore_orbit_inner(target: &str, x: f64, y: f64, h: f64, eps: f64, max_doublings: u32, seed: u64) -> Result<OrbitView, String> {
    let t = DemoTarget::parse(target)?;
    let p = params(h, eps, max_doublings)?;
    let target = t.density();
    let theta = [x, y];
    let mut rng = RngStream::new(seed, 0);
    let rho = sample_direction(2, &mut rng);
    let (shift, accepted) = metropolis_shift(target, &theta, &rho, h, &mut rng);
    let base: Vec<f64> = theta.iter().zip(&rho).map(|(t, r)| t + shift * r).collect();
    let (orbit, trace) = build_orbit(target, &base, &rho, &p.doubling_rule(), &mut || rng.bit());
    let index = categorical_select(&orbit.log_weights, orbit.lowest_index(), &mut rng);
    let log_z = orbit.log_normalizer();
    Ok(OrbitView {
        start: theta.to_vec(),
        direction: rho.clone(),
        shift,
        shift_accepted: accepted,
        points: (orbit.lowest_index()..=orbit.highest_index()).map(|i| orbit.point(i)).collect(),
        lowest_index: orbit.lowest_index(),
        probabilities: orbit.log_weights.iter().map(|w| (w - log_z).exp()).collect(),
        selected_index: index,
        next_state: orbit.point(index),
        termination: trace.termination.as_str().to_string(),
        doublings: trace.doublings,
    })
}

#[derive(Serialize)]
pub struct ChainView {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub shift_acceptance: f64,
    pub mean_orbit_size: f64,
}

/// A chain of `steps` transitions from `(x, y)`; `kernel` is `nurs` or `rwm`.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_inner(
    target: &str,
    kernel: &str,
    x: f64,
    y: f64,
    h: f64,
    eps: f64,
    max_doublings: u32,
    steps: usize,
    seed: u64,
) -> Result<ChainView, String> {
    let t = DemoTarget::parse(target)?;
    if steps == 0 || steps > 200_000 {
        return Err("steps must lie in 1..=200000".into());
    }
    let kernel = match kernel {
        "nurs" => Kernel::Nurs {
            params: params(h, eps, max_doublings)?,
            strategy: Strategy::Batch,
        },
        "rwm" if h > 0.0 && h.is_finite() => Kernel::Rwm { step: h },
        "rwm" => return Err("step size must be positive".into()),
        other => return Err(format!("unknown kernel `{other}`; expected nurs or rwm")),
    };
    let out = run_kernel_chain(Model::General(t.density()), &kernel, &[x, y], steps, seed, 0).map_err(|e| e.to_string())?;
    let sizes: u64 = out.records.iter().map(|r| r.orbit_size).sum();
    Ok(ChainView {
        xs: out.coordinate(0),
        ys: out.coordinate(1),
        shift_acceptance: out.shift_acceptance_rate(),
        mean_orbit_size: sizes as f64 / steps as f64,
    })
}

#[derive(Serialize)]
pub struct AcceptanceCurve {
    pub h: Vec<f64>,
    pub shift: Vec<f64>,
    pub rwm: Vec<f64>,
    /// Empty when the target has no global curvature bound.
    pub shift_bound: Vec<f64>,
    pub rwm_bound: Vec<f64>,
}

/// Acceptance of the lattice shift and of random-walk Metropolis, averaged over
/// `states` starting points drawn from the target, at log-spaced `h`.
pub fn acceptance_curve_inner(
    target: &str,
    h_min: f64,
    h_max: f64,
    points: usize,
    states: usize,
    draws: usize,
    seed: u64,
) -> Result<AcceptanceCurve, String> {
    let t = DemoTarget::parse(target)?;
    if !(h_min > 0.0 && h_max >= h_min && h_max.is_finite()) || !(2..=200).contains(&points) {
        return Err("need 0 < h_min <= h_max and 2..=200 points".into());
    }
    if states == 0 || draws == 0 {
        return Err("states and draws must be positive".into());
    }
    let mut rng = RngStream::new(seed, 0);
    let starts: Vec<Vec<f64>> = (0..states)
        .map(|_| match &t {
            DemoTarget::Gaussian(g) => g.sample(&mut rng),
            DemoTarget::Funnel(f) => f.sample(&mut rng),
        })
        .collect();
    let smooth = t.smoothness();
    let mut curve = AcceptanceCurve {
        h: Vec::new(),
        shift: Vec::new(),
        rwm: Vec::new(),
        shift_bound: Vec::new(),
        rwm_bound: Vec::new(),
    };
    let ratio = (h_max / h_min).ln();
    for k in 0..points {
        let h = h_min * (ratio * k as f64 / (points - 1) as f64).exp();
        let (mut a, mut r) = (0.0, 0.0);
        for theta in &starts {
            let rho = sample_direction(2, &mut rng);
            a += acceptance_probability_estimate(t.density(), theta, &rho, h, draws, &mut rng).map_err(|e| e.to_string())?.mean;
            r += rwm_acceptance_estimate(t.density(), theta, h, draws, &mut rng).map_err(|e| e.to_string())?.mean;
        }
        curve.h.push(h);
        curve.shift.push(a / states as f64);
        curve.rwm.push(r / states as f64);
        if let Some(s) = &smooth {
            curve.shift_bound.push(shift_acceptance_lower_bound(h, s));
            curve.rwm_bound.push(rwm_acceptance_lower_bound(h, s));
        }
    }
    Ok(curve)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn explore_orbit(target: &str, x: f64, y: f64, h: f64, eps: f64, max_doublings: u32, seed: u64) -> Result<String, JsError> {
    to_js(explore_orbit_inner(target, x, y, h, eps, max_doublings, seed))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    target: &str,
    kernel: &str,
    x: f64,
    y: f64,
    h: f64,
    eps: f64,
    max_doublings: u32,
    steps: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(run_chain_inner(target, kernel, x, y, h, eps, max_doublings, steps, seed))
}

#[wasm_bindgen]
pub fn acceptance_curve(
    target: &str,
    h_min: f64,
    h_max: f64,
    points: usize,
    states: usize,
    draws: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(acceptance_curve_inner(target, h_min, h_max, points, states, draws, seed))
}
