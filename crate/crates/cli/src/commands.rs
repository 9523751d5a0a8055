//! Subcommand implementations. Each returns whether its verdict passed.

use std::f64::consts::PI;

use nurs::analysis::stats::{ks_distance, normal_cdf};
use nurs::analysis::{
    acceptance_probability_estimate, chain_diagnostics, contraction_rate_estimate, contraction_rate_isotropic,
    coupled_infinite_orbit_pair, gaussian_log_tv_shift_kernel, orbit_symmetry_check, rwm_acceptance_estimate,
    rwm_acceptance_lower_bound, shift_acceptance_lower_bound, tv_nurs_vs_har_1d, BinningSpec, CoupledStep, GridSpec,
    SmoothnessSpec,
};
use nurs::kernel::sample_direction;
use nurs::{run_chains, ChainOutput, RngStream, TransitionRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Opts;
use crate::error::{config, Result};
use crate::output::{num, OutDir, SCHEMA_VERSION};
use crate::targets::{parse_target, TargetSpec};

/// Work items per RNG stream in Monte Carlo sweeps; fixed so results do not
/// depend on the worker count.
const CHUNK: usize = 4096;

#[derive(Serialize)]
struct TransitionLine<'a> {
    schema_version: u32,
    chain: usize,
    step: usize,
    #[serde(flatten)]
    record: &'a TransitionRecord,
}

fn target(opts: &Opts) -> Result<TargetSpec> {
    parse_target(opts.target.as_deref().expect("defaulted"))
}

fn out_dir(opts: &Opts) -> Result<OutDir> {
    let dir = OutDir::create(opts.out())?;
    let mut sink = dir.file("config.txt")?;
    sink.line(&opts.to_config_text())?;
    sink.finish()?;
    Ok(dir)
}

/// Keeps the last `steps` transitions, re-anchoring the initial state.
fn drop_burn_in(mut chain: ChainOutput, burn_in: usize) -> ChainOutput {
    if burn_in > 0 {
        chain.initial_state = chain.records[burn_in - 1].next_state.clone();
        chain.records.drain(..burn_in);
    }
    chain
}

fn run(opts: &Opts, spec: &TargetSpec) -> Result<Vec<ChainOutput>> {
    let kernel = opts.kernel()?;
    let burn_in = opts.burn_in.unwrap_or(0);
    let theta0 = opts.theta0(spec.dim())?;
    let chains = run_chains(
        spec.model(),
        &kernel,
        &theta0,
        burn_in + opts.steps(),
        opts.seed(),
        opts.chains.unwrap_or(1),
    )?;
    Ok(chains.into_iter().map(|c| drop_burn_in(c, burn_in)).collect())
}

fn write_transitions(dir: &OutDir, chains: &[ChainOutput], thin: usize) -> Result<()> {
    let mut sink = dir.file("transitions.jsonl")?;
    for (c, chain) in chains.iter().enumerate() {
        for (i, record) in chain.records.iter().enumerate().step_by(thin) {
            sink.json(&TransitionLine {
                schema_version: SCHEMA_VERSION,
                chain: c,
                step: i,
                record,
            })?;
        }
    }
    sink.finish()
}

pub fn sample(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let chains = run(opts, &spec)?;
    let dir = out_dir(opts)?;
    let dim = spec.dim();

    let coords: Vec<String> = (0..dim).map(|j| format!("coord_{j}")).collect();
    let mut header = vec!["chain", "step"];
    header.extend(coords.iter().map(String::as_str));
    let mut states = dir.csv("states.csv", &header)?;
    for (c, chain) in chains.iter().enumerate() {
        for (i, r) in chain.records.iter().enumerate() {
            let mut row = vec![c.to_string(), i.to_string()];
            row.extend(r.next_state.iter().map(|&x| num(x)));
            states.row(&row)?;
        }
    }
    states.finish()?;
    write_transitions(&dir, &chains, 1)?;

    let mut summary = dir.csv(
        "summary.csv",
        &["chain", "coord", "mean", "variance", "ess", "shift_acceptance", "mean_squared_jump"],
    )?;
    let mut acc = 0.0;
    for (c, chain) in chains.iter().enumerate() {
        let s = chain_diagnostics(chain, &BinningSpec::default());
        let msj = s.squared_jumps.iter().sum::<f64>() / s.squared_jumps.len() as f64;
        acc += s.shift_acceptance_rate;
        for j in 0..dim {
            summary.row(&[
                c.to_string(),
                j.to_string(),
                num(s.means[j]),
                num(s.variances[j]),
                num(s.ess[j]),
                num(s.shift_acceptance_rate),
                num(msj),
            ])?;
        }
    }
    summary.finish()?;
    println!(
        "sampled {} chain(s) x {} steps; mean shift acceptance {:.4}; outputs in {}",
        chains.len(),
        opts.steps(),
        acc / chains.len() as f64,
        opts.out().display()
    );
    Ok(true)
}

pub fn funnel(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let TargetSpec::Funnel(_) = &spec else {
        return Err(config("funnel needs a funnel:d=... target"));
    };
    let chains = run(opts, &spec)?;
    let dir = out_dir(opts)?;
    let thin = opts.thin.unwrap_or(10);
    let full = 1u64 << opts.max_doublings();
    let binning = BinningSpec::funnel_axis();

    let mut jumps = dir.csv(
        "funnel_jumps.csv",
        &["chain", "step", "omega_before", "squared_jump", "shift_accepted", "orbit_size"],
    )?;
    let mut scatter = dir.csv("funnel_scatter.csv", &["chain", "step", "omega", "x_1"])?;
    let mut omega = Vec::new();
    let mut all_full = true;
    for (c, chain) in chains.iter().enumerate() {
        let mut prev = chain.initial_state[0];
        for (i, r) in chain.records.iter().enumerate() {
            all_full &= r.orbit_size == full;
            jumps.row(&[
                c.to_string(),
                i.to_string(),
                num(prev),
                num(r.squared_jump),
                (r.shift_accepted as u8).to_string(),
                r.orbit_size.to_string(),
            ])?;
            if i % thin == 0 {
                scatter.row(&[c.to_string(), i.to_string(), num(r.next_state[0]), num(r.next_state[1])])?;
                omega.push(r.next_state[0]);
            }
            prev = r.next_state[0];
        }
    }
    jumps.finish()?;
    scatter.finish()?;

    // pool the per-chain bins
    let edges = &binning.coordinate_edges;
    let mut pooled = vec![(0u64, 0.0f64, 0.0f64); edges.len() - 1];
    for chain in &chains {
        for (k, b) in chain_diagnostics(chain, &binning).binned.iter().enumerate() {
            if b.count > 0 {
                pooled[k].0 += b.count;
                pooled[k].1 += b.mean_squared_jump * b.count as f64;
                pooled[k].2 += b.acceptance_rate * b.count as f64;
            }
        }
    }
    let mut acceptance = dir.csv(
        "funnel_acceptance.csv",
        &["omega_lo", "omega_hi", "count", "mean_squared_jump", "shift_acceptance"],
    )?;
    for (k, &(count, msj, acc)) in pooled.iter().enumerate() {
        let per = |x: f64| if count > 0 { num(x / count as f64) } else { "nan".into() };
        acceptance.row(&[num(edges[k]), num(edges[k + 1]), count.to_string(), per(msj), per(acc)])?;
    }
    acceptance.finish()?;

    let mut hist = dir.csv("funnel_histogram.csv", &["omega_lo", "omega_hi", "count", "density", "reference_density"])?;
    let bins = binning.histogram_bins;
    let width = 18.0 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &w in &omega {
        let k = ((w + 9.0) / width).floor();
        if (0.0..bins as f64).contains(&k) {
            counts[k as usize] += 1;
        }
    }
    for (k, &count) in counts.iter().enumerate() {
        let lo = -9.0 + k as f64 * width;
        let hi = lo + width;
        let reference = (normal_cdf(hi / 3.0) - normal_cdf(lo / 3.0)) / width;
        hist.row(&[num(lo), num(hi), count.to_string(), num(count as f64 / (omega.len() as f64 * width)), num(reference)])?;
    }
    hist.finish()?;
    write_transitions(&dir, &chains, thin)?;

    let ks = ks_distance(&omega, |x| normal_cdf(x / 3.0));
    let rate = |keep: &dyn Fn(f64) -> bool| {
        let (c, a) = pooled
            .iter()
            .zip(edges.windows(2))
            .filter(|(_, w)| keep(0.5 * (w[0] + w[1])))
            .fold((0u64, 0.0), |(c, a), (p, _)| (c + p.0, a + p.2));
        (a / c.max(1) as f64, c)
    };
    let (mouth, n_mouth) = rate(&|w| w > 0.0);
    let (neck, n_neck) = rate(&|w| w < -6.0);
    let pass = all_full && ks <= 0.05 && n_neck > 0 && mouth > neck;
    dir.verdict(
        pass,
        &format!(
            "funnel: all orbits {full} points: {all_full}; KS(omega, N(0,9)) {ks:.4} over {} draws; \
             shift acceptance omega>0 {mouth:.3} ({n_mouth} steps) vs omega<-6 {neck:.3} ({n_neck} steps)",
            omega.len()
        ),
    )
}

/// Runs `n` independent draws of `f` in fixed-size chunks, each on its own stream.
fn monte_carlo<T: Send>(n: usize, seed: u64, f: impl Fn(&mut RngStream) -> Result<T> + Sync) -> Result<Vec<T>> {
    let chunks: Vec<Vec<T>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(seed, c as u64);
            (c * CHUNK..n.min((c + 1) * CHUNK)).map(|_| f(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

pub fn coupling(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let g = spec.gaussian()?;
    let d = g.dim();
    let h = opts.h();
    let policy = opts.policy();
    let draws = opts.draws.expect("defaulted");
    let steps: Vec<(f64, CoupledStep)> = monte_carlo(draws, opts.seed(), |rng| {
        let theta = g.sample(rng);
        let mut u = vec![0.0; d];
        rng.fill_standard_normal(&mut u);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tilde: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t + v / norm).collect();
        let before = g.natural_norm(&u.iter().map(|v| v / norm).collect::<Vec<_>>());
        Ok((before, coupled_infinite_orbit_pair(g, &theta, &tilde, h, &policy, rng)?))
    })?;
    let dir = out_dir(opts)?;
    let mut csv = dir.csv(
        "coupling.csv",
        &["draw", "distance_before", "contraction", "residual", "shift", "shift_tilde", "sigma", "w"],
    )?;
    let (mut sum_sq, mut max_residual) = (0.0, 0.0f64);
    for (i, (before, st)) in steps.iter().enumerate() {
        sum_sq += st.contraction * st.contraction;
        max_residual = max_residual.max(st.residual);
        csv.row(&[
            i.to_string(),
            num(*before),
            num(st.contraction),
            num(st.residual),
            num(st.pair.shift),
            num(st.pair.shift_tilde),
            num(st.pair.sigma),
            num(st.pair.w),
        ])?;
    }
    csv.finish()?;
    let rms = (sum_sq / draws as f64).sqrt();
    let eig = g.eigenvalues();
    let isotropic = eig.iter().all(|&e| (e - eig[0]).abs() <= 1e-12 * eig[0]);
    let lambda = if isotropic {
        contraction_rate_isotropic(d)
    } else {
        contraction_rate_estimate(g, 100_000, &mut RngStream::new(opts.seed(), u64::MAX))
    };
    let limit = 1.0 - lambda;
    let mut summary = dir.csv(
        "summary.csv",
        &["dim", "h", "draws", "rms_contraction", "contraction_rate", "limit", "max_residual"],
    )?;
    summary.row(&[d.to_string(), num(h), draws.to_string(), num(rms), num(lambda), num(limit), num(max_residual)])?;
    summary.finish()?;
    dir.verdict(
        max_residual <= 1e-9 && rms <= limit,
        &format!("coupling: rms contraction {rms:.5} <= 1 - lambda = {limit:.5}; max projection residual {max_residual:.2e}"),
    )
}

pub fn tv(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let g = spec.gaussian()?;
    if g.dim() != 1 {
        return Err(config("tv needs a one-dimensional gaussian target"));
    }
    let var = g.covariance()[(0, 0)];
    let sd = var.sqrt();
    let log_density = move |x: f64| -0.5 * x * x / var - 0.5 * (2.0 * PI * var).ln();
    let grad = move |x: f64| -x / var;
    let hs = opts.h_values()?;
    let rows: Vec<_> = hs
        .par_iter()
        .map(|&h| -> Result<_> {
            let q = tv_nurs_vs_har_1d(&log_density, &grad, h, &GridSpec::for_target(0.0, sd, h))?;
            Ok((h, q, gaussian_log_tv_shift_kernel(sd, h)?))
        })
        .collect::<Result<_>>()?;
    let dir = out_dir(opts)?;
    let mut csv = dir.csv("tv.csv", &["h", "tv_quadrature", "error_estimate", "log_tv_exact", "bound", "pass"])?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (h, q, log_tv) in &rows {
        let ok = q.tv <= q.bound && log_tv.exp() <= q.bound;
        pass &= ok;
        csv.row(&[num(*h), num(q.tv), num(q.error_estimate), num(*log_tv), num(q.bound), ok.to_string()])?;
        parts.push(format!("h={h}: TV {:.2e} <= {:.4}", q.tv, q.bound));
    }
    csv.finish()?;
    // TV must shrink as the spacing does
    let mut by_h: Vec<(f64, f64)> = rows.iter().map(|(h, _, l)| (*h, *l)).collect();
    by_h.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_h.windows(2).all(|w| w[0].1 < w[1].1 || w[0].0 == w[1].0);
    dir.verdict(
        pass && monotone,
        &format!("tv: {}; exact log TV increasing in h: {monotone}", parts.join("; ")),
    )
}

pub fn acceptance(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let g = spec.gaussian()?;
    let d = g.dim();
    let smooth = SmoothnessSpec::new(1.0 / g.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))?;
    let hs = opts.h_values()?;
    let n_states = opts.states.expect("defaulted");
    let draws = opts.draws.expect("defaulted");
    let jobs: Vec<(usize, f64)> = hs.iter().flat_map(|&h| (0..n_states).map(move |k| (k, h))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(k, h))| -> Result<_> {
            let mut rng = RngStream::new(opts.seed(), j as u64);
            let theta = g.sample(&mut rng);
            let rho = sample_direction(d, &mut rng);
            let a = acceptance_probability_estimate(g, &theta, &rho, h, draws, &mut rng)?;
            let r = rwm_acceptance_estimate(g, &theta, h, draws, &mut rng)?;
            Ok((k, h, a, r))
        })
        .collect::<Result<_>>()?;
    let dir = out_dir(opts)?;
    let mut csv = dir.csv(
        "acceptance.csv",
        &["h", "state", "shift_estimate", "shift_std_error", "shift_bound", "rwm_estimate", "rwm_std_error", "rwm_bound"],
    )?;
    let mut pass = true;
    let (mut worst_shift, mut worst_rwm) = (f64::INFINITY, f64::INFINITY);
    for (k, h, a, r) in &results {
        let sb = shift_acceptance_lower_bound(*h, &smooth);
        let rb = rwm_acceptance_lower_bound(*h, &smooth);
        pass &= a.mean >= sb - 3.0 * a.std_error && r.mean >= rb - 3.0 * r.std_error;
        worst_shift = worst_shift.min((a.mean - sb) / a.std_error.max(1e-300));
        worst_rwm = worst_rwm.min((r.mean - rb) / r.std_error.max(1e-300));
        csv.row(&[num(*h), k.to_string(), num(a.mean), num(a.std_error), num(sb), num(r.mean), num(r.std_error), num(rb)])?;
    }
    csv.finish()?;
    dir.verdict(
        pass,
        &format!(
            "acceptance: {} (h, state) pairs, L = {:.4}; smallest margin above bound: shift {worst_shift:.1} se, rwm {worst_rwm:.1} se",
            results.len(),
            smooth.curvature
        ),
    )
}

pub fn orbit_symmetry(opts: &Opts) -> Result<bool> {
    let spec = target(opts)?;
    let mut rng = RngStream::new(opts.seed(), 0);
    let start = match (&opts.theta0, &spec) {
        (Some(_), _) => opts.theta0(spec.dim())?,
        (None, TargetSpec::Gaussian(g)) => g.sample(&mut rng),
        (None, TargetSpec::Funnel(f)) => f.sample(&mut rng),
    };
    let rho = sample_direction(spec.dim(), &mut rng);
    let rule = opts.nurs_params()?.doubling_rule();
    let rep = orbit_symmetry_check(spec.model().density(), &start, &rho, &rule)?;
    let dir = out_dir(opts)?;
    let mut csv = dir.csv(
        "orbit_symmetry.csv",
        &["size_log2", "orbit_size", "right", "probability", "max_deviation"],
    )?;
    for o in &rep.per_orbit {
        csv.row(&[
            o.size_log2.to_string(),
            (1u64 << o.size_log2).to_string(),
            o.right.to_string(),
            num(o.probability),
            num(o.max_deviation),
        ])?;
    }
    csv.finish()?;
    dir.verdict(
        rep.max_deviation <= 1e-12 && (rep.total_mass - 1.0).abs() <= 1e-12,
        &format!(
            "orbit-symmetry: max deviation {:.3e} over {} (orbit, index) pairs in {} orbits, total mass 1{:+.1e}",
            rep.max_deviation,
            rep.pairs,
            rep.orbits,
            rep.total_mass - 1.0
        ),
    )
}
