//! Lattice orbits: doubling, the No-Underrun stopping rule and the sub-stopping check.
//!
//! An orbit is a run of consecutive points `base + i * h * rho` for `i` in `-a..=b`,
//! with `a + b + 1` a power of two. Only log-weights are stored; points are recomputed
//! from their lattice index on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{axpy_into, log_add_exp, log_sum_exp};
use crate::target::TargetDensity;

/// Extensions at least this long are evaluated on the worker pool.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_POINTS: usize = 4096;

/// `base + i * h * rho`.
pub fn lattice_point(base: &[f64], rho: &[f64], h: f64, i: i64) -> Vec<f64> {
    let mut out = vec![0.0; base.len()];
    axpy_into(base, i as f64 * h, rho, &mut out);
    out
}

/// The `n` points next to `endpoint` in direction `sign(h_signed)`, listed left to right.
pub fn extend_orbit(endpoint: &[f64], rho: &[f64], h_signed: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    if h_signed == 0.0 {
        return Err(Error::ZeroSpacing);
    }
    let steps: Box<dyn Iterator<Item = usize>> = if h_signed > 0.0 {
        Box::new(1..=n)
    } else {
        Box::new((1..=n).rev())
    };
    Ok(steps
        .map(|k| {
            let mut p = vec![0.0; endpoint.len()];
            axpy_into(endpoint, h_signed * k as f64, rho, &mut p);
            p
        })
        .collect())
}

/// No-Underrun stopping condition in log space:
/// `max(w_first, w_last) <= log(eps) + log(h) + logsumexp(w)`.
///
/// With `eps == 0` the condition never holds.
pub fn stop_condition(log_weights: &[f64], eps: f64, h: f64) -> bool {
    let Some((&first, &last)) = log_weights.first().zip(log_weights.last()) else {
        return false;
    };
    first.max(last) <= eps.ln() + h.ln() + log_sum_exp(log_weights)
}

/// Whether the segment or any sub-orbit obtained by repeated halving stops.
///
/// When `include_singletons` is false, length-one sub-orbits are never checked
/// (the behavior of the recursive reference listing).
///
/// Node sums are built bottom-up by pairwise log-add, so the check is O(n)
/// and each node's sum is exact to rounding regardless of the weight spread.
pub fn sub_stop_with(log_weights: &[f64], eps: f64, h: f64, include_singletons: bool) -> Result<bool> {
    let n = log_weights.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let log_eh = eps.ln() + h.ln();
    if log_eh == f64::NEG_INFINITY {
        return Ok(false);
    }
    if include_singletons && log_weights.iter().any(|&w| w <= log_eh + w) {
        return Ok(true);
    }
    let mut sums = log_weights.to_vec();
    let mut width = 1usize;
    while sums.len() > 1 {
        width *= 2;
        let next: Vec<f64> = sums.chunks_exact(2).map(|p| log_add_exp(p[0], p[1])).collect();
        for (j, &lse) in next.iter().enumerate() {
            let first = log_weights[j * width];
            let last = log_weights[(j + 1) * width - 1];
            if first.max(last) <= log_eh + lse {
                return Ok(true);
            }
        }
        sums = next;
    }
    Ok(false)
}

/// [`sub_stop_with`] including single-point sub-orbits.
pub fn sub_stop(log_weights: &[f64], eps: f64, h: f64) -> Result<bool> {
    sub_stop_with(log_weights, eps, h, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The merged orbit met the stopping condition.
    Stopped,
    /// The proposed extension sub-stopped and was discarded.
    ExtensionSubStopped,
    /// The doubling budget ran out.
    MaxDoublings,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stopped => "stopped",
            Termination::ExtensionSubStopped => "extension-sub-stopped",
            Termination::MaxDoublings => "max-doublings",
        }
    }
}

/// Settings of the doubling procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingRule {
    pub spacing: f64,
    pub threshold: f64,
    pub max_doublings: u32,
    pub include_singletons: bool,
}

#[derive(Clone, Debug)]
pub struct Orbit {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub spacing: f64,
    pub left_steps: u64,
    pub right_steps: u64,
    /// Indexed from `-left_steps` to `right_steps`.
    pub log_weights: Vec<f64>,
}

impl Orbit {
    pub fn size(&self) -> usize {
        self.log_weights.len()
    }

    pub fn lowest_index(&self) -> i64 {
        -(self.left_steps as i64)
    }

    pub fn highest_index(&self) -> i64 {
        self.right_steps as i64
    }

    pub fn contains_index(&self, i: i64) -> bool {
        (self.lowest_index()..=self.highest_index()).contains(&i)
    }

    pub fn log_weight(&self, i: i64) -> f64 {
        self.log_weights[(i + self.left_steps as i64) as usize]
    }

    pub fn point(&self, i: i64) -> Vec<f64> {
        lattice_point(&self.base, &self.direction, self.spacing, i)
    }

    pub fn log_normalizer(&self) -> f64 {
        log_sum_exp(&self.log_weights)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoublingTrace {
    pub bits: Vec<bool>,
    pub doublings: u32,
    pub termination: Termination,
    /// Log-weights of an extension that sub-stopped, in left-to-right order.
    pub discarded: Vec<f64>,
}

/// Log-densities at `base + i h rho` for `i` in `lo..=hi`, in index order.
pub(crate) fn evaluate_range<T: TargetDensity + ?Sized>(
    target: &T,
    base: &[f64],
    rho: &[f64],
    h: f64,
    lo: i64,
    hi: i64,
) -> Vec<f64> {
    let eval = |buf: &mut Vec<f64>, i: i64| {
        axpy_into(base, i as f64 * h, rho, buf);
        target.log_density(buf)
    };
    let len = (hi - lo + 1).max(0) as usize;
    #[cfg(feature = "parallel")]
    if len >= PARALLEL_MIN_POINTS {
        use rayon::prelude::*;
        return (lo..=hi)
            .into_par_iter()
            .map_init(|| vec![0.0; base.len()], |buf, i| eval(buf, i))
            .collect();
    }
    let mut buf = vec![0.0; base.len()];
    let mut out = Vec::with_capacity(len);
    for i in lo..=hi {
        out.push(eval(&mut buf, i));
    }
    out
}

/// Runs the doubling procedure from `start` along `rho`.
///
/// `next_bit` supplies the doubling directions lazily (`true` = forward).
pub fn build_orbit<T: TargetDensity + ?Sized>(
    target: &T,
    start: &[f64],
    rho: &[f64],
    rule: &DoublingRule,
    next_bit: &mut dyn FnMut() -> bool,
) -> (Orbit, DoublingTrace) {
    build_orbit_from(target, start, None, rho, rule, next_bit)
}

/// [`build_orbit`] with the start point's log-density already known.
pub(crate) fn build_orbit_from<T: TargetDensity + ?Sized>(
    target: &T,
    start: &[f64],
    start_log_weight: Option<f64>,
    rho: &[f64],
    rule: &DoublingRule,
    next_bit: &mut dyn FnMut() -> bool,
) -> (Orbit, DoublingTrace) {
    let h = rule.spacing;
    let w0 = start_log_weight.unwrap_or_else(|| target.log_density(start));
    let mut weights = vec![w0];
    let (mut left, mut right) = (0u64, 0u64);
    let mut bits = Vec::new();
    let mut termination = Termination::MaxDoublings;
    let mut discarded = Vec::new();

    for k in 0..rule.max_doublings {
        let forward = next_bit();
        bits.push(forward);
        let n = weights.len() as i64;
        let ext = if forward {
            evaluate_range(target, start, rho, h, right as i64 + 1, right as i64 + n)
        } else {
            evaluate_range(target, start, rho, h, -(left as i64) - n, -(left as i64) - 1)
        };
        let ext_stops = sub_stop_with(&ext, rule.threshold, h, rule.include_singletons)
            .expect("extensions have power-of-two length");
        if ext_stops {
            termination = Termination::ExtensionSubStopped;
            discarded = ext;
            break;
        }
        if forward {
            weights.extend_from_slice(&ext);
            right += n as u64;
        } else {
            let mut merged = ext;
            merged.extend_from_slice(&weights);
            weights = merged;
            left += n as u64;
        }
        if stop_condition(&weights, rule.threshold, h) {
            termination = Termination::Stopped;
            break;
        }
        if k + 1 == rule.max_doublings {
            termination = Termination::MaxDoublings;
        }
    }

    let doublings = (weights.len() as u64).trailing_zeros();
    (
        Orbit {
            base: start.to_vec(),
            direction: rho.to_vec(),
            spacing: h,
            left_steps: left,
            right_steps: right,
            log_weights: weights,
        },
        DoublingTrace {
            bits,
            doublings,
            termination,
            discarded,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{Counting, FnTarget};
    use proptest::prelude::*;

    /// Direct recursion over the halving tree, evaluating the stop rule in linear space.
    fn naive_sub_stop(w: &[f64], eps: f64, h: f64) -> bool {
        let lin: Vec<f64> = w.iter().map(|v| v.exp()).collect();
        let stop = |s: &[f64]| s[0].max(s[s.len() - 1]) <= eps * h * s.iter().sum::<f64>();
        fn rec(s: &[f64], stop: &dyn Fn(&[f64]) -> bool) -> bool {
            if stop(s) {
                return true;
            }
            if s.len() < 2 {
                return false;
            }
            let (l, r) = s.split_at(s.len() / 2);
            rec(l, stop) || rec(r, stop)
        }
        rec(&lin, &stop)
    }

    fn flat(dim: usize) -> FnTarget<impl Fn(&[f64]) -> f64 + Send + Sync> {
        FnTarget::new(dim, |_x: &[f64]| 0.0)
    }

    #[test]
    fn lattice_point_examples() {
        assert_eq!(lattice_point(&[0.0, 0.0], &[1.0, 0.0], 0.5, 0), vec![0.0, 0.0]);
        assert_eq!(lattice_point(&[0.0, 0.0], &[1.0, 0.0], 0.5, -3), vec![-1.5, 0.0]);
        assert_eq!(lattice_point(&[1.0, 1.0], &[0.0, 1.0], 2.0, 2), vec![1.0, 5.0]);
    }

    #[test]
    fn extend_orbit_examples() {
        let fwd = extend_orbit(&[0.0], &[1.0], 0.5, 3).unwrap();
        assert_eq!(fwd, vec![vec![0.5], vec![1.0], vec![1.5]]);
        let bwd = extend_orbit(&[0.0], &[1.0], -0.5, 3).unwrap();
        assert_eq!(bwd, vec![vec![-1.5], vec![-1.0], vec![-0.5]]);
        let one = extend_orbit(&[2.0, 0.0], &[0.0, 1.0], 1.0, 1).unwrap();
        assert_eq!(one, vec![vec![2.0, 1.0]]);
        assert_eq!(extend_orbit(&[0.0], &[1.0], 0.0, 2), Err(Error::ZeroSpacing));
    }

    #[test]
    fn stop_condition_examples() {
        // constant weights over n points: stops iff eps*h*n >= 1
        let w = vec![-3.0; 8];
        assert!(stop_condition(&w, 0.25, 0.5));
        assert!(!stop_condition(&w, 0.2, 0.5));
        assert!(!stop_condition(&[0.0, -1.0, 5.0], 0.0, 1.0));
        assert!(stop_condition(&[-10.0, 0.0, 0.0, -10.0], 0.1, 1.0));
    }

    #[test]
    fn sub_stop_examples() {
        assert!(sub_stop(&[1.3], 1.0, 1.0).unwrap());
        assert!(!sub_stop(&[1.3], 0.5, 1.0).unwrap());
        assert!(!sub_stop_with(&[1.3], 1.0, 1.0, false).unwrap());
        let w = [0.0, -20.0, -20.0, 0.0];
        assert_eq!(sub_stop(&w, 0.5, 1.0).unwrap(), naive_sub_stop(&w, 0.5, 1.0));
        assert!(sub_stop(&w, 0.5, 1.0).unwrap());
        assert_eq!(sub_stop(&[0.0; 3], 0.5, 1.0), Err(Error::NotPowerOfTwo(3)));
        assert!(!sub_stop(&[0.0; 4], 0.0, 1.0).unwrap());
    }

    #[test]
    fn sub_stop_matches_naive_exhaustively() {
        let alphabet = [0.0, -2.0, -9.0];
        let configs = [(0.05, 0.7), (0.3, 0.9), (0.11, 1.3), (0.02, 3.1)];
        for len in [1usize, 2, 4, 8] {
            let total = 3usize.pow(len as u32);
            for code in 0..total {
                let mut c = code;
                let w: Vec<f64> = (0..len)
                    .map(|_| {
                        let v = alphabet[c % 3];
                        c /= 3;
                        v
                    })
                    .collect();
                for &(eps, h) in &configs {
                    assert_eq!(sub_stop(&w, eps, h).unwrap(), naive_sub_stop(&w, eps, h), "{w:?} {eps} {h}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sub_stop_matches_naive_len16(codes in prop::collection::vec(0usize..3, 16), cfg in 0usize..4) {
            let alphabet = [0.0, -2.0, -9.0];
            let (eps, h) = [(0.05, 0.7), (0.3, 0.9), (0.11, 1.3), (0.02, 3.1)][cfg];
            let w: Vec<f64> = codes.iter().map(|&c| alphabet[c]).collect();
            prop_assert_eq!(sub_stop(&w, eps, h).unwrap(), naive_sub_stop(&w, eps, h));
        }

        #[test]
        fn log_space_stop_matches_linear(w in prop::collection::vec(-30.0f64..30.0, 1..20), eps in 0.001f64..0.5, h in 0.01f64..2.0) {
            let lin: Vec<f64> = w.iter().map(|v| v.exp()).collect();
            let lhs = lin[0].max(lin[lin.len() - 1]);
            let rhs = eps * h * lin.iter().sum::<f64>();
            // skip configurations sitting on the boundary at rounding precision
            prop_assume!((lhs - rhs).abs() > 1e-9 * lhs.max(rhs));
            prop_assert_eq!(stop_condition(&w, eps, h), lhs <= rhs);
        }
    }

    #[test]
    fn no_doublings_gives_single_point() {
        let rule = DoublingRule { spacing: 0.5, threshold: 0.1, max_doublings: 0, include_singletons: true };
        let (orbit, trace) = build_orbit(&flat(1), &[0.3], &[1.0], &rule, &mut || panic!("no bits"));
        assert_eq!(orbit.size(), 1);
        assert_eq!(trace.doublings, 0);
        assert_eq!(trace.termination, Termination::MaxDoublings);
    }

    #[test]
    fn doubling_by_hand() {
        let rule = DoublingRule { spacing: 0.5, threshold: 0.0, max_doublings: 3, include_singletons: true };
        let mut bits = [true, false, true].into_iter();
        let target = FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0]);
        let (orbit, trace) = build_orbit(&target, &[0.0], &[1.0], &rule, &mut || bits.next().unwrap());
        assert_eq!((orbit.lowest_index(), orbit.highest_index()), (-2, 5));
        assert_eq!(orbit.size(), 8);
        assert_eq!(trace.termination, Termination::MaxDoublings);
        assert_eq!(trace.bits, vec![true, false, true]);
        // binary expansion of the right endpoint
        let b: u64 = trace.bits.iter().enumerate().map(|(i, &bit)| (bit as u64) << i).sum();
        assert_eq!(orbit.right_steps, b);
        assert_eq!(orbit.left_steps, 7 - b);
        for i in -2..=5 {
            let x = 0.5 * i as f64;
            assert_eq!(orbit.log_weight(i), -0.5 * x * x);
        }
    }

    #[test]
    fn first_extension_sub_stops() {
        let rule = DoublingRule { spacing: 1.0, threshold: 2.0, max_doublings: 5, include_singletons: true };
        let (orbit, trace) = build_orbit(&flat(1), &[0.0], &[1.0], &rule, &mut || true);
        assert_eq!(orbit.size(), 1);
        assert_eq!(trace.termination, Termination::ExtensionSubStopped);
        assert_eq!(trace.discarded.len(), 1);
    }

    #[test]
    fn evaluations_are_not_repeated() {
        let target = Counting::new(FnTarget::new(2, |x: &[f64]| -0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1])));
        let rule = DoublingRule { spacing: 0.3, threshold: 0.01, max_doublings: 10, include_singletons: true };
        let rho = [0.6, 0.8];
        for seed in 0..20u64 {
            target.reset();
            let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
            let mut bit = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state & 1 == 1
            };
            let (orbit, trace) = build_orbit(&target, &[0.4, -0.2], &rho, &rule, &mut bit);
            assert_eq!(target.calls(), (orbit.size() + trace.discarded.len()) as u64);
            assert!(orbit.size().is_power_of_two());
            assert!(orbit.contains_index(0));
        }
    }

    #[test]
    fn zero_threshold_always_fills_budget() {
        let target = FnTarget::new(1, |x: &[f64]| -50.0 * x[0] * x[0]);
        let rule = DoublingRule { spacing: 0.01, threshold: 0.0, max_doublings: 7, include_singletons: true };
        let mut flip = false;
        let (orbit, trace) = build_orbit(&target, &[3.0], &[1.0], &rule, &mut || {
            flip = !flip;
            flip
        });
        assert_eq!(orbit.size(), 128);
        assert_eq!(trace.termination, Termination::MaxDoublings);
    }
}
