//! Exact orbit-selection probabilities by walking the tree of doubling bits.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::orbit::{lattice_point, stop_condition, sub_stop_with, DoublingRule};
use crate::target::TargetDensity;

/// Enumeration budget: at most `2^12` leaf paths.
pub const MAX_ENUMERATION_DOUBLINGS: u32 = 12;

/// Orbit probabilities keyed by `(ℓ, R)`: the orbit has `2^ℓ` points and
/// reaches `R` steps right of its start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrbitDistribution {
    pub probabilities: BTreeMap<(u32, u64), f64>,
}

impl OrbitDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probabilities.values().sum()
    }

    pub fn get(&self, size_log2: u32, right: i64) -> f64 {
        if right < 0 {
            return 0.0;
        }
        self.probabilities.get(&(size_log2, right as u64)).copied().unwrap_or(0.0)
    }
}

/// Log-densities at `anchor + k h rho`, computed once per lattice index.
struct LatticeCache<'a, T: ?Sized> {
    target: &'a T,
    anchor: &'a [f64],
    rho: &'a [f64],
    h: f64,
    values: HashMap<i64, f64>,
}

impl<T: TargetDensity + ?Sized> LatticeCache<'_, T> {
    fn range(&mut self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..=hi)
            .map(|k| {
                *self
                    .values
                    .entry(k)
                    .or_insert_with(|| self.target.log_density(&lattice_point(self.anchor, self.rho, self.h, k)))
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn walk<T: TargetDensity + ?Sized>(
    cache: &mut LatticeCache<'_, T>,
    rule: &DoublingRule,
    origin: i64,
    depth: u32,
    left: u64,
    right: u64,
    mass: f64,
    out: &mut BTreeMap<(u32, u64), f64>,
) {
    if depth == rule.max_doublings {
        *out.entry((depth, right)).or_insert(0.0) += mass;
        return;
    }
    let n = left + right + 1;
    let half = 0.5 * mass;
    for forward in [true, false] {
        let (lo, hi) = if forward {
            (origin + right as i64 + 1, origin + (right + n) as i64)
        } else {
            (origin - (left + n) as i64, origin - left as i64 - 1)
        };
        let ext = cache.range(lo, hi);
        if sub_stop_with(&ext, rule.threshold, rule.spacing, rule.include_singletons).expect("power-of-two extension") {
            *out.entry((depth, right)).or_insert(0.0) += half;
            continue;
        }
        let (nl, nr) = if forward { (left, right + n) } else { (left + n, right) };
        let merged = cache.range(origin - nl as i64, origin + nr as i64);
        if stop_condition(&merged, rule.threshold, rule.spacing) || depth + 1 == rule.max_doublings {
            *out.entry((depth + 1, nr)).or_insert(0.0) += half;
        } else {
            walk(cache, rule, origin, depth + 1, nl, nr, half, out);
        }
    }
}

fn enumerate_with<T: TargetDensity + ?Sized>(cache: &mut LatticeCache<'_, T>, origin: i64, rule: &DoublingRule) -> OrbitDistribution {
    let mut probabilities = BTreeMap::new();
    walk(cache, rule, origin, 0, 0, 0, 1.0, &mut probabilities);
    OrbitDistribution { probabilities }
}

fn check_budget(rule: &DoublingRule) -> Result<()> {
    if rule.max_doublings > MAX_ENUMERATION_DOUBLINGS {
        return Err(Error::EnumerationTooLarge {
            requested: rule.max_doublings,
            max: MAX_ENUMERATION_DOUBLINGS,
        });
    }
    Ok(())
}

/// Exact distribution of the final orbit from `start` along `rho`.
pub fn orbit_distribution_enumerate<T: TargetDensity + ?Sized>(
    target: &T,
    start: &[f64],
    rho: &[f64],
    rule: &DoublingRule,
) -> Result<OrbitDistribution> {
    check_budget(rule)?;
    let mut cache = LatticeCache {
        target,
        anchor: start,
        rho,
        h: rule.spacing,
        values: HashMap::new(),
    };
    Ok(enumerate_with(&mut cache, 0, rule))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSymmetry {
    pub size_log2: u32,
    pub right: u64,
    pub probability: f64,
    /// Largest deviation over the starts inside this orbit.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub per_orbit: Vec<OrbitSymmetry>,
    pub max_deviation: f64,
    pub total_mass: f64,
    /// Number of `(orbit, in-orbit index)` pairs compared.
    pub pairs: usize,
    pub orbits: usize,
}

/// Compares `p(ℓ, R | θ)` with `p(ℓ, R - i | θ + ihρ)` for every orbit of positive
/// probability and every index `i` in it. All starts share one lattice so that
/// the same points are evaluated bit-for-bit.
pub fn orbit_symmetry_check<T: TargetDensity + ?Sized>(
    target: &T,
    start: &[f64],
    rho: &[f64],
    rule: &DoublingRule,
) -> Result<SymmetryReport> {
    check_budget(rule)?;
    let mut cache = LatticeCache {
        target,
        anchor: start,
        rho,
        h: rule.spacing,
        values: HashMap::new(),
    };
    let base = enumerate_with(&mut cache, 0, rule);
    let mut shifted: HashMap<i64, OrbitDistribution> = HashMap::new();
    let mut per_orbit = Vec::new();
    let mut pairs = 0;
    for (&(l, r), &p) in &base.probabilities {
        if p <= 0.0 {
            continue;
        }
        let left = (1i64 << l) - 1 - r as i64;
        let mut dev = 0.0f64;
        for i in -left..=r as i64 {
            let other = shifted.entry(i).or_insert_with(|| enumerate_with(&mut cache, i, rule));
            dev = dev.max((p - other.get(l, r as i64 - i)).abs());
            pairs += 1;
        }
        per_orbit.push(OrbitSymmetry {
            size_log2: l,
            right: r,
            probability: p,
            max_deviation: dev,
        });
    }
    let max_deviation = per_orbit.iter().map(|o| o.max_deviation).fold(0.0, f64::max);
    Ok(SymmetryReport {
        per_orbit,
        max_deviation,
        total_mass: base.total_mass(),
        pairs,
        orbits: base.probabilities.len(),
    })
}
