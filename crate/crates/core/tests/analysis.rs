use nurs::analysis::stats::ks_distance;
use nurs::analysis::{
    coupled_infinite_orbit_pair, orbit_distribution_enumerate, orbit_symmetry_check, pwu_density, Pwu,
};
use nurs::target::FnTarget;
use nurs::{DoublingRule, GaussianSpec, RngStream, TruncationPolicy};

#[test]
fn symmetry_along_a_direction_in_two_dimensions() {
    let g = GaussianSpec::diagonal(&[1.0, 0.1]).unwrap();
    let rho = [0.6, 0.8];
    for &(h, eps, m) in &[(0.3, 0.05, 5u32), (0.15, 0.01, 7)] {
        let rule = DoublingRule {
            spacing: h,
            threshold: eps,
            max_doublings: m,
            include_singletons: true,
        };
        let rep = orbit_symmetry_check(&g, &[0.4, -0.2], &rho, &rule).unwrap();
        assert!(rep.max_deviation <= 1e-12);
        assert!((rep.total_mass - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn bimodal_target_enumeration_sums_to_one() {
    let t = FnTarget::new(1, |x: &[f64]| {
        let a = -0.5 * (x[0] - 2.0).powi(2);
        let b = -0.5 * (x[0] + 2.0).powi(2);
        a.max(b) + (-(a - b).abs()).exp().ln_1p()
    });
    let rule = DoublingRule {
        spacing: 0.4,
        threshold: 0.02,
        max_doublings: 10,
        include_singletons: true,
    };
    let d = orbit_distribution_enumerate(&t, &[0.0], &[1.0], &rule).unwrap();
    assert!((d.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn coupled_shifts_are_both_uniform() {
    let g = GaussianSpec::isotropic(3);
    let h = 0.5;
    let mut rng = RngStream::new(3, 0);
    let n = 20_000;
    let mut s = Vec::with_capacity(n);
    let mut st = Vec::with_capacity(n);
    for _ in 0..n {
        let step =
            coupled_infinite_orbit_pair(&g, &[0.2, 0.0, -1.0], &[1.0, 1.0, 0.5], h, &TruncationPolicy::default(), &mut rng)
                .unwrap();
        s.push(step.pair.shift);
        st.push(step.pair.shift_tilde);
    }
    let cdf = |x: f64| ((x + 0.5 * h) / h).clamp(0.0, 1.0);
    let crit = 1.95 / (n as f64).sqrt();
    assert!(ks_distance(&s, cdf) < crit);
    assert!(ks_distance(&st, cdf) < crit);
}

#[test]
fn pwu_single_call_matches_struct() {
    let f = |x: f64| -0.5 * x * x;
    let p = Pwu::new(f, 0.3, 0.1, 1e-12).unwrap();
    for t in [-1.0, 0.0, 0.26, 2.2] {
        assert_eq!(pwu_density(f, 0.3, 0.1, t).unwrap(), p.density(t));
    }
}
