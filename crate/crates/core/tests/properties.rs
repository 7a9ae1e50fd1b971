use proptest::prelude::*;
use rand::Rng;

use moilab_core::divdiff::{divided_difference, DEFAULT_CONFLUENCE_TOL};
use moilab_core::expansion::{combinatorial_expand, expansion_coeff, factorial_u128, multiset_coeff, MultiIndex};
use moilab_core::fit::loglog_fit;
use moilab_core::heat::{inverse_log_coeff, zeta_partial};
use moilab_core::hs::{AlmostAnalyticExtension, Bump};
use moilab_core::jet::Jet;
use moilab_core::linalg::{identity, random_hermitian, random_matrix, random_vector, seeded_rng, spectral_norm, CMat, C64};
use moilab_core::moi::{moi, moi_dd_same, Symbol};
use moilab_core::sobolev::{flat_adjoint, level_inner, op_norm, scale_pairing, WeightOperator};
use moilab_core::{apply_function, HermitianOperator, SymbolFunction};

fn herm(seed: u64, d: usize, scale: f64) -> HermitianOperator {
    HermitianOperator::new(random_hermitian(&mut seeded_rng(seed), d, scale)).unwrap()
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    spectral_norm(&(a - b)) / spectral_norm(a).max(spectral_norm(b)).max(1e-300)
}

fn family(k: usize) -> SymbolFunction {
    match k % 3 {
        0 => SymbolFunction::exp(),
        1 => SymbolFunction::sin(),
        _ => SymbolFunction::lorentz(),
    }
}

fn nodes_strategy(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..=max + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn divided_difference_is_symmetric(k in 0usize..3, nodes in nodes_strategy(4), rot in 0usize..5) {
        let f = family(k);
        let a = divided_difference(&f, &nodes, DEFAULT_CONFLUENCE_TOL).unwrap();
        let mut perm = nodes.clone();
        perm.reverse();
        let r = rot % perm.len();
        perm.rotate_left(r);
        let b = divided_difference(&f, &perm, DEFAULT_CONFLUENCE_TOL).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn leibniz_rule(nodes in nodes_strategy(3)) {
        let f = SymbolFunction::exp();
        let g = SymbolFunction::sin();
        let fg = SymbolFunction::from_jet("exp*sin", 16, |x: &Jet| &x.exp() * &x.sin());
        let n = nodes.len() - 1;
        let lhs = divided_difference(&fg, &nodes, DEFAULT_CONFLUENCE_TOL).unwrap();
        let mut rhs = C64::new(0.0, 0.0);
        for l in 0..=n {
            rhs += divided_difference(&f, &nodes[..=l], DEFAULT_CONFLUENCE_TOL).unwrap()
                * divided_difference(&g, &nodes[l..], DEFAULT_CONFLUENCE_TOL).unwrap();
        }
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn spectral_decomposition_invariants(seed in any::<u64>(), d in 1usize..8) {
        let h = herm(seed, d, 2.0);
        let e = h.eig().unwrap();
        let mut sum = CMat::zeros(d, d);
        let mut recon = CMat::zeros(d, d);
        for (p, l) in e.projections().iter().zip(&e.eigenvalues) {
            prop_assert!(spectral_norm(&(p * p - p)) <= 1e-10);
            prop_assert!(spectral_norm(&(p.adjoint() - p)) <= 1e-10);
            sum += p;
            recon += p * C64::new(*l, 0.0);
        }
        prop_assert!(spectral_norm(&(sum - identity(d))) <= 1e-10);
        prop_assert!(spectral_norm(&(recon - h.matrix())) <= 1e-10 * spectral_norm(h.matrix()).max(1.0));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[1] - w[0] > e.cluster_tol));
        let x = apply_function(&SymbolFunction::identity(), &h).unwrap();
        prop_assert!(spectral_norm(&(x - h.matrix())) <= 1e-10 * spectral_norm(h.matrix()).max(1.0));
    }

    #[test]
    fn flat_adjoint_pairs_levels(seed in any::<u64>(), s in -1.5f64..1.5, r in -1.5f64..1.5) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..7);
        let g = random_hermitian(&mut rng, d, 1.0);
        let theta = &g / C64::new(spectral_norm(&g), 0.0) * C64::new(2.0, 0.0) + identity(d) * C64::new(3.0, 0.0);
        let w = WeightOperator::new(HermitianOperator::new(theta).unwrap()).unwrap();
        let a = random_matrix(&mut rng, d, 1.0);
        let (u, v) = (random_vector(&mut rng, d), random_vector(&mut rng, d));
        let lhs = level_inner(&(&a * &u), &v, s, &w);
        let rhs = level_inner(&u, &(flat_adjoint(&a, s, r, &w).unwrap() * &v), s + r, &w);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn scale_pairing_with_trivial_weight(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut rng = seeded_rng(seed);
        let w = WeightOperator::identity(4);
        let (u, v) = (random_vector(&mut rng, 4), random_vector(&mut rng, 4));
        prop_assert!((scale_pairing(&u, &v, s, &w) - u.dotc(&v)).norm() <= 1e-12);
    }

    #[test]
    fn op_norm_is_submultiplicative(seed in any::<u64>(), s in -1.0f64..1.0, r in -1.0f64..1.0, t in -1.0f64..1.0) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..7);
        let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..5.0)).collect();
        let w = WeightOperator::diagonal(&diag).unwrap();
        let (a, b) = (random_matrix(&mut rng, d, 1.0), random_matrix(&mut rng, d, 1.0));
        let lhs = op_norm(&(&a * &b), s, r + t, &w).unwrap();
        let rhs = op_norm(&a, s, r, &w).unwrap() * op_norm(&b, s + r, t, &w).unwrap();
        prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
    }

    #[test]
    fn op_norm_interpolates(seed in any::<u64>(), k in 1usize..4) {
        let theta_frac = k as f64 / 4.0;
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..7);
        let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..5.0)).collect();
        let w = WeightOperator::diagonal(&diag).unwrap();
        let a = random_matrix(&mut rng, d, 1.0);
        let mid = op_norm(&a, theta_frac, 0.0, &w).unwrap();
        let bound = op_norm(&a, 0.0, 0.0, &w).unwrap().powf(1.0 - theta_frac) * op_norm(&a, 1.0, 0.0, &w).unwrap().powf(theta_frac);
        prop_assert!(mid <= bound * (1.0 + 1e-9), "{mid} > {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn moi_is_multilinear(seed in any::<u64>(), n in 1usize..4, slot in 0usize..3, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..6);
        let j = slot % n;
        let h = HermitianOperator::new(random_hermitian(&mut rng, d, 1.0)).unwrap();
        let xs: Vec<CMat> = (0..n).map(|_| random_matrix(&mut rng, d, 1.0)).collect();
        let y = random_matrix(&mut rng, d, 1.0);
        let f = SymbolFunction::exp();
        let eval = |m: &CMat| {
            let mut args: Vec<&CMat> = xs.iter().collect();
            args[j] = m;
            moi_dd_same(&f, &h, &args).unwrap()
        };
        let (ca, cb) = (C64::new(a, 0.0), C64::new(b, 0.0));
        let combo = &xs[j] * ca + &y * cb;
        let lhs = eval(&combo);
        let rhs = eval(&xs[j]) * ca + eval(&y) * cb;
        prop_assert!(rel(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn moi_is_linear_in_symbol(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..6);
        let hs: Vec<HermitianOperator> = (0..3).map(|_| HermitianOperator::new(random_hermitian(&mut rng, d, 1.0)).unwrap()).collect();
        let xs: Vec<CMat> = (0..2).map(|_| random_matrix(&mut rng, d, 1.0)).collect();
        let (hr, xr): (Vec<&HermitianOperator>, Vec<&CMat>) = (hs.iter().collect(), xs.iter().collect());
        let phi = |x: &[f64]| C64::new((x[0] - x[1] * x[2]).cos(), x[2]);
        let psi = |x: &[f64]| C64::new(x[0] * x[1], (x[1] + x[2]).exp());
        let combo = Symbol::generic(move |x: &[f64]| phi(x) * a + psi(x) * b);
        let lhs = moi(&combo, &hr, &xr).unwrap();
        let rhs = moi(&Symbol::generic(phi), &hr, &xr).unwrap() * C64::new(a, 0.0)
            + moi(&Symbol::generic(psi), &hr, &xr).unwrap() * C64::new(b, 0.0);
        prop_assert!(rel(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn moi_sees_symbol_only_on_spectra(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..6);
        let h0 = HermitianOperator::new(random_hermitian(&mut rng, d, 1.0)).unwrap();
        let h1 = HermitianOperator::new(random_hermitian(&mut rng, d, 1.0)).unwrap();
        let x = random_matrix(&mut rng, d, 1.0);
        let spec0 = h0.eig().unwrap().eigenvalues.clone();
        let phi = |x: &[f64]| C64::new((x[0] + 2.0 * x[1]).sin(), 0.5);
        let bumped = Symbol::generic(move |x: &[f64]| {
            let off: f64 = spec0.iter().map(|l| x[0] - l).product();
            phi(x) + C64::new(off * (1.0 + x[1] * x[1]), 3.0 * off)
        });
        let a = moi(&Symbol::generic(phi), &[&h0, &h1], &[&x]).unwrap();
        let b = moi(&bumped, &[&h0, &h1], &[&x]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn combinatorial_batches_are_consistent(seed in any::<u64>(), n in 1usize..3, order in 1usize..4) {
        let mut rng = seeded_rng(seed);
        let d = rng.random_range(2..6);
        let h = HermitianOperator::new(random_hermitian(&mut rng, d, 1.0)).unwrap();
        let xs: Vec<CMat> = (0..n).map(|_| random_matrix(&mut rng, d, 1.0)).collect();
        let refs: Vec<&CMat> = xs.iter().collect();
        let r = combinatorial_expand(&SymbolFunction::exp(), &h, &refs, order).unwrap();
        for k in 1..=order {
            let diff = &r.partial_sums[k] - &r.partial_sums[k - 1];
            prop_assert!(spectral_norm(&(diff - &r.batches[k])) <= 1e-13 * r.scale());
        }
    }

    #[test]
    fn zeta_tail_bound_is_valid(sigma in 1.2f64..4.0, tau in -20.0f64..20.0, nmax in 200u64..3000) {
        let s = C64::new(sigma, tau);
        let bound = 1.0 / (2.0f64).ln();
        let a = zeta_partial(inverse_log_coeff, bound, s, nmax).unwrap();
        let b = zeta_partial(inverse_log_coeff, bound, s, 2 * nmax).unwrap();
        prop_assert!((a.value - b.value).norm() < a.tail_bound);
    }
}

#[test]
fn confluent_limit_is_first_order() {
    let f = SymbolFunction::exp();
    let lam = 0.3;
    let hs = [1e-1, 5e-2, 2.5e-2, 1.25e-2];
    let errs: Vec<f64> = hs
        .iter()
        .map(|h| (divided_difference(&f, &[lam, lam + h], DEFAULT_CONFLUENCE_TOL).unwrap() - f.derivative(1, lam)).norm())
        .collect();
    let slope = loglog_fit(&hs, &errs).unwrap().slope;
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn first_order_coefficients_match_taylor_series() {
    for m in 0..=25usize {
        assert_eq!(expansion_coeff(&MultiIndex::new(vec![m])).unwrap(), 1);
        assert!(factorial_u128(1 + m as u64).unwrap() > 0);
    }
    for m in 0..=12 {
        for j in 0..=12 {
            let lhs: u128 = (0..=j).map(|l| multiset_coeff(m, l).unwrap()).sum();
            assert_eq!(lhs, multiset_coeff(m + 1, j).unwrap());
        }
    }
}

#[test]
fn dbar_plateau_scales_like_power() {
    for n in 1..=3 {
        let ext = AlmostAnalyticExtension::new(&SymbolFunction::gauss(1.0), n, Bump::Psi).unwrap();
        let ys = [0.4, 0.2, 0.1, 0.05];
        let mags: Vec<f64> = ys.iter().map(|y| ext.dbar(C64::new(0.3, *y)).norm()).collect();
        let slope = loglog_fit(&ys, &mags).unwrap().slope;
        assert!((slope - n as f64).abs() <= 0.1, "n={n} slope {slope}");
        assert_eq!(ext.dbar(C64::new(0.3, 2.5 * 1.05)), C64::new(0.0, 0.0));
        assert_eq!(ext.value(C64::new(0.7, 0.0)), SymbolFunction::gauss(1.0).value(0.7));
    }
}

#[test]
fn moi_is_deterministic_across_thread_counts() {
    let h = herm(11, 40, 1.0);
    let mut rng = seeded_rng(12);
    let xs: Vec<CMat> = (0..2).map(|_| random_matrix(&mut rng, 40, 1.0)).collect();
    let refs: Vec<&CMat> = xs.iter().collect();
    let f = SymbolFunction::exp();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| moi_dd_same(&f, &h, &refs).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(1));
    for t in [2, 3] {
        assert!(spectral_norm(&(&a - run(t))) <= 1e-12 * spectral_norm(&a));
    }
}
