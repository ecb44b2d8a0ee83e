#![allow(clippy::needless_range_loop)]
//! Universally quantified invariants, checked on random inputs.

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psslab::fock::{FockAlgebra, StructureFunction, TrustedWindow};
use psslab::linalg::{hermitian_eigenvalues, BlockOperator, OperatorMatrix};
use psslab::realizations::{
    build_bosonized_a, build_bosonized_b, build_gdoa_realization_a, build_gdoa_realization_b,
    build_superpotential_realization, u1, u2, u3, BoundaryConvention, ModulationFunction,
    RealizationBundle, Representation, Space, GDOA_MARGIN,
};
use psslab::spectra::{
    closed_form_spectrum_a, closed_form_spectrum_b, spectrum_of, spectrum_with_comparison,
    C3SpectrumParams, SpectrumOptions, CLOSED_FORM_TOL,
};
use psslab::superpotential::{
    build_diagonal_pair, consistency_residuals, linspace, solve_unequal_case,
    solve_unequal_polynomial, DiagonalPairSpec, H4Choice, Polynomial, Superpotential,
    DEFAULT_DELTA,
};
use psslab::verify::{check_psssqm, check_psssqm_with, corrupt_hamiltonian, Budget, Metric};

fn poly(max_deg: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-2.0..2.0f64, 1..=max_deg + 1).prop_map(Polynomial::new)
}

fn modulation() -> impl Strategy<Value = ModulationFunction> {
    (0.5..1.5f64, -0.1..0.3f64, -0.002..0.005f64).prop_map(|(a, b, c)| ModulationFunction::Poly {
        coeffs: vec![a, b, c],
    })
}

fn alphas() -> impl Strategy<Value = (f64, f64)> {
    (-0.95..2.95f64, -1.95..2.95f64).prop_map(|(a0, s)| (a0, s - a0))
}

/// Modulations with `f ≥ 1` and a structure function with `F(n) ≥ ½` for
/// `n ≥ 1`, so every ladder element of the charge is at least ½.
fn strong_modulation() -> impl Strategy<Value = ModulationFunction> {
    (1.0..1.5f64, 0.0..0.3f64, 0.0..0.005f64).prop_map(|(a, b, c)| ModulationFunction::Poly {
        coeffs: vec![a, b, c],
    })
}

fn strong_alphas() -> impl Strategy<Value = (f64, f64)> {
    (-0.5..2.95f64, -1.5..2.95f64).prop_map(|(a0, s)| (a0, s - a0))
}

fn c3(a: (f64, f64), dim: usize) -> FockAlgebra {
    FockAlgebra::new(StructureFunction::c3(a.0, a.1).unwrap(), dim).unwrap()
}

/// Unitary from Gram–Schmidt on the columns of a random complex matrix.
fn random_unitary(dim: usize, seed: u64) -> OperatorMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let v = cols[k][i];
                cols[j][i] -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= norm;
        }
    }
    let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            entries[i * dim + j] = cols[j][i];
        }
    }
    OperatorMatrix::from_entries(dim, entries).unwrap()
}

fn conjugate_flat(b: &BlockOperator, u: &OperatorMatrix) -> BlockOperator {
    let flat = &(u * &b.flatten()) * &u.adjoint();
    BlockOperator::unflatten(b.blocks(), &flat).unwrap()
}

fn residuals(reports: &[psslab::verify::ResidualReport]) -> Vec<f64> {
    reports.iter().map(|r| r.residual).collect()
}

fn fixed_config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(fixed_config(24))]

    #[test]
    fn unequal_solution_is_self_consistent(p1 in poly(3), p2 in poly(3)) {
        let points = linspace(-2.0, 2.0, 41);
        let gap = p1.sub(&p2);
        prop_assume!(points.iter().all(|&x| gap.eval(x).abs() >= 0.1));
        let (w1, w2) = (Superpotential::Polynomial(p1), Superpotential::Polynomial(p2));
        let sol = solve_unequal_case(&w1, &w2, &points, DEFAULT_DELTA).unwrap();
        let res = consistency_residuals(&w1, &w2, &sol).unwrap();
        prop_assert!(res.iter().all(|&r| r <= 1e-10), "{res:?}");
    }

    #[test]
    fn swapping_superpotentials_swaps_potentials(p1 in poly(3), p2 in poly(3)) {
        let points = linspace(-2.0, 2.0, 41);
        let gap = p1.sub(&p2);
        prop_assume!(points.iter().all(|&x| gap.eval(x).abs() >= 0.1));
        let (w1, w2) = (Superpotential::Polynomial(p1), Superpotential::Polynomial(p2));
        let a = solve_unequal_case(&w1, &w2, &points, DEFAULT_DELTA).unwrap();
        let b = solve_unequal_case(&w2, &w1, &points, DEFAULT_DELTA).unwrap();
        for i in 0..points.len() {
            prop_assert!((a.v1[i] - b.v2[i]).abs() <= 1e-12);
            prop_assert!((a.v2[i] - b.v1[i]).abs() <= 1e-12);
            prop_assert!((a.h4_imag[i] - b.h4_imag[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn coincident_points_rejected(p in poly(3), x in -2.0..2.0f64) {
        let w = Superpotential::Polynomial(p.clone());
        let shifted = Superpotential::Polynomial(p.add(&Polynomial::new(vec![-x, 1.0]).scale(1e-12)));
        prop_assert!(solve_unequal_case(&w, &shifted, &[x], DEFAULT_DELTA).is_err());
    }

    #[test]
    fn polynomial_solution_matches_pointwise(a in -2.0..2.0f64, b in -2.0..2.0f64, k in 0.5..2.0f64) {
        // W₂ = W₁ − k keeps W₁ − W₂ constant, so every quotient is polynomial
        let p1 = Polynomial::new(vec![a, b, 0.3]);
        let p2 = p1.sub(&Polynomial::constant(k));
        let exact = solve_unequal_polynomial(&p1, &p2).unwrap();
        let points = linspace(-2.0, 2.0, 21);
        let s = solve_unequal_case(
            &Superpotential::Polynomial(p1),
            &Superpotential::Polynomial(p2),
            &points,
            DEFAULT_DELTA,
        )
        .unwrap();
        for (i, &x) in points.iter().enumerate() {
            prop_assert!((exact.v1.eval(x) - s.v1[i]).abs() <= 1e-10);
            prop_assert!((exact.v2.eval(x) - s.v2[i]).abs() <= 1e-10);
            prop_assert!((exact.h4_imag.eval(x) - s.h4_imag[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn polynomial_calculus_roundtrip(p in poly(5), x0 in -1.0..1.0f64, x in -2.0..2.0f64) {
        let back = p.antiderivative(x0).derivative();
        prop_assert!((back.eval(x) - p.eval(x)).abs() <= 1e-12 * (1.0 + p.max_abs_coeff()));
        prop_assert!(p.antiderivative(x0).eval(x0).abs() <= 1e-12);
    }

    #[test]
    fn gdoa_nilpotency_is_structural(a in alphas(), f in modulation(), f1 in modulation(), f2 in modulation()) {
        let alg = c3(a, 24);
        let ra = build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(1.0), 0.5, GDOA_MARGIN).unwrap();
        let rb = build_gdoa_realization_b(&alg, &f1, &f2, 0.5, BoundaryConvention::ZeroBelowVacuum, GDOA_MARGIN).unwrap();
        for b in [&ra, &rb] {
            let q2 = b.q.try_matmul(&b.q).unwrap();
            prop_assert_eq!(q2.max_abs(), 0.0);
        }
    }

    #[test]
    fn relations_invariant_under_unitary_conjugation(
        a in alphas(),
        f in modulation(),
        seed in any::<u64>(),
    ) {
        let alg = c3(a, 6);
        let clean = build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(0.7), 0.5, 2).unwrap();
        let b = corrupt_hamiltonian(&clean, 1, 1, 0.3);
        let metric = Metric::Full;
        let budget = Budget::new(&metric, &b.q, &b.h, 1e-10);
        let before = residuals(&check_psssqm_with(&b, &metric, budget));
        let u = random_unitary(b.q.total_dim(), seed);
        prop_assert!(u.unitarity_defect() < 1e-12);
        let moved = RealizationBundle {
            q: conjugate_flat(&b.q, &u),
            q_dag: conjugate_flat(&b.q_dag, &u),
            h: conjugate_flat(&b.h, &u),
            ..b.clone()
        };
        let after = residuals(&check_psssqm_with(&moved, &metric, budget));
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x), "{x} vs {y}");
        }
    }

    #[test]
    fn residuals_scale_with_degree(a in alphas(), f in modulation(), block in 0usize..3, idx in 0usize..10) {
        let alg = c3(a, 16);
        let clean = build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(0.7), 0.5, GDOA_MARGIN).unwrap();
        let b = corrupt_hamiltonian(&clean, block, idx, 0.25);
        let lam = 2.0;
        let scaled = RealizationBundle {
            q: b.q.scale_real(lam),
            q_dag: b.q_dag.scale_real(lam),
            h: b.h.scale_real(lam * lam),
            ..b.clone()
        };
        let r0 = check_psssqm(&b, None);
        let r1 = check_psssqm(&scaled, None);
        // [H, Q] and the trilinear are cubic in Q when H scales like Q²
        for k in [2usize, 4] {
            prop_assert!((r1[k].residual - lam.powi(3) * r0[k].residual).abs() <= 1e-9 * (1.0 + r1[k].residual));
        }
        prop_assert_eq!(r1[0].residual, 0.0);
    }

    #[test]
    fn fault_injection_detected(
        a in strong_alphas(),
        f1 in strong_modulation(),
        f2 in strong_modulation(),
        block in 0usize..3,
        idx in 0usize..20,
        eps in 1e-6..1.0f64,
    ) {
        let alg = c3(a, 24);
        let clean = build_gdoa_realization_b(&alg, &f1, &f2, 0.5, BoundaryConvention::ZeroBelowVacuum, GDOA_MARGIN).unwrap();
        let keep = TrustedWindow::new(24, GDOA_MARGIN).unwrap().keep();
        // the ladder partner of the corrupted entry must also lie in the window
        prop_assume!(idx + 1 < keep);
        // the block-0 vacuum is annihilated by Q and Q†, so its energy is free
        prop_assume!(!(block == 0 && idx == 0));
        let base = check_psssqm(&clean, None);
        let bad = check_psssqm(&corrupt_hamiltonian(&clean, block, idx, eps), None);
        let raised = base.iter().zip(&bad).any(|(x, y)| y.residual - x.residual >= eps / 10.0);
        prop_assert!(raised);
    }

    #[test]
    fn bosonized_spectra_match_closed_form(
        a in alphas(),
        f in modulation(),
        f1 in modulation(),
        f2 in modulation(),
        mu in 0usize..3,
    ) {
        let alg = c3(a, 36);
        let all = SpectrumOptions { cutoff: Some(f64::INFINITY), cluster_tol: None };
        let p = C3SpectrumParams { alpha0: a.0, alpha1: a.1, mu, k_max: 12 };
        let h3 = ModulationFunction::Poly { coeffs: vec![0.4, 0.3] };
        let ba = build_bosonized_a(&alg, &f, &h3, 0.5, mu, GDOA_MARGIN).unwrap();
        let ea = closed_form_spectrum_a(&p, &f, &h3).unwrap();
        let ra = spectrum_with_comparison(&ba, &ea, &all, CLOSED_FORM_TOL).unwrap();
        prop_assert!(ra.comparison.as_ref().unwrap().pass, "{:?}", ra.comparison);
        for conv in [BoundaryConvention::ZeroBelowVacuum, BoundaryConvention::Extended] {
            let bb = build_bosonized_b(&alg, &f1, &f2, 0.5, mu, conv, GDOA_MARGIN).unwrap();
            let eb = closed_form_spectrum_b(&p, &f1, &f2, conv).unwrap();
            let rb = spectrum_with_comparison(&bb, &eb, &all, CLOSED_FORM_TOL).unwrap();
            prop_assert!(rb.comparison.as_ref().unwrap().pass, "{:?}", rb.comparison);
        }
    }

    #[test]
    fn spectrum_report_is_well_formed(a in alphas(), f in modulation(), h0 in 0.1..3.0f64) {
        let alg = c3(a, 30);
        let b = build_gdoa_realization_a(&alg, &f, &ModulationFunction::constant(h0), 0.5, GDOA_MARGIN).unwrap();
        let r = spectrum_of(&b, &SpectrumOptions::default()).unwrap();
        prop_assert_eq!(r.levels.iter().map(|l| l.multiplicity).sum::<usize>(), r.retained);
        for w in r.levels.windows(2) {
            prop_assert!(w[1].energy - w[0].energy > r.cluster_tol);
        }
    }
}

proptest! {
    #![proptest_config(fixed_config(6))]

    #[test]
    fn diagonal_pair_removes_h4(slope in 0.5..2.0f64, c in -1.0..1.0f64, d in 0.5..2.0f64) {
        let points = linspace(-1.5, 1.5, 31);
        let spec = DiagonalPairSpec { w_plus: Polynomial::new(vec![0.0, slope]), c, d, base: 0.0 };
        let pair = build_diagonal_pair(&spec, &points).unwrap();
        let s1 = pair.w1.samples(&points).unwrap();
        let s2 = pair.w2.samples(&points).unwrap();
        let regular: Vec<f64> = (0..points.len())
            .filter(|&i| (s1.w[i] - s2.w[i]).abs() >= DEFAULT_DELTA)
            .map(|i| points[i])
            .collect();
        let sol = solve_unequal_case(&pair.w1, &pair.w2, &regular, DEFAULT_DELTA).unwrap();
        prop_assert!(sol.h4_imag.iter().all(|h| h.abs() <= 1e-6));
    }

    #[test]
    fn fixed_unitaries_preserve_spectra(shift in 0.0..1.0f64) {
        let x = Superpotential::poly(vec![shift, 1.0]);
        let b = build_superpotential_realization(
            &x,
            &x,
            &H4Choice::IWPrime,
            &Representation::Fock { dim: 16, margin: None },
            0.5,
        )
        .unwrap();
        let window = match &b.space {
            Space::Fock { window } => *window,
            Space::Grid { .. } => unreachable!(),
        };
        let eig = |m: &BlockOperator| {
            let mut v = hermitian_eigenvalues(&window.compress_blocks(m).flatten(), 1e-9).unwrap();
            v.sort_by(f64::total_cmp);
            v
        };
        let reference = eig(&b.h);
        for u in [u1(), u2(), u3()] {
            let moved = b.conjugated(&u, "moved").unwrap();
            let e = eig(&moved.h);
            for (p, q) in reference.iter().zip(&e) {
                prop_assert!((p - q).abs() <= 1e-10);
            }
        }
    }
}
