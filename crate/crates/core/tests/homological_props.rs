mod common;

use kamtori_core::homological::{build_generator, class_operator, relative_residual, solve_sylvester, DivisorGuard, UClass};
use kamtori_core::linalg::{complex_eigenvalues, j_matrix, multiset_distance, to_complex};
use kamtori_core::model::eigenvalues_of_jm;
use kamtori_core::{Dims, FtSeries};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

const OPEN: DivisorGuard = DivisorGuard { gamma: 0.0, tau: 3.0 };

fn cfg(cases: u32) -> ProptestConfig {
    common::proptest_config(cases)
}

proptest! {
    #![proptest_config(cfg(100))]

    #[test]
    fn residual_vanishes_up_to_expansion_degree(seed in any::<u64>(), d_y in 0u32..4) {
        let mut r = common::rng(seed);
        let d = common::dims(&mut r);
        let nf = common::normal_form(&mut r, d);
        let rhs = common::homological_rhs(&mut r, d, 10, 3);
        // the y-expansion must contract on the norm's own domain, with
        // well-conditioned class operators
        let w = common::weights();
        let g = build_generator(&nf, &rhs, &OPEN, d_y, w.s).unwrap();
        prop_assume!(g.divisor_log.iter().all(|e| e.neumann_ratio <= 0.5 && e.condition <= 1e3));
        let rel = relative_residual(&nf, &rhs, &g.f, d_y, w).unwrap();
        prop_assert!(rel <= 1e-10, "relative residual {rel:e}");
    }

    #[test]
    fn generator_is_linear_in_the_right_hand_side(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let d = common::dims(&mut r);
        let nf = common::normal_form(&mut r, d);
        let a = common::homological_rhs(&mut r, d, 6, 2);
        let b = common::homological_rhs(&mut r, d, 6, 2);
        let w = common::weights();
        let fa = build_generator(&nf, &a, &OPEN, 2, 0.1).unwrap().f;
        let fb = build_generator(&nf, &b, &OPEN, 2, 0.1).unwrap().f;
        let fab = build_generator(&nf, &a.add(&b).unwrap(), &OPEN, 2, 0.1).unwrap().f;
        let diff = fab.sub(&fa.add(&fb).unwrap()).unwrap().majorant_norm(w);
        prop_assert!(diff <= 1e-12 * (1.0 + fab.majorant_norm(w)), "{diff:e}");
    }

    #[test]
    fn real_right_hand_side_gives_real_generator(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let d = common::dims(&mut r);
        let nf = common::normal_form(&mut r, d);
        let rhs = common::homological_rhs(&mut r, d, 8, 3);
        let f = build_generator(&nf, &rhs, &OPEN, 2, 0.1).unwrap().f;
        prop_assert!(f.is_real());
        prop_assert!(f.conjugate_asymmetry() <= 1e-13 * (1.0 + f.majorant_norm(common::weights())));
    }

    #[test]
    fn expansion_ratio_is_at_most_half_under_the_twist_bound(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let d = Dims::new(r.random_range(1..=3), r.random_range(0..=2)).unwrap();
        let nf = common::normal_form(&mut r, d);
        let (gamma, tau, k_cap) = (r.random_range(1e-3..1e-1), 2.0 + r.random_range(0.0..2.0), 3u32);
        let m_star = (0..d.n).map(|j| nf.a.column(j).abs().sum()).fold(0.0, f64::max);
        let s = gamma / (2.0 * m_star * (k_cap as f64).powf(tau + 1.0));
        let keep = |k: &[i32]| {
            let kn: f64 = k.iter().map(|v| v.unsigned_abs() as f64).sum();
            let kw: f64 = k.iter().zip(&nf.omega).map(|(&a, &b)| a as f64 * b).sum();
            kn == 0.0 || (kn <= k_cap as f64 && kw.abs() > gamma / kn.powf(tau))
        };
        let rhs = common::series(&mut r, d, 8, k_cap as i32, 2, true)
            .filter(|idx| idx.u_degree() == 0 && keep(&idx.k) && idx.k_norm() <= k_cap);
        let g = build_generator(&nf, &rhs, &DivisorGuard { gamma, tau }, 2, s).unwrap();
        prop_assert!(g.max_neumann_ratio() <= 0.5, "{}", g.max_neumann_ratio());
    }
}

proptest! {
    #![proptest_config(cfg(100))]

    #[test]
    fn sylvester_matches_entrywise_vectorised_solve(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let cm = |r: &mut rand_chacha::ChaCha8Rng| DMatrix::from_fn(4, 4, |_, _| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
        let m = common::symmetric(&mut r, 4, 2.0);
        let delta0 = Complex64::new(0.0, r.random_range(-3.0..3.0));
        let a = DMatrix::identity(4, 4) * delta0 + to_complex(&(&m * j_matrix(2)));
        let b = -to_complex(&(j_matrix(2) * &m)) + cm(&mut r) * Complex64::new(0.1, 0.0);
        let c = cm(&mut r);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        let y = common::brute_sylvester(&a, &b, &c);
        let scale = 1.0 + y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!((&x - &y).iter().all(|v| v.norm() <= 1e-12 * scale));
        prop_assert!((&a * &x + &x * &b - &c).iter().all(|v| v.norm() <= 1e-12 * scale));
    }
}

fn spectrum_gaps(m: &DMatrix<f64>, delta0: Complex64) -> (f64, f64) {
    let q = m.nrows();
    let d = Dims::new(1, q / 2).unwrap();
    let nf = kamtori_core::model::NormalForm::new(d, 0.0, vec![1.0], DMatrix::identity(1, 1), m.clone(), vec![0]).unwrap();
    let om = eigenvalues_of_jm(m).unwrap().omega;
    let lin: Vec<Complex64> = om.iter().map(|w| delta0 - w).collect();
    let quad: Vec<Complex64> = om.iter().flat_map(|a| om.iter().map(move |b| delta0 - a - b)).collect();
    let got_lin = complex_eigenvalues(&class_operator(UClass::Linear, delta0, &nf)).unwrap();
    let got_quad = complex_eigenvalues(&class_operator(UClass::Quadratic, delta0, &nf)).unwrap();
    let scale = 1.0 + delta0.norm() + om.iter().map(|w| w.norm()).fold(0.0, f64::max);
    (multiset_distance(&got_lin, &lin) / scale, multiset_distance(&got_quad, &quad) / scale)
}

proptest! {
    #![proptest_config(cfg(50))]

    #[test]
    fn class_operator_spectra_are_shifted_normal_frequencies(seed in any::<u64>(), half in 1usize..=2) {
        let mut r = common::rng(seed);
        let m = if r.random_bool(0.5) { common::positive_definite(&mut r, 2 * half) } else { common::symmetric(&mut r, 2 * half, 2.0) };
        let delta0 = Complex64::new(0.0, r.random_range(-3.0..3.0));
        let (lin, quad) = spectrum_gaps(&m, delta0);
        prop_assert!(lin <= 1e-10 && quad <= 1e-10, "{lin:e} {quad:e}");
    }
}

#[test]
fn example_normal_blocks_have_shifted_spectra() {
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3f64.sqrt();
    let blocks = [
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s2, s2])),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s2, s2, s3, s3])),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0, -3.0])),
    ];
    for m in blocks {
        for d0 in [0.7, -1.3, 2.0 + s2] {
            let (lin, quad) = spectrum_gaps(&m, Complex64::new(0.0, d0));
            assert!(lin <= 1e-10 && quad <= 1e-10, "{lin:e} {quad:e}");
        }
    }
}

#[test]
fn zero_right_hand_side_gives_zero_generator() {
    let mut r = common::rng(3);
    let d = Dims::new(2, 1).unwrap();
    let nf = common::normal_form(&mut r, d);
    let g = build_generator(&nf, &FtSeries::zero(d), &OPEN, 2, 0.1).unwrap();
    assert!(g.f.is_empty() && g.remainder.is_empty() && g.divisor_log.is_empty());
}
