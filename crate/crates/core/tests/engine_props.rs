mod common;

use kamtori_core::divisors::StepBudget;
use kamtori_core::engine::{averaging_transform, run_iteration, StepConfig};
use kamtori_core::homological::{build_generator, DivisorGuard};
use kamtori_core::scenarios::builtin;
use kamtori_core::{Dims, FtSeries};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(common::proptest_config(8))]

    #[test]
    fn locked_frequency_components_do_not_move(seed in any::<u64>(), which in 0usize..2, t in 0.2f64..0.8) {
        let mut sc = builtin(["ex41-line", "ex42-line"][which]).unwrap();
        sc.perturbation.seed = seed;
        sc.perturbation.k_max = 3;
        let lam = vec![1.0 + t];
        let w = sc.initial_weights();
        let model = sc.model_at(&lam, &sc.local_perturbation()).unwrap();
        let minor = model.nf.minor_indices.clone();
        let omega0 = model.nf.omega.clone();
        let b = StepBudget::initial(sc.dims, w.r, w.s, sc.kam.gamma0, sc.kam.eps0, sc.kam.tau).unwrap();
        let it = run_iteration(model, b, 2, 0.0, &StepConfig::default());
        prop_assert_eq!(it.chain.len(), it.reports.len());
        for r in &it.reports {
            prop_assert!(r.freq_lock <= 1e-12 * (1.0 + omega0.iter().map(|v| v.abs()).fold(0.0, f64::max)));
            prop_assert!(r.hypothesis.h3.pass);
        }
        for &i in &minor {
            prop_assert!((it.model.nf.omega[i] - omega0[i]).abs() <= 1e-12);
        }
    }
}

/// `|| N + Pbar - (N + R - R_solved + remainder) ||` with the right-hand side
/// scaled so that the generator has norm `f_size`. `None` when the random
/// normal form has a divisor below the guard.
fn first_order_defect(seed: u64, f_size: f64) -> Option<f64> {
    let mut r = common::rng(seed);
    let d = Dims::new(2, 1).unwrap();
    let nf = common::normal_form(&mut r, d);
    let unit = common::homological_rhs(&mut r, d, 5, 2);
    let w = common::weights();
    let guard = DivisorGuard { gamma: 0.2, tau: 2.0 };
    let g1 = build_generator(&nf, &unit, &guard, 2, w.s).ok()?;
    let eps = f_size / g1.f.majorant_norm(w).max(1e-300);
    let rhs = unit.scale(Complex64::new(eps, 0.0));
    let g = build_generator(&nf, &rhs, &guard, 2, w.s).ok()?;
    let n = nf.to_series();
    let (pbar, _, _) = averaging_transform(&n, &rhs, &g.f, w, 1e-8 * f_size * f_size, 1e-12 * f_size * f_size, 10).unwrap();
    let solved = rhs.filter(|i| i.k_norm() != 0 || i.u_degree() == 1);
    let expected = rhs.sub(&solved).unwrap().add(&g.remainder).unwrap();
    Some(pbar.sub(&expected).unwrap().majorant_norm(w))
}

proptest! {
    #![proptest_config(common::proptest_config(24))]

    #[test]
    fn averaging_leaves_only_second_order_terms(seed in any::<u64>()) {
        let big = first_order_defect(seed, 1e-4);
        prop_assume!(big.is_some());
        let (big, small) = (big.unwrap(), first_order_defect(seed, 1e-5).unwrap());
        prop_assert!(small <= 0.012 * big + 1e-300, "{big:e} {small:e}");
    }

    #[test]
    fn lie_transform_preserves_brackets(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let d = Dims::new(1 + (seed % 2) as usize, 1).unwrap();
        let w = common::weights();
        let zero = FtSeries::zero(d);
        let gen = common::series(&mut r, d, 3, 1, 2, true).scale(Complex64::new(2e-3, 0.0));
        let f = common::series(&mut r, d, 3, 1, 2, true);
        let g = common::series(&mut r, d, 3, 1, 2, true);
        let tf = |x: &FtSeries| averaging_transform(&zero, x, &gen, w, 1e-18 * x.majorant_norm(w), 0.0, 30).unwrap().0;
        let lhs = tf(&f.poisson_bracket(&g).unwrap());
        let rhs = tf(&f).poisson_bracket(&tf(&g)).unwrap();
        let scale = lhs.majorant_norm(w).max(f.majorant_norm(w) * g.majorant_norm(w));
        let diff = lhs.sub(&rhs).unwrap().majorant_norm(w);
        prop_assert!(diff <= 1e-10 * scale.max(f64::MIN_POSITIVE), "{diff:e} vs {scale:e}, gen {:e}", gen.majorant_norm(w));
    }
}
