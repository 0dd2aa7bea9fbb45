//! End-to-end acceptance run: one line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use kamtori_core::divisors::{surviving_set_sweep, StepBudget};
use kamtori_core::engine::{kam_step, run_iteration, truncate_remainder, Iteration, StepConfig};
use kamtori_core::homological::{build_generator, class_operator, relative_residual, solve_sylvester, DivisorGuard, UClass};
use kamtori_core::linalg::{complex_eigenvalues, j_matrix, multiset_distance, to_complex};
use kamtori_core::model::{eigenvalues_of_jm, ModelHamiltonian, NormalForm};
use kamtori_core::scenarios::{builtin, check_conditions, Scenario};
use kamtori_core::verifier::{verify_torus, VerifyConfig};
use kamtori_core::{Dims, FtSeries};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

const GOLDEN: f64 = 1.618034;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn budget(sc: &Scenario) -> StepBudget {
    let w = sc.initial_weights();
    StepBudget::initial(sc.dims, w.r, w.s, sc.kam.gamma0, sc.kam.eps0, sc.kam.tau).unwrap()
}

fn lambda(sc: &Scenario) -> Vec<f64> {
    if sc.chart.n0 == 2 {
        vec![GOLDEN, 1.41421]
    } else {
        vec![GOLDEN]
    }
}

fn model(sc: &Scenario) -> ModelHamiltonian {
    sc.model_at(&lambda(sc), &sc.local_perturbation()).unwrap()
}

fn iterate(name: &str, steps: usize) -> (Scenario, ModelHamiltonian, Iteration) {
    let sc = builtin(name).unwrap();
    let m = model(&sc);
    let it = run_iteration(m.clone(), budget(&sc), steps, 0.0, &StepConfig::default());
    (sc, m, it)
}

fn residual() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut notes = Vec::new();
    for name in ["ex41-line", "ex42-line", "ex43"] {
        let mut sc = builtin(name).unwrap();
        sc.perturbation.k_max = 8;
        sc.perturbation.amplitude = Some(1e-6);
        let t = Instant::now();
        let m = model(&sc);
        let (r, _, _) = truncate_remainder(&m.p, 8, m.weights);
        let guard = DivisorGuard { gamma: sc.kam.gamma0, tau: sc.kam.tau };
        let built = build_generator(&m.nf, &r, &guard, 2, m.weights.s)
            .or_else(|_| build_generator(&m.nf, &r, &DivisorGuard { gamma: 0.0, ..guard }, 2, m.weights.s));
        match built {
            Ok(g) => {
                let rel = relative_residual(&m.nf, &r, &g.f, 2, m.weights).unwrap();
                worst = worst.max(rel);
                notes.push(format!("{name} {rel:.1e}"));
            }
            Err(e) => {
                worst = f64::INFINITY;
                notes.push(format!("{name} error: {e}"));
            }
        }
        slowest = slowest.max(t.elapsed());
    }
    outcome(worst <= 1e-10 && slowest < Duration::from_secs(10), format!("{}; slowest {:.2?}", notes.join(", "), slowest))
}

fn fixed_point() -> Outcome {
    let mut bad = Vec::new();
    for name in ["ex41-line", "ex42-line", "ex43"] {
        let sc = builtin(name).unwrap();
        let m = sc.model_at(&lambda(&sc), &FtSeries::zero(sc.dims)).unwrap();
        let m = ModelHamiltonian { p: FtSeries::zero(sc.dims), ..m };
        match kam_step(&m, &budget(&sc), &StepConfig::default(), 1) {
            Ok(out) => {
                let same = out.model.nf == m.nf;
                if !(out.generator.f.is_empty() && out.generator.y_star.iter().all(|v| *v == 0.0) && same && out.model.p.is_empty()) {
                    bad.push(name);
                }
            }
            Err(_) => bad.push(name),
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "F = 0, y* = 0, N+ = N, P+ = 0 on all examples".into() } else { format!("differs on {bad:?}") })
}

fn frequency_lock(runs: &[(Scenario, ModelHamiltonian, Iteration)]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (sc, m0, it) in runs {
        let drift = m0
            .nf
            .minor_indices
            .iter()
            .map(|&i| (it.model.nf.omega[i] - m0.nf.omega[i]).abs())
            .fold(0.0, f64::max);
        let per_step = it.reports.iter().map(|r| r.freq_lock).fold(0.0, f64::max);
        let worst = drift.max(per_step);
        pass &= worst <= 1e-12 && it.reports.len() == 4;
        notes.push(format!("{} locked {:?} over {} steps: {:.1e}", sc.name, m0.nf.minor_indices.iter().map(|i| i + 1).collect::<Vec<_>>(), it.reports.len(), worst));
    }
    outcome(pass, notes.join("; "))
}

fn contraction(runs: &[(Scenario, ModelHamiltonian, Iteration)]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (sc, _, it) in runs {
        let mut run = 0usize;
        let mut best = 0usize;
        let mut failed = Vec::new();
        for r in &it.reports {
            if !r.hypothesis.all_pass() {
                run = 0;
                continue;
            }
            if r.contraction.pass {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
                failed.push(format!("step {} {:.2e} > {:.2e}", r.step, r.contraction.lhs, r.contraction.rhs));
            }
        }
        pass &= failed.is_empty() && best >= 3;
        notes.push(if failed.is_empty() {
            format!("{}: {best} consecutive", sc.name)
        } else {
            format!("{}: {}", sc.name, failed.join(", "))
        });
    }
    outcome(pass, notes.join("; "))
}

fn kronecker() -> Outcome {
    let mut r = common::rng(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = common::symmetric(&mut r, 4, 2.0);
        let d0 = Complex64::new(0.0, r.random_range(-3.0..3.0));
        let a = DMatrix::identity(4, 4) * d0 + to_complex(&(&m * j_matrix(2)));
        let mut cm = || DMatrix::from_fn(4, 4, |_, _| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
        let b = -to_complex(&(j_matrix(2) * &m)) + cm() * Complex64::new(0.1, 0.0);
        let c = cm();
        let x = solve_sylvester(&a, &b, &c).unwrap();
        let y = common::brute_sylvester(&a, &b, &c);
        let scale = 1.0 + y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst = worst.max((&x - &y).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale);
        worst = worst.max((&a * &x + &x * &b - &c).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale);
    }
    outcome(worst <= 1e-12, format!("100 instances, max relative gap {worst:.1e}"))
}

fn spectrum_gap(m: &DMatrix<f64>, d0: Complex64) -> f64 {
    let d = Dims::new(1, m.nrows() / 2).unwrap();
    let nf = NormalForm::new(d, 0.0, vec![1.0], DMatrix::identity(1, 1), m.clone(), vec![0]).unwrap();
    let om = eigenvalues_of_jm(m).unwrap().omega;
    let lin: Vec<Complex64> = om.iter().map(|w| d0 - w).collect();
    let quad: Vec<Complex64> = om.iter().flat_map(|a| om.iter().map(move |b| d0 - a - b)).collect();
    let scale = 1.0 + d0.norm() + om.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let gl = multiset_distance(&complex_eigenvalues(&class_operator(UClass::Linear, d0, &nf)).unwrap(), &lin);
    let gq = multiset_distance(&complex_eigenvalues(&class_operator(UClass::Quadratic, d0, &nf)).unwrap(), &quad);
    gl.max(gq) / scale
}

fn spectra() -> Outcome {
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3f64.sqrt();
    let mut mats = vec![
        DMatrix::from_diagonal(&DVector::from_vec(vec![s2, s2])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![s2, s2, s3, s3])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, -3.0])),
    ];
    let mut r = common::rng(5);
    for i in 0..50 {
        let q = if i % 2 == 0 { 2 } else { 4 };
        mats.push(if i % 3 == 0 { common::symmetric(&mut r, q, 2.0) } else { common::positive_definite(&mut r, q) });
    }
    let mut worst = 0.0f64;
    for m in &mats {
        for d0 in [0.7, -1.3, 2.0 + s2] {
            worst = worst.max(spectrum_gap(m, Complex64::new(0.0, d0)));
        }
    }
    outcome(worst <= 1e-10, format!("{} matrices, max relative gap {worst:.1e}", mats.len()))
}

/// Perpendicular RMS distance of points from their best-fit line.
fn line_spread(pts: &[Vec<f64>]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let small = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    (small.max(0.0) / n).sqrt()
}

fn measure() -> Outcome {
    let sc = builtin("ex41-line").unwrap();
    let gammas = [1e-2, 1e-3, 1e-4, 1e-5];
    let sw = surviving_set_sweep(&sc.n_full, &sc.chart, &gammas, sc.kam.tau, 8, &[10_000]).unwrap();
    let f = &sw.excluded_fraction;
    let monotone = f.windows(2).all(|w| w[0] > w[1] || (w[0] == 0.0 && w[1] == 0.0));
    let c = f[0] / gammas[0];
    let bounded = f.iter().zip(&gammas).all(|(fr, g)| *fr <= c * g * (1.0 + 1e-12));

    let sc3 = builtin("ex43").unwrap();
    let grid = [100, 100];
    let spacing = 1.0 / 100.0;
    let g3 = 0.1;
    let sw3 = surviving_set_sweep(&sc3.n_full, &sc3.chart, &[g3], sc3.kam.tau, 4, &grid).unwrap();
    let mut groups: std::collections::BTreeMap<(Vec<i32>, Vec<i32>), Vec<Vec<f64>>> = Default::default();
    for (i, p) in sw3.points.iter().enumerate() {
        if !sw3.passes(i, g3) {
            let key = (p.critical.worst_k.clone(), p.critical.worst_l.clone());
            groups.entry(key).or_default().push(p.lambda.clone());
        }
    }
    let (mut lines, mut worst) = (0usize, 0.0f64);
    for pts in groups.values().filter(|v| v.len() >= 3) {
        lines += 1;
        worst = worst.max(line_spread(pts));
    }
    let collinear = lines >= 2 && worst <= 2.0 * spacing;
    outcome(
        monotone && bounded && collinear,
        format!(
            "excluded {:?}, C = {c:.3}; ex43: {lines} resonance groups, max spread {worst:.1e} (grid step {spacing:.1e})",
            f.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn torus() -> Outcome {
    let t = Instant::now();
    let (sc, m0, it) = iterate("ex41-line", 3);
    let h0 = sc.local_hamiltonian(&lambda(&sc), &sc.local_perturbation()).unwrap();
    let cfg = VerifyConfig { samples: 10, t_end: 100.0, tol: 1e-10, dt: 0.5, ..VerifyConfig::default() };
    let v = verify_torus(&it.chain, &h0, &cfg).unwrap();
    let rot_gap = (v.rotation_estimate[1] - m0.nf.omega[1]).abs();
    let ok41 = it.chain.len() == 3 && v.max_deviation <= 1e-5 && rot_gap <= 1e-6;

    let mut sc3 = builtin("ex43").unwrap();
    sc3.perturbation.k_max = 2;
    let p3 = sc3.local_perturbation();
    let m3 = sc3.model_at(&lambda(&sc3), &p3).unwrap();
    let it3 = run_iteration(m3, budget(&sc3), 1, 0.0, &StepConfig::default());
    let h3 = sc3.local_hamiltonian(&lambda(&sc3), &p3).unwrap();
    let cfg3 = VerifyConfig { samples: 10, t_end: 5.0, tol: 1e-10, dt: 0.1, ..VerifyConfig::default() };
    let v3 = verify_torus(&it3.chain, &h3, &cfg3).unwrap();
    let ok43 = !it3.chain.is_empty() && v3.max_deviation <= 1e-4;
    let el = t.elapsed();
    outcome(
        ok41 && ok43 && el < Duration::from_secs(120),
        format!(
            "ex41: {} links, deviation {:.1e}, |rot2 - w2| {rot_gap:.1e}; ex43: {} links, deviation {:.1e}; {el:.1?}",
            it.chain.len(),
            v.max_deviation,
            it3.chain.len(),
            v3.max_deviation
        ),
    )
}

fn conditions() -> Outcome {
    let variants = [
        "ex41-line",
        "ex41-line,a2=0",
        "ex41-line,a1=0.5,a2=2",
        "ex41-parabola",
        "ex41-parabola,a2=0",
        "ex42-line",
        "ex42-line,a1=0",
        "ex42-line,a2=0",
        "ex42-parabola",
        "ex42-parabola,a1=0",
        "ex43",
        "ex43,a=2",
    ];
    let mut bad = Vec::new();
    for v in variants {
        let sc = builtin(v).unwrap();
        let sample = vec![5; sc.chart.n0];
        match check_conditions(&sc, &sample) {
            Ok(rep) if rep.matches(sc.expect.as_ref()) == Some(true) => {}
            Ok(rep) => bad.push(format!("{v}: derived {:?}", rep.derived)),
            Err(e) => bad.push(format!("{v}: {e}")),
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { format!("{} variants match", variants.len()) } else { bad.join("; ") })
}

fn algebra() -> Outcome {
    let w = common::weights();
    let norm = |s: &FtSeries| s.majorant_norm(w);
    let mut fails = [0usize; 5];
    for case in 0..200u64 {
        let mut r = common::rng(1000 + case);
        let d = common::dims(&mut r);
        let f = common::series(&mut r, d, 5, 3, 3, true);
        let g = common::series(&mut r, d, 5, 3, 3, true);
        let h = common::series(&mut r, d, 4, 2, 2, true);
        let fg = f.poisson_bracket(&g).unwrap();
        if norm(&fg.add(&g.poisson_bracket(&f).unwrap()).unwrap()) > 1e-12 * norm(&fg).max(f64::MIN_POSITIVE) {
            fails[0] += 1;
        }
        let (f2, g2) = (f.truncate(3, 2), g.truncate(3, 2));
        let a = f2.poisson_bracket(&g2.poisson_bracket(&h).unwrap()).unwrap();
        let b = g2.poisson_bracket(&h.poisson_bracket(&f2).unwrap()).unwrap();
        let c = h.poisson_bracket(&f2.poisson_bracket(&g2).unwrap()).unwrap();
        let jac = norm(&a.add(&b).unwrap().add(&c).unwrap());
        if jac > 1e-10 * (norm(&a) + norm(&b) + norm(&c)).max(f64::MIN_POSITIVE) {
            fails[1] += 1;
        }
        let lhs = f2.poisson_bracket(&g2.multiply(&h).unwrap()).unwrap();
        let rhs = f2.poisson_bracket(&g2).unwrap().multiply(&h).unwrap().add(&g2.multiply(&f2.poisson_bracket(&h).unwrap()).unwrap()).unwrap();
        if norm(&lhs.sub(&rhs).unwrap()) > 1e-12 * norm(&lhs).max(norm(&rhs)).max(f64::MIN_POSITIVE) {
            fails[2] += 1;
        }
        let prod = f.multiply(&g).unwrap();
        if norm(&prod) > norm(&f) * norm(&g) * (1.0 + 1e-12) {
            fails[3] += 1;
        }
        let real = [f.add(&g).unwrap(), prod, fg];
        if real.iter().any(|s| !s.is_real() || s.conjugate_asymmetry() > 1e-14 * (1.0 + norm(s))) {
            fails[4] += 1;
        }
    }
    let names = ["antisymmetry", "Jacobi", "Leibniz", "submultiplicativity", "reality"];
    let detail = names.iter().zip(&fails).map(|(n, f)| format!("{n} {}/200", 200 - f)).collect::<Vec<_>>().join(", ");
    outcome(fails.iter().all(|&f| f == 0), detail)
}

fn main() {
    let lock_runs = vec![iterate("ex41-line", 4), iterate("ex42-line", 4)];
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("homological residual", Box::new(residual)),
        ("zero-perturbation fixed point", Box::new(fixed_point)),
        ("frequency lock", Box::new(|| frequency_lock(&lock_runs))),
        ("contraction", Box::new(|| contraction(&lock_runs))),
        ("Kronecker solve", Box::new(kronecker)),
        ("spectrum identities", Box::new(spectra)),
        ("measure scaling", Box::new(measure)),
        ("torus verification", Box::new(torus)),
        ("condition claims", Box::new(conditions)),
        ("algebra property suite", Box::new(algebra)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<30} {} ({:.1?}): {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, t.elapsed(), o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
