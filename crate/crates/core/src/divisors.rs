//! Step budgets, Melnikov non-resonance margins and the parameter sweeps
//! built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::ModelError;
use crate::model::{self, central_partial, gamma_exponent, multi_indices_up_to, ParamChart};
use crate::series::{is_canonical_half, l1_ball, l1_shell_count, Dims, FtSeries};

/// Smallest integer `a` with `(10/9)^a > 2`.
pub fn a_star() -> u32 {
    let mut a = 0;
    while (10.0f64 / 9.0).powi(a as i32) <= 2.0 {
        a += 1;
    }
    a
}

/// Per-step constants of the iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepBudget {
    #[serde(skip)]
    pub dims: Dims,
    pub r: f64,
    pub s: f64,
    pub gamma: f64,
    pub eps: f64,
    pub tau: f64,
    pub r0: f64,
    pub gamma0: f64,
    pub r_plus: f64,
    pub s_plus: f64,
    pub gamma_plus: f64,
    pub eps_plus: f64,
    pub alpha: f64,
    pub a_star: u32,
    /// `(floor(ln(1/eps)) + 1)^{a* + 2}`; kept as a float because it is huge.
    pub k_plus: f64,
    /// Cutoff actually used: the smallest `K` whose exponential tail integral
    /// is below `eps`, capped by `k_plus`.
    pub k_eff: u64,
    /// `sum_{0<|k|<=K+} |k|^{tau (n+1) 4m^2 + 4m^2 n} e^{-|k|(r - r+)/8}`;
    /// may be `+inf`.
    pub gamma_sum: f64,
    pub ln_gamma_sum: f64,
    /// Same sum cut at `k_eff`.
    pub gamma_sum_eff: f64,
}

/// Inputs of one budget computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetState {
    pub r: f64,
    pub s: f64,
    pub gamma: f64,
    pub eps: f64,
    pub tau: f64,
    pub r0: f64,
    pub gamma0: f64,
}

pub fn compute_budget(dims: Dims, st: BudgetState) -> Result<StepBudget, ModelError> {
    for (name, v) in [("r", st.r), ("s", st.s), ("gamma", st.gamma), ("eps", st.eps)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(ModelError::Invalid(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !(st.tau > 0.0) {
        return Err(ModelError::Invalid(format!("tau = {} must be positive", st.tau)));
    }
    let a_star = a_star();
    let eps_plus = st.eps.powf(10.0 / 9.0);
    let alpha = st.eps.powf(1.0 / 3.0);
    let r_plus = st.r / 2.0 + st.r0 / 4.0;
    let s_plus = alpha * st.s / 8.0;
    let gamma_plus = st.gamma / 2.0 + st.gamma0 / 4.0;
    let k_plus = ((1.0 / st.eps).ln().floor() + 1.0).powi(a_star as i32 + 2);
    let decay = (st.r - r_plus) / 8.0;
    let k_eff = if decay > 0.0 { tail_cutoff(dims.n, decay, st.eps, k_plus) } else { k_plus.min(u64::MAX as f64) as u64 };
    let power = st.tau * (dims.n as f64 + 1.0) * 4.0 * (dims.m * dims.m) as f64 + 4.0 * (dims.m * dims.m * dims.n) as f64;
    let ln_gamma_sum = ln_shell_sum(dims.n, power, decay, k_plus);
    let ln_eff = ln_shell_sum(dims.n, power, decay, k_eff as f64);
    Ok(StepBudget {
        dims,
        r: st.r,
        s: st.s,
        gamma: st.gamma,
        eps: st.eps,
        tau: st.tau,
        r0: st.r0,
        gamma0: st.gamma0,
        r_plus,
        s_plus,
        gamma_plus,
        eps_plus,
        alpha,
        a_star,
        k_plus,
        k_eff,
        gamma_sum: ln_gamma_sum.exp(),
        ln_gamma_sum,
        gamma_sum_eff: ln_eff.exp(),
    })
}

impl StepBudget {
    pub fn initial(dims: Dims, r0: f64, s0: f64, gamma0: f64, eps0: f64, tau: f64) -> Result<Self, ModelError> {
        compute_budget(dims, BudgetState { r: r0, s: s0, gamma: gamma0, eps: eps0, tau, r0, gamma0 })
    }

    pub fn next(&self) -> Result<Self, ModelError> {
        compute_budget(
            self.dims,
            BudgetState {
                r: self.r_plus,
                s: self.s_plus,
                gamma: self.gamma_plus,
                eps: self.eps_plus,
                tau: self.tau,
                r0: self.r0,
                gamma0: self.gamma0,
            },
        )
    }

    /// `eps s^2 gamma^{4m^2(n+1)}`: the size the perturbation is measured against.
    pub fn perturbation_scale(&self) -> f64 {
        self.eps * self.s * self.s * self.gamma.powi(gamma_exponent(self.dims))
    }

    pub fn next_perturbation_scale(&self) -> f64 {
        self.eps_plus * self.s_plus * self.s_plus * self.gamma_plus.powi(gamma_exponent(self.dims))
    }
}

/// `int_K^inf x^n e^{-a x} dx = e^{-aK} sum_{j=0}^n n!/j! K^j / a^{n-j+1}`.
pub fn tail_integral(n: usize, a: f64, k: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact_ratio = 1.0; // n!/j!, starting at j = n
    for j in (0..=n).rev() {
        sum += fact_ratio * k.powi(j as i32) / a.powi((n - j + 1) as i32);
        fact_ratio *= j as f64;
    }
    (-a * k).exp() * sum
}

fn tail_cutoff(n: usize, a: f64, eps: f64, cap: f64) -> u64 {
    let cap = cap.min(1e15);
    let ok = |k: f64| tail_integral(n, a, k) <= eps;
    let mut hi = 1.0f64;
    while hi < cap && !ok(hi) {
        hi = (hi * 2.0).min(cap);
    }
    if !ok(hi) {
        return cap as u64;
    }
    let mut lo = (hi / 2.0).floor();
    if ok(lo) {
        return lo as u64;
    }
    // invariant: !ok(lo), ok(hi)
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi as u64
}

/// `ln sum_{j=1}^{kmax} N_j j^power e^{-j a}` with `N_j` the `l1` shell count.
/// Shells are summed one by one up to `EXACT_SHELLS` (or twice the peak of
/// the summand); beyond that the summand is smooth and is integrated with
/// Simpson's rule on geometrically growing blocks.
fn ln_shell_sum(n: usize, power: f64, a: f64, kmax: f64) -> f64 {
    const EXACT_SHELLS: f64 = 200_000.0;
    let ln_term = |j: f64| l1_shell_count_ln(n, j) + power * j.ln() - a * j;
    let peak = if a > 0.0 { power / a } else { f64::INFINITY };
    let exact_end = kmax.min(EXACT_SHELLS).min((2.0 * peak + 10.0).max(10.0));
    let mut ln_total = f64::NEG_INFINITY;
    let mut j = 1.0f64;
    while j <= exact_end {
        ln_total = log_add(ln_total, ln_term(j));
        j += 1.0;
    }
    while j <= kmax && ln_total < f64::INFINITY {
        let w = (j / 256.0).floor().max(1.0).min(kmax - j + 1.0);
        let (f0, f1, f2) = (ln_term(j), ln_term(j + w / 2.0), ln_term(j + w));
        let hi = f0.max(f1).max(f2);
        let block = hi + ((w / 6.0) * ((f0 - hi).exp() + 4.0 * (f1 - hi).exp() + (f2 - hi).exp())).ln();
        ln_total = log_add(ln_total, block);
        if j > peak && f0 < ln_total - 40.0 {
            break;
        }
        j += w;
    }
    ln_total
}

/// `ln` of the shell count, extended to non-integer `j` through the
/// polynomial form of the binomials.
fn l1_shell_count_ln(n: usize, j: f64) -> f64 {
    if j.fract() == 0.0 && j < 1e15 {
        return l1_shell_count(n, j as u64).ln();
    }
    let mut total = 0.0;
    for i in 1..=n {
        let mut c = 1.0;
        for t in 0..(i - 1) {
            c *= (j - 1.0 - t as f64) / (t + 1) as f64;
        }
        total += 2f64.powi(i as i32) * crate::series::binomial(n as u64, i as u64) * c;
    }
    total.ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// All `l in Z^{2m}` with `sum |l_j| <= 2`, including `l = 0`.
pub fn l_vectors(normal: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![0; normal]];
    for i in 0..normal {
        for s in [1, -1, 2, -2] {
            let mut l = vec![0; normal];
            l[i] = s;
            out.push(l);
        }
    }
    for i in 0..normal {
        for j in i + 1..normal {
            for (si, sj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let mut l = vec![0; normal];
                l[i] = si;
                l[j] = sj;
                out.push(l);
            }
        }
    }
    out
}

fn l_dot(l: &[i32], omega_n: &[Complex64]) -> Complex64 {
    l.iter().zip(omega_n).map(|(&a, &z)| z * a as f64).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MelnikovEntry {
    pub k: Vec<i32>,
    pub l: Vec<i32>,
    pub margin: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MelnikovCertificate {
    pub lambda: Vec<f64>,
    pub entries: Vec<MelnikovEntry>,
    pub pass: bool,
}

impl MelnikovCertificate {
    /// The entry with the smallest `margin |k|^tau`.
    pub fn worst(&self) -> Option<&MelnikovEntry> {
        self.entries
            .iter()
            .min_by(|a, b| (a.margin / a.threshold).total_cmp(&(b.margin / b.threshold)))
    }
}

/// `|i<k,w> + <l,W>|`.
pub fn margin(k: &[i32], l: &[i32], omega: &[f64], omega_n: &[Complex64]) -> f64 {
    let kw: f64 = k.iter().zip(omega).map(|(&a, &w)| a as f64 * w).sum();
    (Complex64::new(0.0, kw) + l_dot(l, omega_n)).norm()
}

fn k_norm(k: &[i32]) -> f64 {
    k.iter().map(|v| v.unsigned_abs() as f64).sum()
}

/// Every `(k, l)` with `0 < |k| <= K`, `|l| <= 2`. An entry passes when
/// `margin |k|^tau > gamma`.
pub fn melnikov_scan(
    lambda: &[f64],
    omega: &[f64],
    omega_n: &[Complex64],
    gamma: f64,
    tau: f64,
    k_max: u32,
) -> MelnikovCertificate {
    let ls = l_vectors(omega_n.len());
    let mut entries = Vec::new();
    let mut pass = true;
    for k in l1_ball(omega.len(), k_max) {
        let thr = gamma / k_norm(&k).powf(tau);
        for l in &ls {
            let mg = margin(&k, l, omega, omega_n);
            pass &= mg > thr;
            entries.push(MelnikovEntry { k: k.clone(), l: l.clone(), margin: mg, threshold: thr });
        }
    }
    MelnikovCertificate { lambda: lambda.to_vec(), entries, pass }
}

/// Smallest `margin |k|^tau` over the scan together with where it occurs.
/// A point passes the scan at `gamma` iff `gamma_c > gamma`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalGamma {
    pub gamma_c: f64,
    pub worst_margin: f64,
    pub worst_k: Vec<i32>,
    pub worst_l: Vec<i32>,
}

/// Uses `margin(-k, -l) = margin(k, l)` to scan only the canonical half of
/// the `k`-ball.
pub fn critical_gamma(omega: &[f64], omega_n: &[Complex64], tau: f64, k_max: u32) -> CriticalGamma {
    let ls: Vec<(Vec<i32>, Complex64)> = l_vectors(omega_n.len()).into_iter().map(|l| {
        let z = l_dot(&l, omega_n);
        (l, z)
    }).collect();
    let mut best = CriticalGamma { gamma_c: f64::INFINITY, worst_margin: f64::INFINITY, worst_k: vec![], worst_l: vec![] };
    for k in l1_ball(omega.len(), k_max) {
        if !is_canonical_half(&k) {
            continue;
        }
        let kw: f64 = k.iter().zip(omega).map(|(&a, &w)| a as f64 * w).sum();
        let kt = k_norm(&k).powf(tau);
        for (l, z) in &ls {
            let mg = (Complex64::new(0.0, kw) + z).norm();
            let g = mg * kt;
            if g < best.gamma_c {
                best = CriticalGamma { gamma_c: g, worst_margin: mg, worst_k: k.clone(), worst_l: l.clone() };
            }
        }
    }
    best
}

/// Full-ball version of [`critical_gamma`], kept for cross-checking.
pub fn critical_gamma_full(omega: &[f64], omega_n: &[Complex64], tau: f64, k_max: u32) -> f64 {
    let ls = l_vectors(omega_n.len());
    let mut g = f64::INFINITY;
    for k in l1_ball(omega.len(), k_max) {
        let kt = k_norm(&k).powf(tau);
        for l in &ls {
            g = g.min(margin(&k, l, omega, omega_n) * kt);
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: Vec<f64>,
    pub critical: CriticalGamma,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub gammas: Vec<f64>,
    /// Fraction of grid points failing the scan, one per entry of `gammas`.
    pub excluded_fraction: Vec<f64>,
}

impl SweepResult {
    pub fn passes(&self, point: usize, gamma: f64) -> bool {
        self.points[point].critical.gamma_c > gamma
    }

    /// Least-squares slope of `ln fraction` against `ln gamma` over the
    /// entries with a nonzero fraction.
    pub fn log_log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .gammas
            .iter()
            .zip(&self.excluded_fraction)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&g, &f)| (g.ln(), f.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Tangent frequencies and normal spectrum at one chart point.
pub fn frequencies_at(n_full: &FtSeries, chart: &ParamChart, lambda: &[f64]) -> Result<(Vec<f64>, Vec<Complex64>), ModelError> {
    let omega = model::frequency_map(n_full, chart, lambda)?;
    let m = model::normal_hessian_map(n_full, chart, lambda)?;
    let spec = if m.nrows() == 0 { Vec::new() } else { model::eigenvalues_of_jm(&m)?.omega };
    Ok((omega, spec))
}

/// Critical `gamma` at every cell centre of `grid`, and the excluded
/// fraction for each `gamma` in `gammas`. Parallel over grid points.
pub fn surviving_set_sweep(
    n_full: &FtSeries,
    chart: &ParamChart,
    gammas: &[f64],
    tau: f64,
    k_max: u32,
    grid: &[usize],
) -> Result<SweepResult, ModelError> {
    let pts = chart.grid_points_with(grid);
    let points = pts
        .into_par_iter()
        .map(|lambda| {
            let (omega, spec) = frequencies_at(n_full, chart, &lambda)?;
            let critical = critical_gamma(&omega, &spec, tau, k_max);
            Ok(SweepPoint { lambda, critical })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let total = points.len().max(1) as f64;
    let excluded_fraction = gammas
        .iter()
        .map(|&g| points.iter().filter(|p| !(p.critical.gamma_c > g)).count() as f64 / total)
        .collect();
    Ok(SweepResult { points, gammas: gammas.to_vec(), excluded_fraction })
}

/// Divisors `(k, l)` that vanish at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonvanishingReport {
    pub ok: bool,
    pub identically_zero: Vec<(Vec<i32>, Vec<i32>)>,
}

pub fn check_divisors_nonvanishing(
    n_full: &FtSeries,
    chart: &ParamChart,
    k_max: u32,
    grid: &[usize],
) -> Result<NonvanishingReport, ModelError> {
    let pts = chart.grid_points_with(grid);
    let data = pts
        .iter()
        .map(|l| frequencies_at(n_full, chart, l))
        .collect::<Result<Vec<_>, _>>()?;
    let ls = l_vectors(n_full.dims().normal());
    let scale = data
        .iter()
        .flat_map(|(w, s)| w.iter().map(|v| v.abs()).chain(s.iter().map(|z| z.norm())))
        .fold(1.0, f64::max);
    let mut zero = Vec::new();
    for k in l1_ball(n_full.dims().n, k_max) {
        if !is_canonical_half(&k) {
            continue;
        }
        for l in &ls {
            let tol = 1e-12 * scale * (1.0 + k_norm(&k));
            if data.iter().all(|(w, s)| margin(&k, l, w, s) <= tol) {
                zero.push((k.clone(), l.clone()));
            }
        }
    }
    Ok(NonvanishingReport { ok: zero.is_empty(), identically_zero: zero })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaK {
    pub sigma: f64,
    pub k: f64,
    /// Derivative orders of the columns used for `sigma`.
    pub columns: Vec<Vec<u32>>,
    /// `max_{i, |r| <= n-1} |d^r W_i|` over the grid, `r = 0` included.
    pub max_spectrum_derivative: f64,
}

/// `min_{|kappa|_1 = 1} max_i |<b_i, kappa>|` for the columns `b_i` of a
/// square `B`. The inner maximum is `|B^T kappa|_inf`, so the minimum is
/// `1 / |B^{-T}|_{inf -> 1}`, and that operator norm is attained at a sign
/// vector.
pub fn l1_direction_bound(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    let Some(inv) = b.transpose().try_inverse() else {
        return 0.0;
    };
    let mut best = 0.0f64;
    for mask in 0..(1u32 << n) {
        let z = nalgebra::DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
        best = best.max((&inv * z).lp_norm(1));
    }
    if best > 0.0 {
        1.0 / best
    } else {
        0.0
    }
}

/// `K = (4n / sigma) max |d^r W|`.
pub fn cutoff_from_sigma(n: usize, sigma: f64, max_spectrum_derivative: f64) -> f64 {
    4.0 * n as f64 / sigma * max_spectrum_derivative
}

/// Picks `n` derivative columns `d^alpha w`, `|alpha| <= n-1`, maximizing
/// the grid minimum of [`l1_direction_bound`], and derives the cutoff `K`.
pub fn estimate_sigma_and_k(n_full: &FtSeries, chart: &ParamChart, grid: &[usize], h: f64) -> Result<SigmaK, ModelError> {
    let n = n_full.dims().n;
    let order = (n - 1) as u32;
    let alphas = multi_indices_up_to(chart.n0, order);
    let pts = chart.grid_points_with(grid);
    let fw = |l: &[f64]| model::frequency_map(n_full, chart, l).unwrap_or_else(|_| vec![f64::NAN; n]);
    let fs = |l: &[f64]| -> Vec<f64> {
        match frequencies_at(n_full, chart, l) {
            Ok((_, s)) => s.iter().flat_map(|z| [z.re, z.im]).collect(),
            Err(_) => vec![f64::NAN; 2 * n_full.dims().normal()],
        }
    };
    // stencils need room, so pull points in from the boundary
    let clamp = |l: &[f64]| -> Vec<f64> {
        l.iter()
            .zip(&chart.domain)
            .map(|(&v, b)| v.clamp(b[0] + order as f64 * h, b[1] - order as f64 * h))
            .collect()
    };
    let cols: Vec<Vec<Vec<f64>>> = pts
        .iter()
        .map(|l| {
            let l = clamp(l);
            alphas.iter().map(|a| central_partial(&fw, &l, a, h)).collect()
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in combinations(alphas.len(), n) {
        let worst = cols
            .iter()
            .map(|c| {
                let b = DMatrix::from_fn(n, n, |i, j| c[subset[j]][i]);
                l1_direction_bound(&b)
            })
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(v, _)| worst > *v) {
            best = Some((worst, subset));
        }
    }
    let (sigma, subset) = best.ok_or_else(|| ModelError::Invalid("fewer derivative columns than n".into()))?;
    if !(sigma > 1e-12) {
        return Err(ModelError::Invalid(format!("sigma = {sigma:e}: rank condition fails on the grid")));
    }
    let mut max_d = 0.0f64;
    for l in &pts {
        let l = clamp(l);
        for a in &alphas {
            let v = central_partial(&fs, &l, a, h);
            for pair in v.chunks(2) {
                max_d = max_d.max(pair[0].hypot(pair[1]));
            }
        }
    }
    Ok(SigmaK {
        sigma,
        k: cutoff_from_sigma(n, sigma, max_d),
        columns: subset.iter().map(|&i| alphas[i].clone()).collect(),
        max_spectrum_derivative: max_d,
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
