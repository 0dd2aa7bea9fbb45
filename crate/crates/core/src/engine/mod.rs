//! One KAM step (truncation, averaging, translation, new normal form) and the
//! iteration driver.

mod chain;

pub use chain::{ChainLink, TransformChain};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::divisors::{melnikov_scan, tail_integral, StepBudget};
use crate::error::KamError;
use crate::homological::{build_generator, DivisorGuard, DivisorLogEntry, Generator};
use crate::model::{gamma_exponent, ModelHamiltonian, NormalForm};
use crate::series::{FtSeries, MultiIndex, NormWeights};

/// Tolerances and switches of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepConfig {
    /// Degree in `y` kept when expanding `1/Δ(y)`.
    pub d_y: u32,
    /// Lie series stops once a term is below `lie_tol` times the next
    /// perturbation scale.
    pub lie_tol: f64,
    pub j_max: usize,
    /// Allowed factor on `eps+ s+^2 gamma+^{4m^2(n+1)}` for the new perturbation.
    pub c_slack: f64,
    /// Terms below `prune_rel` times the next perturbation scale are dropped.
    pub prune_rel: f64,
    /// Upper bound standing in for `<< 1` in H4.
    pub h4_max: f64,
    /// Largest `|k|` enumerated by the per-step Melnikov check.
    pub k_check_cap: u32,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { d_y: 2, lie_tol: 1e-10, j_max: 12, c_slack: 10.0, prune_rel: 1e-12, h4_max: 0.1, k_check_cap: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    fn le(lhs: f64, rhs: f64) -> Self {
        Check { lhs, rhs, pass: lhs <= rhs }
    }

    fn lt(lhs: f64, rhs: f64) -> Self {
        Check { lhs, rhs, pass: lhs < rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepNorms {
    pub p: f64,
    pub r: f64,
    pub tail: f64,
    pub f: f64,
    pub p_plus: f64,
    /// `|P| / (s^2 gamma^{4m^2(n+1)})` at the step weights.
    pub eps_hat: f64,
    /// The same for `P+` at the next weights.
    pub eps_hat_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    pub h1: Check,
    pub h2: Check,
    /// Both inequalities of H3 folded into the larger ratio.
    pub h3: Check,
    pub h4: Check,
}

impl Hypotheses {
    pub fn all_pass(&self) -> bool {
        self.h1.pass && self.h2.pass && self.h3.pass && self.h4.pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Drift {
    pub e: f64,
    pub omega: f64,
    pub a: f64,
    pub m: f64,
    pub y_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub budget: StepBudget,
    pub norms: StepNorms,
    pub hypothesis: Hypotheses,
    pub drift: Drift,
    /// Largest change of a frequency component on the principal minor.
    pub freq_lock: f64,
    pub lie_orders_used: usize,
    pub dropped_tail_norm: f64,
    /// `|P - R| / (eps^2 s^2 gamma^{4m^2(n+1)})`.
    pub tail_constant: f64,
    /// `|w+ - w| / (eps_hat s gamma^{4m^2(n+1)})`.
    pub omega_drift_constant: f64,
    pub k_trunc: u64,
    pub k_solve: u32,
    pub k_check: u32,
    pub melnikov_worst: f64,
    /// `eps_hat+ <= eps_hat^{10/9}`.
    pub contraction: Check,
    /// `|P+| <= c_slack eps+ s+^2 gamma+^{4m^2(n+1)}`.
    pub bound: Check,
    pub neumann_ratio: f64,
    pub terms: usize,
}

/// Result of a successful step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub model: ModelHamiltonian,
    pub generator: Generator,
    pub report: StepReport,
}

/// Below this the next perturbation scale leaves the normal `f64` range
/// with room for a few orders of products.
const MIN_SCALE: f64 = 1e-290;

fn gamma_pow(budget: &StepBudget, gamma: f64) -> f64 {
    gamma.powi(gamma_exponent(budget.dims))
}

/// `R = P` cut at `|k| <= k` and `|l| + |p| <= 2`, the tail `P - R` and its
/// majorant norm at `tail_weights`.
pub fn truncate_remainder(p: &FtSeries, k: u64, tail_weights: NormWeights) -> (FtSeries, FtSeries, f64) {
    let k = k.min(u32::MAX as u64) as u32;
    let r = p.truncate(k, 2);
    let tail = p.filter(|idx| idx.k_norm() > k || idx.degree() > 2);
    let bound = tail.majorant_norm(tail_weights);
    (r, tail, bound)
}

/// Lie series of the transformed perturbation:
/// `Pbar = sum_{j>=1} L^j N / j! + sum_{j>=0} L^j P / j!`, `L G = {G, F}`,
/// so that `H o phi_F^1 = N + Pbar`. Returns `Pbar`, the number of orders
/// used and the pruned norm.
pub fn averaging_transform(
    n: &FtSeries,
    p: &FtSeries,
    f: &FtSeries,
    w: NormWeights,
    stop: f64,
    prune: f64,
    j_max: usize,
) -> Result<(FtSeries, usize, f64), KamError> {
    if f.is_empty() {
        return Ok((p.clone(), 0, 0.0));
    }
    let mut dropped = 0.0;
    let (lp, skipped) = p.poisson_bracket_pruned(f, w, prune)?;
    dropped += skipped;
    let (mut term, d) = n.poisson_bracket(f)?.add(&lp)?.prune(w, prune);
    dropped += d;
    let mut total = p.add(&term)?;
    let mut prev = term.majorant_norm(w);
    let mut used = 1;
    while prev > 0.0 && prev >= stop && used < j_max {
        used += 1;
        let inv = 1.0 / used as f64;
        let (next, skipped) = term.poisson_bracket_pruned(f, w, prune / inv)?;
        dropped += skipped * inv;
        let (next, d) = next.scale(Complex64::new(inv, 0.0)).prune(w, prune);
        dropped += d;
        let norm = next.majorant_norm(w);
        if norm >= prev && norm > stop {
            return Err(KamError::LieDivergence { order: used, norm });
        }
        total = total.add(&next)?;
        term = next;
        prev = norm;
    }
    Ok((total, used, dropped))
}

/// Output of the translation step.
#[derive(Clone, Debug)]
pub struct Translation {
    pub nf: NormalForm,
    pub p: FtSeries,
    pub y_star: Vec<f64>,
}

fn k0(d: crate::series::Dims) -> Vec<i32> {
    vec![0; d.n]
}

/// Reads the new normal form out of `Pbar`, shifts `y` by the solution of
/// `~A Y* = -P010` and returns `P+` with `N + Pbar` (shifted) `= N+ + P+`.
pub fn translation_step(pbar: &FtSeries, nf: &NormalForm) -> Result<Translation, KamError> {
    let d = nf.dims;
    let n = d.n;
    let q = d.normal();
    let zl = vec![0u32; n];
    let zp = vec![0u32; q];
    let re = |idx: MultiIndex| pbar.coeff(&idx).re;

    let p010: Vec<f64> = (0..n)
        .map(|i| {
            let mut l = zl.clone();
            l[i] = 1;
            re(MultiIndex::new(k0(d), l, zp.clone()))
        })
        .collect();
    let mut hess_y = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut l = zl.clone();
            l[i] += 1;
            l[j] += 1;
            let c = re(MultiIndex::new(k0(d), l, zp.clone()));
            if i == j {
                hess_y[(i, i)] = 2.0 * c;
            } else {
                hess_y[(i, j)] = c;
                hess_y[(j, i)] = c;
            }
        }
    }
    let mut hess_u = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let mut p = zp.clone();
            p[a] += 1;
            p[b] += 1;
            let c = re(MultiIndex::new(k0(d), zl.clone(), p));
            if a == b {
                hess_u[(a, a)] = 2.0 * c;
            } else {
                hess_u[(a, b)] = c;
                hess_u[(b, a)] = c;
            }
        }
    }

    let mut y_star = vec![0.0; n];
    if !nf.minor_indices.is_empty() {
        let idx = &nf.minor_indices;
        let minor = nf.minor_matrix();
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| -p010[i]));
        let sol = minor.lu().solve(&rhs).ok_or(KamError::SingularMinor)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(KamError::SingularMinor);
        }
        for (q_, &i) in idx.iter().enumerate() {
            y_star[i] = sol[q_];
        }
    }

    let shifted = pbar.shift_y(&y_star)?;
    let ys = DVector::from_column_slice(&y_star);
    let ay = &nf.a * &ys;
    let w = DVector::from_column_slice(&nf.omega);
    let q000 = shifted.coeff(&MultiIndex::new(k0(d), zl.clone(), zp.clone())).re;
    let e_plus = nf.e + w.dot(&ys) + 0.5 * ys.dot(&ay) + q000;
    let omega_plus: Vec<f64> = (0..n).map(|i| nf.omega[i] + (p010[i] + ay[i])).collect();
    let a_plus = &nf.a + &hess_y;
    let m_plus = &nf.m + &hess_u;

    // P+ = shifted Pbar minus what moved into N+: its constant, the
    // unshifted y-linear part and both Hessians.
    let mut moved = Vec::new();
    moved.push((MultiIndex::new(k0(d), zl.clone(), zp.clone()), Complex64::new(q000, 0.0)));
    for i in 0..n {
        let mut l = zl.clone();
        l[i] = 1;
        moved.push((MultiIndex::new(k0(d), l, zp.clone()), Complex64::new(p010[i], 0.0)));
        for j in i..n {
            let mut l = zl.clone();
            l[i] += 1;
            l[j] += 1;
            let c = if i == j { 0.5 * hess_y[(i, i)] } else { hess_y[(i, j)] };
            moved.push((MultiIndex::new(k0(d), l, zp.clone()), Complex64::new(c, 0.0)));
        }
    }
    for a in 0..q {
        for b in a..q {
            let mut p = zp.clone();
            p[a] += 1;
            p[b] += 1;
            let c = if a == b { 0.5 * hess_u[(a, a)] } else { hess_u[(a, b)] };
            moved.push((MultiIndex::new(k0(d), zl.clone(), p), Complex64::new(c, 0.0)));
        }
    }
    let moved = FtSeries::from_terms(d, moved, true)?;
    // exact zeros left where a moved coefficient is cancelled
    let p_plus = drop_zeros(&shifted.sub(&moved)?);
    let nf_plus = NormalForm::new(d, e_plus, omega_plus, a_plus, m_plus, nf.minor_indices.clone())?;
    Ok(Translation { nf: nf_plus, p: p_plus, y_star })
}

fn drop_zeros(s: &FtSeries) -> FtSeries {
    FtSeries::from_terms(s.dims(), s.terms().into_iter().filter(|(_, c)| c.norm() != 0.0), s.is_real())
        .expect("same dims")
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// One KAM step at the budget's weights `(r, s)` and Diophantine data.
pub fn kam_step(model: &ModelHamiltonian, budget: &StepBudget, cfg: &StepConfig, step: usize) -> Result<StepOutcome, KamError> {
    let d = model.nf.dims;
    let w = NormWeights::new(budget.r, budget.s)?;
    let w_plus = NormWeights::new(budget.r_plus, budget.s_plus)?;
    let gp = gamma_pow(budget, budget.gamma);
    let gp_plus = gamma_pow(budget, budget.gamma_plus);
    let scale_plus = budget.next_perturbation_scale();
    if !(scale_plus > MIN_SCALE) {
        return Err(KamError::ScaleUnderflow { scale: scale_plus });
    }

    let p_norm = model.p.majorant_norm(w);
    let eps_hat = p_norm / (budget.s * budget.s * gp);

    // truncation
    let decay = (budget.r - budget.r_plus) / 8.0;
    let h1 = Check::le(tail_integral(d.n, decay, budget.k_eff as f64), budget.eps);
    let (r, _tail, tail_norm) = truncate_remainder(&model.p, budget.k_eff, w_plus);
    let tail_constant = tail_norm / (budget.eps * budget.eps * budget.s * budget.s * gp);
    if !h1.pass {
        return Err(KamError::Hypothesis { which: "H1", lhs: h1.lhs, rhs: h1.rhs });
    }

    // Melnikov membership at the step's frequencies
    let spectrum = model.nf.spectrum()?;
    let k_check = (budget.k_eff.min(cfg.k_check_cap as u64)) as u32;
    let cert = melnikov_scan(&[], &model.nf.omega, &spectrum.omega, budget.gamma, budget.tau, k_check);
    let melnikov_worst = cert.worst().map(|e| e.margin / e.threshold).unwrap_or(f64::INFINITY);

    // homological equation
    let guard = DivisorGuard { gamma: budget.gamma, tau: budget.tau };
    let k_solve = r.max_k_norm();
    let m_star = (0..d.n).map(|j| nf_col_l1(&model.nf.a, j)).fold(0.0, f64::max);
    let h2 = Check::le(2.0 * m_star * budget.s, budget.gamma / (k_solve.max(1) as f64).powf(budget.tau + 1.0));
    if !h2.pass {
        return Err(KamError::Hypothesis { which: "H2", lhs: h2.lhs, rhs: h2.rhs });
    }
    let mut generator = build_generator(&model.nf, &r, &guard, cfg.d_y, budget.s)?;
    let f_weights = NormWeights::new(budget.r_plus + 0.875 * (budget.r - budget.r_plus), budget.s)?;
    let f_norm = generator.f.majorant_norm(f_weights);
    let gamma_meas = if eps_hat > 0.0 { f_norm / (eps_hat * budget.s * budget.s) } else { 0.0 };
    let h3_lhs = eps_hat * (gamma_meas + 1.0) * budget.s;
    let h3_rhs = (budget.r - budget.r_plus).min(budget.alpha * budget.s) / 8.0;
    let h3 = Check::lt(h3_lhs, h3_rhs).or_zero(eps_hat);
    let h4 = Check::le(eps_hat.powf(2.0 / 9.0) * gamma_meas, cfg.h4_max);
    let hypothesis = Hypotheses { h1, h2, h3, h4 };
    if !h3.pass {
        return Err(KamError::Hypothesis { which: "H3", lhs: h3.lhs, rhs: h3.rhs });
    }
    if !h4.pass {
        return Err(KamError::Hypothesis { which: "H4", lhs: h4.lhs, rhs: h4.rhs });
    }

    // averaging
    let n_series = model.nf.to_series();
    let (pbar, lie_orders_used, dropped) = averaging_transform(
        &n_series,
        &model.p,
        &generator.f,
        w_plus,
        cfg.lie_tol * scale_plus,
        cfg.prune_rel * scale_plus,
        cfg.j_max,
    )?;

    // translation and new normal form
    let tr = translation_step(&pbar, &model.nf)?;
    let (p_plus, d2) = tr.p.prune(w_plus, cfg.prune_rel * scale_plus);
    let dropped_tail_norm = dropped + d2;
    generator.y_star = tr.y_star.clone();

    let p_plus_norm = p_plus.majorant_norm(w_plus);
    let eps_hat_plus = p_plus_norm / (budget.s_plus * budget.s_plus * gp_plus);
    let nf = &model.nf;
    let omega_drift = nf.omega.iter().zip(&tr.nf.omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let freq_lock = nf.minor_indices.iter().map(|&i| (tr.nf.omega[i] - nf.omega[i]).abs()).fold(0.0, f64::max);
    let drift = Drift {
        e: (tr.nf.e - nf.e).abs(),
        omega: omega_drift,
        a: max_abs_diff(&tr.nf.a, &nf.a),
        m: max_abs_diff(&tr.nf.m, &nf.m),
        y_star: tr.y_star.iter().map(|v| v.abs()).fold(0.0, f64::max),
    };
    let drift_scale = eps_hat * budget.s * gp;
    let report = StepReport {
        step,
        budget: budget.clone(),
        norms: StepNorms { p: p_norm, r: r.majorant_norm(w), tail: tail_norm, f: f_norm, p_plus: p_plus_norm, eps_hat, eps_hat_plus },
        hypothesis,
        drift,
        freq_lock,
        lie_orders_used,
        dropped_tail_norm,
        tail_constant: if tail_norm > 0.0 { tail_constant } else { 0.0 },
        omega_drift_constant: if drift_scale > 0.0 { omega_drift / drift_scale } else { 0.0 },
        k_trunc: budget.k_eff,
        k_solve,
        k_check,
        melnikov_worst,
        contraction: Check::le(eps_hat_plus, eps_hat.powf(10.0 / 9.0)),
        bound: Check::le(p_plus_norm, cfg.c_slack * scale_plus),
        neumann_ratio: generator.max_neumann_ratio(),
        terms: p_plus.len(),
    };
    Ok(StepOutcome { model: ModelHamiltonian { nf: tr.nf, p: p_plus, weights: w_plus }, generator, report })
}

impl Check {
    /// With a zero perturbation both sides of H3 vanish; the step is trivially valid.
    fn or_zero(self, eps_hat: f64) -> Self {
        if eps_hat == 0.0 {
            Check { pass: true, ..self }
        } else {
            self
        }
    }
}

fn nf_col_l1(a: &DMatrix<f64>, j: usize) -> f64 {
    a.column(j).iter().map(|v| v.abs()).sum()
}

/// Why an iteration ended.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    Target { eps_hat: f64 },
    /// The parameter left the non-resonant set before step `step`.
    Resonance { step: usize, k: Vec<i32>, l: Vec<i32>, margin: f64, threshold: f64 },
    Failure { step: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct Iteration {
    pub chain: TransformChain,
    pub model: ModelHamiltonian,
    pub reports: Vec<StepReport>,
    pub stop: StopReason,
    /// First error that ended the run, if any.
    pub error: Option<KamError>,
    /// Divisor log of each completed step's generator.
    pub divisor_logs: Vec<Vec<DivisorLogEntry>>,
}

/// Runs up to `steps` KAM steps, checking Melnikov membership before each.
pub fn run_iteration(
    model: ModelHamiltonian,
    initial: StepBudget,
    steps: usize,
    target_eps: f64,
    cfg: &StepConfig,
) -> Iteration {
    let dims = model.nf.dims;
    let mut chain = TransformChain::new(dims);
    let mut reports = Vec::new();
    let mut divisor_logs = Vec::new();
    let mut current = model;
    let mut budget = initial;
    for step in 1..=steps {
        let w = match NormWeights::new(budget.r, budget.s) {
            Ok(w) => w,
            Err(e) => return finish(chain, current, reports, divisor_logs, step, e.into()),
        };
        let eps_hat = current.p.majorant_norm(w) / (budget.s * budget.s * gamma_pow(&budget, budget.gamma));
        if step > 1 && eps_hat <= target_eps && eps_hat > 0.0 {
            return Iteration { chain, model: current, reports, divisor_logs, stop: StopReason::Target { eps_hat }, error: None };
        }
        let spectrum = match current.nf.spectrum() {
            Ok(s) => s,
            Err(e) => return finish(chain, current, reports, divisor_logs, step, e.into()),
        };
        let k_check = (budget.k_eff.min(cfg.k_check_cap as u64)) as u32;
        let cert = melnikov_scan(&[], &current.nf.omega, &spectrum.omega, budget.gamma, budget.tau, k_check);
        if !cert.pass {
            let worst = cert.worst().cloned().expect("failing scan has entries");
            return Iteration {
                chain,
                model: current,
                reports,
                divisor_logs,
                stop: StopReason::Resonance { step, k: worst.k, l: worst.l, margin: worst.margin, threshold: worst.threshold },
                error: None,
            };
        }
        match kam_step(&current, &budget, cfg, step) {
            Ok(out) => {
                divisor_logs.push(out.generator.divisor_log);
                chain.push(out.generator.f, out.generator.y_star);
                reports.push(out.report);
                current = out.model;
            }
            Err(e) => {
                if let KamError::Solve(crate::error::SolveError::ResonantDivisor { k, margin, floor, .. }) = &e {
                    return Iteration {
                        chain,
                        model: current,
                        reports,
                        divisor_logs,
                        stop: StopReason::Resonance { step, k: k.clone(), l: Vec::new(), margin: *margin, threshold: *floor },
                        error: Some(e),
                    };
                }
                return finish(chain, current, reports, divisor_logs, step, e);
            }
        }
        if step < steps {
            budget = match budget.next() {
                Ok(b) => b,
                Err(e) => return finish(chain, current, reports, divisor_logs, step + 1, e.into()),
            };
        }
    }
    Iteration { chain, model: current, reports, divisor_logs, stop: StopReason::Completed, error: None }
}

fn finish(
    chain: TransformChain,
    model: ModelHamiltonian,
    reports: Vec<StepReport>,
    divisor_logs: Vec<Vec<DivisorLogEntry>>,
    step: usize,
    e: KamError,
) -> Iteration {
    Iteration { chain, model, reports, divisor_logs, stop: StopReason::Failure { step, message: e.to_string() }, error: Some(e) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Dims;

    fn ex41_nf(y2: f64) -> NormalForm {
        let d = Dims::new(2, 1).unwrap();
        NormalForm::new(
            d,
            0.0,
            vec![1.0, y2],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            DMatrix::identity(2, 2) * 2f64.sqrt(),
            vec![1],
        )
        .unwrap()
    }

    #[test]
    fn translation_locks_minor_component() {
        let nf = ex41_nf(1.37);
        let d = nf.dims;
        let mut pbar = FtSeries::zero(d);
        pbar.insert(&MultiIndex::new(vec![0, 0], vec![1, 0], vec![0, 0]), Complex64::new(0.3, 0.0)).unwrap();
        pbar.insert(&MultiIndex::new(vec![0, 0], vec![0, 1], vec![0, 0]), Complex64::new(0.5, 0.0)).unwrap();
        let tr = translation_step(&pbar, &nf).unwrap();
        assert_eq!(tr.y_star, vec![0.0, -0.5]);
        assert!((tr.nf.omega[0] - 1.3).abs() < 1e-15);
        assert_eq!(tr.nf.omega[1], 1.37);
        // N + Pbar == N+ + P+ after the shift
        let lhs = nf.to_series().add(&pbar).unwrap().shift_y(&tr.y_star).unwrap();
        let rhs = tr.nf.to_series().add(&tr.p).unwrap();
        assert!(lhs.sub(&rhs).unwrap().majorant_norm(NormWeights::new(1.0, 1.0).unwrap()) < 1e-15);
    }

    #[test]
    fn truncation_of_single_high_mode() {
        let d = Dims::new(2, 1).unwrap();
        let mut p = FtSeries::zero(d);
        let idx = MultiIndex::new(vec![5, 0], vec![0, 0], vec![1, 0]);
        p.insert(&idx, Complex64::new(2.0, 0.0)).unwrap();
        let w = NormWeights::new(0.3, 0.1).unwrap();
        let (r, _, tb) = truncate_remainder(&p, 4, w);
        assert!(r.is_empty());
        assert!((tb - 2.0 * (5.0f64 * 0.3).exp() * 0.1).abs() < 1e-14);
        let (r, _, tb) = truncate_remainder(&p, 5, w);
        assert_eq!(r, p);
        assert_eq!(tb, 0.0);
    }

    #[test]
    fn zero_generator_is_identity() {
        let nf = ex41_nf(1.1);
        let p = FtSeries::real_mode(nf.dims, &MultiIndex::new(vec![1, 0], vec![0, 0], vec![0, 0]), Complex64::new(1.0, 0.0)).unwrap();
        let w = NormWeights::new(0.5, 0.1).unwrap();
        let (pbar, used, _) = averaging_transform(&nf.to_series(), &p, &FtSeries::zero(nf.dims), w, 1e-20, 0.0, 12).unwrap();
        assert_eq!(pbar, p);
        assert_eq!(used, 0);
    }
}
