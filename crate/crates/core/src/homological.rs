//! Solving `{N, F} + R - [R] + <p001, u> + <p011 y, u> = 0` for the
//! generator `F`.
//!
//! For `F = f(y, u) e^{i<k,x>}` the bracket acts as `{N, F} = Δ(y) F +
//! <Mu, J d_u f> e^{i<k,x>}` with `Δ(y) = i<k, w + Ay>`. On each class of
//! `u`-monomials this is a constant linear map `S0` plus the scalar
//! multiplier `δ(y) = i<Ak, y>`:
//!
//! * scalar, `f = f(y)`: `S0 = Δ0`
//! * linear, `f = <g, u>`: `S0 = Δ0 I + MJ`
//! * quadratic, `f = u^T X u`: `S0 X = Δ0 X + MJX - XJM`
//!
//! and the equation is solved degree by degree in `y`:
//! `S0 f_j = -r_j - δ f_{j-1}`, stopping at the configured `y`-degree. The
//! part `δ f_top` that is not cancelled is returned as a separate remainder.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::SolveError;
use crate::linalg::{self, CMatrix, CVector};
use crate::model::NormalForm;
use crate::series::{is_canonical_half, Dims, FtSeries, MultiIndex, NormWeights};

/// Polynomial in `y` with vector coefficients, keyed by exponent.
pub type YPoly = BTreeMap<Vec<u32>, CVector>;

/// Diophantine data and the divisor floors derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivisorGuard {
    pub gamma: f64,
    pub tau: f64,
}

impl DivisorGuard {
    fn base(&self, k: &[i32]) -> f64 {
        let kn: f64 = k.iter().map(|v| v.unsigned_abs() as f64).sum();
        self.gamma / kn.powf(self.tau)
    }

    /// `gamma / (2 |k|^tau)`.
    pub fn floor_scalar(&self, k: &[i32]) -> f64 {
        self.base(k) / 2.0
    }

    /// `(gamma / |k|^tau)^{2m}`.
    pub fn floor_vector(&self, k: &[i32], m: usize) -> f64 {
        self.base(k).powi(2 * m as i32)
    }

    /// `(gamma / |k|^tau)^{4m^2}`.
    pub fn floor_matrix(&self, k: &[i32], m: usize) -> f64 {
        self.base(k).powi(4 * (m * m) as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UClass {
    Scalar,
    Linear,
    Quadratic,
}

impl UClass {
    pub fn name(self) -> &'static str {
        match self {
            UClass::Scalar => "scalar",
            UClass::Linear => "linear",
            UClass::Quadratic => "quadratic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivisorLogEntry {
    pub k: Vec<i32>,
    pub class: UClass,
    /// `|Δ0|` for the scalar class, `|det S0|` otherwise.
    pub divisor: f64,
    pub threshold: f64,
    pub condition: f64,
    /// `s |Ak|_1 / |Δ0|`: the geometric ratio of the `y`-expansion on `|y| <= s`.
    pub neumann_ratio: f64,
}

/// The averaging generator of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub f: FtSeries,
    /// Translation of the actions; set by the translation step.
    pub y_star: Vec<f64>,
    pub divisor_log: Vec<DivisorLogEntry>,
    /// `δ f` at the top `y`-degree, left uncancelled by `F`.
    pub remainder: FtSeries,
}

impl Generator {
    pub fn zero(dims: Dims) -> Self {
        Generator {
            f: FtSeries::zero(dims),
            y_star: vec![0.0; dims.n],
            divisor_log: Vec::new(),
            remainder: FtSeries::zero(dims),
        }
    }

    pub fn max_neumann_ratio(&self) -> f64 {
        self.divisor_log.iter().map(|e| e.neumann_ratio).fold(0.0, f64::max)
    }
}

fn i_dot(k: &[i32], v: &[f64]) -> Complex64 {
    Complex64::new(0.0, k.iter().zip(v).map(|(&a, &b)| a as f64 * b).sum())
}

/// `δ(y) = i<Ak, y>` as the coefficient list of `y_1..y_n`.
fn delta_coeffs(k: &[i32], nf: &NormalForm) -> Vec<Complex64> {
    let n = nf.dims.n;
    (0..n)
        .map(|i| Complex64::new(0.0, (0..n).map(|j| nf.a[(i, j)] * k[j] as f64).sum()))
        .collect()
}

fn mj(nf: &NormalForm) -> DMatrix<f64> {
    &nf.m * linalg::j_matrix(nf.dims.m)
}

/// `S0` of the given class at Fourier index `k` (for `Δ0 = i<k,w>`).
pub fn class_operator(class: UClass, delta0: Complex64, nf: &NormalForm) -> CMatrix {
    let q = nf.dims.normal();
    match class {
        UClass::Scalar => CMatrix::from_element(1, 1, delta0),
        UClass::Linear => CMatrix::identity(q, q) * delta0 + linalg::to_complex(&mj(nf)),
        UClass::Quadratic => {
            let a = CMatrix::identity(q, q) * delta0 + linalg::to_complex(&mj(nf));
            let jm = linalg::to_complex(&(linalg::j_matrix(nf.dims.m) * &nf.m));
            let b = -jm;
            sylvester_operator(&a, &b)
        }
    }
}

/// Matrix of `X -> AX + XB` acting on column-major `vec X`:
/// `I ⊗ A + B^T ⊗ I`.
pub fn sylvester_operator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let q = a.nrows();
    let id = CMatrix::identity(q, q);
    linalg::kron(&id, a) + linalg::kron(&b.transpose(), &id)
}

/// Solves `AX + XB = C` through the Kronecker form.
pub fn solve_sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix, SolveError> {
    let op = sylvester_operator(a, b);
    let v = op
        .lu()
        .solve(&linalg::vec_of(c))
        .ok_or_else(|| SolveError::Shape("singular Sylvester operator".into()))?;
    Ok(linalg::unvec(&v, c.nrows(), c.ncols()))
}

fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let hi = sv.iter().copied().fold(0.0, f64::max);
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

struct ClassSolve {
    solution: YPoly,
    leftover: YPoly,
    log: DivisorLogEntry,
}

/// Degree-by-degree solve of `(S0 + δ(y)) f = -r` up to `y`-degree
/// `max(d_y, deg r)`.
fn solve_class(
    k: &[i32],
    class: UClass,
    rhs: &YPoly,
    nf: &NormalForm,
    guard: &DivisorGuard,
    d_y: u32,
    s: f64,
) -> Result<ClassSolve, SolveError> {
    let delta0 = i_dot(k, &nf.omega);
    let s0 = class_operator(class, delta0, nf);
    let m = nf.dims.m;
    let (divisor, threshold) = match class {
        UClass::Scalar => (delta0.norm(), guard.floor_scalar(k)),
        UClass::Linear => (s0.determinant().norm(), guard.floor_vector(k, m)),
        UClass::Quadratic => (s0.determinant().norm(), guard.floor_matrix(k, m)),
    };
    if !(divisor > threshold) {
        return Err(SolveError::ResonantDivisor { k: k.to_vec(), class: class.name(), margin: divisor, floor: threshold });
    }
    let dc = delta_coeffs(k, nf);
    let ak_l1: f64 = dc.iter().map(|c| c.norm()).sum();
    let log = DivisorLogEntry {
        k: k.to_vec(),
        class,
        divisor,
        threshold,
        condition: condition_number(&s0),
        neumann_ratio: s * ak_l1 / delta0.norm(),
    };
    let lu = s0.lu();
    let top = rhs.keys().map(|l| l.iter().sum::<u32>()).max().unwrap_or(0).max(d_y);
    let mut solution = YPoly::new();
    let mut prev = YPoly::new();
    for j in 0..=top {
        let mut level = YPoly::new();
        for (l, v) in rhs.iter().filter(|(l, _)| l.iter().sum::<u32>() == j) {
            level.insert(l.clone(), -v);
        }
        for (l, v) in multiply_delta(&prev, &dc) {
            let e = level.entry(l).or_insert_with(|| CVector::zeros(v.len()));
            *e -= v;
        }
        let mut cur = YPoly::new();
        for (l, v) in level {
            let x = lu.solve(&v).ok_or_else(|| SolveError::Shape("singular class operator".into()))?;
            cur.insert(l, x);
        }
        for (l, v) in &cur {
            solution.insert(l.clone(), v.clone());
        }
        prev = cur;
    }
    let leftover = multiply_delta(&prev, &dc);
    Ok(ClassSolve { solution, leftover, log })
}

fn multiply_delta(p: &YPoly, dc: &[Complex64]) -> YPoly {
    let mut out = YPoly::new();
    for (l, v) in p {
        for (i, &c) in dc.iter().enumerate() {
            if c == Complex64::default() {
                continue;
            }
            let mut l2 = l.clone();
            l2[i] += 1;
            let e = out.entry(l2).or_insert_with(|| CVector::zeros(v.len()));
            *e += v * c;
        }
    }
    out
}

fn check_k(k: &[i32], nf: &NormalForm) -> Result<(), SolveError> {
    if k.len() != nf.dims.n {
        return Err(SolveError::Shape(format!("k has length {}, expected {}", k.len(), nf.dims.n)));
    }
    if k.iter().all(|&v| v == 0) {
        return Err(SolveError::Shape("k = 0 has no small divisor; use solve_zero_mode".into()));
    }
    Ok(())
}

/// `Δ f = -p` for a `y`-polynomial `p`, with `1/Δ` expanded in `y`.
pub fn solve_scalar(
    k: &[i32],
    p: &BTreeMap<Vec<u32>, Complex64>,
    nf: &NormalForm,
    guard: &DivisorGuard,
    d_y: u32,
) -> Result<BTreeMap<Vec<u32>, Complex64>, SolveError> {
    check_k(k, nf)?;
    let rhs: YPoly = p.iter().map(|(l, &c)| (l.clone(), CVector::from_element(1, c))).collect();
    let sol = solve_class(k, UClass::Scalar, &rhs, nf, guard, d_y, 0.0)?;
    Ok(sol.solution.into_iter().map(|(l, v)| (l, v[0])).collect())
}

/// `(Δ I + MJ) f = -p` for a vector `y`-polynomial `p`.
pub fn solve_vector(k: &[i32], p: &YPoly, nf: &NormalForm, guard: &DivisorGuard, d_y: u32) -> Result<YPoly, SolveError> {
    check_k(k, nf)?;
    Ok(solve_class(k, UClass::Linear, p, nf, guard, d_y, 0.0)?.solution)
}

/// `(Δ I + MJ) X - XJM = -P` for a `y`-independent `P`, returning the
/// `y`-polynomial of matrices `X`.
pub fn solve_matrix(
    k: &[i32],
    p: &CMatrix,
    nf: &NormalForm,
    guard: &DivisorGuard,
    d_y: u32,
) -> Result<BTreeMap<Vec<u32>, CMatrix>, SolveError> {
    check_k(k, nf)?;
    let q = nf.dims.normal();
    if p.shape() != (q, q) {
        return Err(SolveError::Shape(format!("P must be {q}x{q}")));
    }
    let mut rhs = YPoly::new();
    rhs.insert(vec![0; nf.dims.n], linalg::vec_of(p));
    let sol = solve_class(k, UClass::Quadratic, &rhs, nf, guard, d_y, 0.0)?;
    Ok(sol.solution.into_iter().map(|(l, v)| (l, linalg::unvec(&v, q, q))).collect())
}

/// `MJ f001 = -p001` and `MJ f011 = -p011` (columns indexed by `y`).
pub fn solve_zero_mode(
    p001: &DVector<f64>,
    p011: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), SolveError> {
    let q = m.nrows();
    if p001.len() != q || p011.nrows() != q {
        return Err(SolveError::Shape("zero-mode data does not match M".into()));
    }
    let mj = m * linalg::j_matrix(q / 2);
    let scale = mj.amax().max(1.0).powi(q as i32);
    if q > 0 && mj.determinant().abs() <= 1e-14 * scale {
        return Err(SolveError::SingularM);
    }
    let lu = mj.lu();
    let f001 = lu.solve(&(-p001)).ok_or(SolveError::SingularM)?;
    let f011 = lu.solve(&(-p011)).ok_or(SolveError::SingularM)?;
    Ok((f001, f011))
}

/// Pieces of one Fourier mode of `R`, split by `u`-class.
#[derive(Default)]
struct ModeData {
    scalar: YPoly,
    linear: YPoly,
    quadratic: YPoly,
}

fn split_modes(r: &FtSeries) -> Result<BTreeMap<Vec<i32>, ModeData>, SolveError> {
    let d = r.dims();
    let q = d.normal();
    let mut modes: BTreeMap<Vec<i32>, ModeData> = BTreeMap::new();
    for (idx, c) in r.terms() {
        if idx.degree() > 2 {
            return Err(SolveError::Shape(format!("R has a term of degree {} > 2", idx.degree())));
        }
        let nonzero: Vec<usize> = (0..q).filter(|&j| idx.p[j] > 0).collect();
        let ud = idx.u_degree();
        let is_zero_k = idx.k.iter().all(|&v| v == 0);
        if is_zero_k && ud != 1 {
            continue; // averaged part, handled by the translation step
        }
        let md = modes.entry(idx.k.clone()).or_default();
        match ud {
            0 => {
                md.scalar.entry(idx.l.clone()).or_insert_with(|| CVector::zeros(1))[0] += c;
            }
            1 => {
                md.linear.entry(idx.l.clone()).or_insert_with(|| CVector::zeros(q))[nonzero[0]] += c;
            }
            _ => {
                let e = md.quadratic.entry(idx.l.clone()).or_insert_with(|| CVector::zeros(q * q));
                if nonzero.len() == 1 {
                    let a = nonzero[0];
                    e[a + a * q] += c;
                } else {
                    let (a, b) = (nonzero[0], nonzero[1]);
                    e[a + b * q] += c * 0.5;
                    e[b + a * q] += c * 0.5;
                }
            }
        }
    }
    Ok(modes)
}

/// Writes a class solution for mode `k` into `out`.
fn emit(out: &mut Vec<(MultiIndex, Complex64)>, k: &[i32], class: UClass, poly: &YPoly, q: usize) {
    for (l, v) in poly {
        match class {
            UClass::Scalar => out.push((MultiIndex::new(k.to_vec(), l.clone(), vec![0; q]), v[0])),
            UClass::Linear => {
                for a in 0..q {
                    let mut p = vec![0; q];
                    p[a] = 1;
                    out.push((MultiIndex::new(k.to_vec(), l.clone(), p), v[a]));
                }
            }
            UClass::Quadratic => {
                for a in 0..q {
                    for b in a..q {
                        let mut p = vec![0; q];
                        p[a] += 1;
                        p[b] += 1;
                        let c = if a == b { v[a + a * q] } else { v[a + b * q] + v[b + a * q] };
                        out.push((MultiIndex::new(k.to_vec(), l.clone(), p), c));
                    }
                }
            }
        }
    }
}

struct ModeSolve {
    terms: Vec<(MultiIndex, Complex64)>,
    leftover: Vec<(MultiIndex, Complex64)>,
    log: Vec<DivisorLogEntry>,
}

fn solve_mode(
    k: &[i32],
    md: &ModeData,
    nf: &NormalForm,
    guard: &DivisorGuard,
    d_y: u32,
    s: f64,
) -> Result<ModeSolve, SolveError> {
    let q = nf.dims.normal();
    let mut out = ModeSolve { terms: Vec::new(), leftover: Vec::new(), log: Vec::new() };
    for (class, rhs) in [(UClass::Scalar, &md.scalar), (UClass::Linear, &md.linear), (UClass::Quadratic, &md.quadratic)] {
        if rhs.is_empty() {
            continue;
        }
        let sol = solve_class(k, class, rhs, nf, guard, d_y, s)?;
        emit(&mut out.terms, k, class, &sol.solution, q);
        emit(&mut out.leftover, k, class, &sol.leftover, q);
        out.log.push(sol.log);
    }
    Ok(out)
}

/// Builds `F` from the truncated perturbation `R`. `s` is only used for the
/// logged expansion ratio.
pub fn build_generator(
    nf: &NormalForm,
    r: &FtSeries,
    guard: &DivisorGuard,
    d_y: u32,
    s: f64,
) -> Result<Generator, SolveError> {
    let d = nf.dims;
    if r.dims() != d {
        return Err(SolveError::Shape("R and N have different dimensions".into()));
    }
    let q = d.normal();
    let real = r.is_real();
    let modes = split_modes(r)?;
    let zero_k = vec![0i32; d.n];
    let mut terms = Vec::new();
    let mut leftover = Vec::new();
    let mut log = Vec::new();

    if let Some(md) = modes.get(&zero_k) {
        let mut p001 = DVector::zeros(q);
        let mut p011 = DMatrix::zeros(q, d.n);
        for (l, v) in &md.linear {
            match l.iter().position(|&e| e == 1) {
                None => p001 += v.map(|c| c.re),
                Some(i) => p011.set_column(i, &(p011.column(i) + v.map(|c| c.re))),
            }
        }
        let (f001, f011) = solve_zero_mode(&p001, &p011, &nf.m)?;
        let mut poly = YPoly::new();
        poly.insert(vec![0u32; d.n], f001.map(|v| Complex64::new(v, 0.0)));
        for i in 0..d.n {
            let mut l = vec![0; d.n];
            l[i] = 1;
            poly.insert(l, f011.column(i).map(|v| Complex64::new(v, 0.0)));
        }
        emit(&mut terms, &zero_k, UClass::Linear, &poly, q);
    }

    let work: Vec<(&Vec<i32>, &ModeData)> = modes
        .iter()
        .filter(|(k, _)| **k != zero_k && (!real || is_canonical_half(k)))
        .collect();
    let solved = work
        .par_iter()
        .map(|(k, md)| solve_mode(k, md, nf, guard, d_y, s))
        .collect::<Result<Vec<_>, _>>()?;
    for ms in solved {
        if real {
            for (idx, c) in &ms.terms {
                let neg = MultiIndex::new(idx.k.iter().map(|v| -v).collect(), idx.l.clone(), idx.p.clone());
                terms.push((neg, c.conj()));
            }
            for (idx, c) in &ms.leftover {
                let neg = MultiIndex::new(idx.k.iter().map(|v| -v).collect(), idx.l.clone(), idx.p.clone());
                leftover.push((neg, c.conj()));
            }
        }
        terms.extend(ms.terms);
        leftover.extend(ms.leftover);
        log.extend(ms.log);
    }
    Ok(Generator {
        f: FtSeries::from_terms(d, terms, real)?,
        y_star: vec![0.0; d.n],
        divisor_log: log,
        remainder: FtSeries::from_terms(d, leftover, real)?,
    })
}

/// The residual `{N, F} + R_{k≠0} + R_{k=0, u-linear}`, split into its part of
/// `y`-degree at most `d_y` and the rest.
pub fn homological_residual(nf: &NormalForm, r: &FtSeries, f: &FtSeries, d_y: u32) -> Result<(FtSeries, FtSeries), SolveError> {
    let target = r.filter(|idx| idx.k.iter().any(|&v| v != 0) || idx.u_degree() == 1);
    let res = nf.to_series().poisson_bracket(f)?.add(&target)?;
    let low = res.filter(|idx| idx.y_degree() <= d_y);
    let high = res.filter(|idx| idx.y_degree() > d_y);
    Ok((low, high))
}

/// Relative size of the low-degree residual at weights `w`.
pub fn relative_residual(nf: &NormalForm, r: &FtSeries, f: &FtSeries, d_y: u32, w: NormWeights) -> Result<f64, SolveError> {
    let (low, _) = homological_residual(nf, r, f, d_y)?;
    let rn = r.majorant_norm(w);
    Ok(if rn > 0.0 { low.majorant_norm(w) / rn } else { low.majorant_norm(w) })
}
