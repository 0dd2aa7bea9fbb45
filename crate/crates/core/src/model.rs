//! Normal forms `e + <w,y> + 1/2 <Ay,y> + 1/2 <Mu,u>`, parameter charts and
//! the nondegeneracy checks run on them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg;
use crate::poly::{chart_names, parse_poly, Poly};
use crate::series::{Dims, FtSeries, MultiIndex, NormWeights, Var};

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;
/// Symmetry tolerance for `A` and `M`.
pub const SYM_TOL: f64 = 1e-12;

/// Initial scales of an iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KamParams {
    pub eps0: f64,
    pub gamma0: f64,
    pub tau: f64,
    pub r0: f64,
}

impl Default for KamParams {
    fn default() -> Self {
        KamParams { eps0: 1e-8, gamma0: 0.05, tau: 3.0, r0: 0.5 }
    }
}

impl KamParams {
    /// `s0 = eps0 * gamma0^{4 m^2 (n + 1)}`.
    pub fn s0(&self, dims: Dims) -> f64 {
        self.eps0 * self.gamma0.powi(gamma_exponent(dims))
    }
}

/// The exponent `4 m^2 (n + 1)` used throughout the scale bookkeeping.
pub fn gamma_exponent(dims: Dims) -> i32 {
    (4 * dims.m * dims.m * (dims.n + 1)) as i32
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub dims: Dims,
    pub e: f64,
    pub omega: Vec<f64>,
    pub a: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// Zero-based, increasing.
    pub minor_indices: Vec<usize>,
}

impl NormalForm {
    pub fn new(
        dims: Dims,
        e: f64,
        omega: Vec<f64>,
        a: DMatrix<f64>,
        m: DMatrix<f64>,
        minor_indices: Vec<usize>,
    ) -> Result<Self, ModelError> {
        if omega.len() != dims.n || a.shape() != (dims.n, dims.n) || m.shape() != (dims.normal(), dims.normal()) {
            return Err(ModelError::Invalid("normal form shapes do not match dims".into()));
        }
        for mat in [&a, &m] {
            let asym = linalg::asymmetry(mat);
            if asym > SYM_TOL * (1.0 + mat.amax()) {
                return Err(ModelError::NotSymmetric(asym));
            }
        }
        if minor_indices.windows(2).any(|w| w[0] >= w[1]) || minor_indices.iter().any(|&i| i >= dims.n) {
            return Err(ModelError::Invalid(format!("bad minor indices {minor_indices:?}")));
        }
        Ok(NormalForm { dims, e, omega, a, m, minor_indices })
    }

    /// `A` restricted to the minor rows and columns.
    pub fn minor_matrix(&self) -> DMatrix<f64> {
        linalg::principal_minor(&self.a, &self.minor_indices)
    }

    pub fn spectrum(&self) -> Result<Spectrum, ModelError> {
        eigenvalues_of_jm(&self.m)
    }

    /// `N` as a `k = 0` series.
    pub fn to_series(&self) -> FtSeries {
        let d = self.dims;
        let mut terms = Vec::new();
        let zk = vec![0i32; d.n];
        let zl = vec![0u32; d.n];
        let zp = vec![0u32; d.normal()];
        let c = |v: f64| Complex64::new(v, 0.0);
        terms.push((MultiIndex::new(zk.clone(), zl.clone(), zp.clone()), c(self.e)));
        for i in 0..d.n {
            let mut l = zl.clone();
            l[i] = 1;
            terms.push((MultiIndex::new(zk.clone(), l, zp.clone()), c(self.omega[i])));
            for j in i..d.n {
                let mut l = zl.clone();
                l[i] += 1;
                l[j] += 1;
                let v = if i == j { 0.5 * self.a[(i, i)] } else { self.a[(i, j)] };
                terms.push((MultiIndex::new(zk.clone(), l, zp.clone()), c(v)));
            }
        }
        for i in 0..d.normal() {
            for j in i..d.normal() {
                let mut p = zp.clone();
                p[i] += 1;
                p[j] += 1;
                let v = if i == j { 0.5 * self.m[(i, i)] } else { self.m[(i, j)] };
                terms.push((MultiIndex::new(zk.clone(), zl.clone(), p), c(v)));
            }
        }
        FtSeries::from_terms(d, terms, true).expect("degrees within range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumClass {
    Elliptic,
    Hyperbolic,
    Mixed,
}

/// Eigenvalues of `JM`, sorted by real part then imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<Complex64>,
}

impl Spectrum {
    /// Elliptic if every eigenvalue is imaginary, hyperbolic if every one is
    /// real, mixed otherwise (including `m = 0`).
    pub fn classify(&self, tol: f64) -> SpectrumClass {
        let imag = self.omega.iter().all(|z| z.re.abs() <= tol);
        let real = self.omega.iter().all(|z| z.im.abs() <= tol);
        match (imag, real, self.omega.is_empty()) {
            (_, _, true) => SpectrumClass::Mixed,
            (true, false, _) => SpectrumClass::Elliptic,
            (false, true, _) => SpectrumClass::Hyperbolic,
            _ => SpectrumClass::Mixed,
        }
    }

    pub fn min_abs(&self) -> f64 {
        self.omega.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Parts below this fraction of the spectral radius are set to zero so that
/// purely real or purely imaginary spectra come out exactly so.
const SNAP_TOL: f64 = 1e-13;

pub fn eigenvalues_of_jm(m: &DMatrix<f64>) -> Result<Spectrum, ModelError> {
    if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
        return Err(ModelError::Invalid(format!("M must be 2m x 2m, got {:?}", m.shape())));
    }
    let asym = linalg::asymmetry(m);
    if asym > SYM_TOL * (1.0 + m.amax()) {
        return Err(ModelError::NotSymmetric(asym));
    }
    let jm = linalg::j_matrix(m.nrows() / 2) * m;
    let mut ev = linalg::eigenvalues(&jm);
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(ModelError::Eigen("non-finite eigenvalue".into()));
    }
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in &mut ev {
        if z.re.abs() <= SNAP_TOL * radius {
            z.re = 0.0;
        }
        if z.im.abs() <= SNAP_TOL * radius {
            z.im = 0.0;
        }
    }
    linalg::sort_canonical(&mut ev, 1e-12 * (1.0 + radius));
    Ok(Spectrum { omega: ev })
}

/// A polynomial chart `lambda -> y(lambda)` over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamChart {
    pub n0: usize,
    pub domain: Vec<[f64; 2]>,
    pub map: Vec<Poly>,
    pub grid: Vec<usize>,
}

impl ParamChart {
    pub fn new(domain: Vec<[f64; 2]>, map: Vec<Poly>, grid: Vec<usize>) -> Result<Self, ModelError> {
        let n0 = domain.len();
        if n0 == 0 || grid.len() != n0 || map.iter().any(|p| p.nvars() != n0) {
            return Err(ModelError::Invalid("chart domain, grid and map disagree on dimension".into()));
        }
        if domain.iter().any(|b| !(b[0] < b[1])) {
            return Err(ModelError::Invalid("empty chart domain".into()));
        }
        Ok(ParamChart { n0, domain, map, grid })
    }

    /// Parses each `y_i` expression in the variables `l1..l{n0}`.
    pub fn parse(domain: Vec<[f64; 2]>, exprs: &[String], grid: Vec<usize>) -> Result<Self, ModelError> {
        let names = chart_names(domain.len());
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let map = exprs.iter().map(|e| parse_poly(e, &refs)).collect::<Result<Vec<_>, _>>()?;
        Self::new(domain, map, grid)
    }

    pub fn map_exprs(&self) -> Vec<String> {
        let names = chart_names(self.n0);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.map.iter().map(|p| p.to_expr(&refs)).collect()
    }

    pub fn eval(&self, lambda: &[f64]) -> Vec<f64> {
        self.map.iter().map(|p| p.eval(lambda)).collect()
    }

    pub fn contains(&self, lambda: &[f64]) -> bool {
        lambda.len() == self.n0
            && lambda
                .iter()
                .zip(&self.domain)
                .all(|(&l, b)| l >= b[0] - 1e-12 && l <= b[1] + 1e-12)
    }

    /// Distance from `lambda` to the boundary of the box.
    pub fn boundary_margin(&self, lambda: &[f64]) -> f64 {
        lambda
            .iter()
            .zip(&self.domain)
            .map(|(&l, b)| (l - b[0]).min(b[1] - l))
            .fold(f64::INFINITY, f64::min)
    }

    /// Cell-centred grid points, last axis fastest, with the given
    /// per-axis resolution.
    pub fn grid_points_with(&self, grid: &[usize]) -> Vec<Vec<f64>> {
        let total: usize = grid.iter().product();
        (0..total)
            .map(|mut flat| {
                let mut pt = vec![0.0; self.n0];
                for ax in (0..self.n0).rev() {
                    let j = flat % grid[ax];
                    flat /= grid[ax];
                    let [lo, hi] = self.domain[ax];
                    pt[ax] = lo + (j as f64 + 0.5) * (hi - lo) / grid[ax] as f64;
                }
                pt
            })
            .collect()
    }

    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        self.grid_points_with(&self.grid)
    }
}

/// Normal form plus perturbation on the complex domain `D(r, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelHamiltonian {
    pub nf: NormalForm,
    pub p: FtSeries,
    pub weights: NormWeights,
}

impl ModelHamiltonian {
    pub fn hamiltonian(&self) -> FtSeries {
        self.nf.to_series().add(&self.p).expect("same dims")
    }
}

/// `(e, w, A, M)` of a `k = 0` series read from its degree <= 2 part.
struct Taylor2 {
    e: f64,
    omega: Vec<f64>,
    a: DMatrix<f64>,
    m: DMatrix<f64>,
    /// Largest coefficient of a `u`-linear or `y u` term.
    mixed: f64,
}

fn taylor2(s: &FtSeries) -> Taylor2 {
    let d = s.dims();
    let mut t = Taylor2 {
        e: 0.0,
        omega: vec![0.0; d.n],
        a: DMatrix::zeros(d.n, d.n),
        m: DMatrix::zeros(d.normal(), d.normal()),
        mixed: 0.0,
    };
    for (idx, c) in s.terms() {
        if idx.k.iter().any(|&k| k != 0) || idx.degree() > 2 {
            continue;
        }
        let ys: Vec<usize> = idx.l.iter().enumerate().flat_map(|(i, &l)| std::iter::repeat_n(i, l as usize)).collect();
        let us: Vec<usize> = idx.p.iter().enumerate().flat_map(|(i, &p)| std::iter::repeat_n(i, p as usize)).collect();
        let v = c.re;
        match (ys.len(), us.len()) {
            (0, 0) => t.e = v,
            (1, 0) => t.omega[ys[0]] = v,
            (2, 0) => {
                let (i, j) = (ys[0], ys[1]);
                if i == j {
                    t.a[(i, i)] = 2.0 * v;
                } else {
                    t.a[(i, j)] = v;
                    t.a[(j, i)] = v;
                }
            }
            (0, 2) => {
                let (i, j) = (us[0], us[1]);
                if i == j {
                    t.m[(i, i)] = 2.0 * v;
                } else {
                    t.m[(i, j)] = v;
                    t.m[(j, i)] = v;
                }
            }
            _ => t.mixed = t.mixed.max(c.norm()),
        }
    }
    t
}

/// `w(lambda) = d_y N(y(lambda), 0)`.
pub fn frequency_map(n_full: &FtSeries, chart: &ParamChart, lambda: &[f64]) -> Result<Vec<f64>, ModelError> {
    let d = n_full.dims();
    let y = chart.eval(lambda);
    let zeros_x = vec![0.0; d.n];
    let zeros_u = vec![0.0; d.normal()];
    (0..d.n)
        .map(|i| {
            let di = n_full.partial_derivative(Var::Y(i))?;
            Ok(di.evaluate(&zeros_x, &y, &zeros_u)?.re)
        })
        .collect()
}

/// `N_uu(y(lambda), 0)`.
pub fn normal_hessian_map(n_full: &FtSeries, chart: &ParamChart, lambda: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    let d = n_full.dims();
    let shifted = n_full.shift_y(&chart.eval(lambda))?;
    debug_assert_eq!(d, shifted.dims());
    Ok(taylor2(&shifted).m)
}

/// Normal-form data of `N` at `y(lambda)`, the cubic and higher Taylor
/// remainder of `N`, and the initial weights `(r0, s0)`.
pub fn pullback_normal_form(
    n_full: &FtSeries,
    chart: &ParamChart,
    lambda: &[f64],
    params: &KamParams,
) -> Result<(NormalForm, FtSeries, NormWeights), ModelError> {
    let d = n_full.dims();
    if !chart.contains(lambda) {
        return Err(ModelError::OutsideDomain { lambda: lambda.to_vec() });
    }
    if n_full.max_k_norm() != 0 {
        return Err(ModelError::Invalid("integrable part depends on the angles".into()));
    }
    let y0 = chart.eval(lambda);
    let shifted = n_full.shift_y(&y0)?;
    let t = taylor2(&shifted);
    if d.m > 0 {
        let det = t.m.determinant();
        let scale = t.m.amax().max(1.0).powi(d.normal() as i32);
        if det.abs() <= 1e-12 * scale {
            return Err(ModelError::A0Violated { y: y0, reason: format!("det N_uu = {det:e}") });
        }
    }
    let scale = shifted.terms().iter().map(|t| t.1.norm()).fold(1.0, f64::max);
    if t.mixed > 1e-12 * scale {
        return Err(ModelError::A0Violated {
            y: y0,
            reason: format!("N has u-linear or y-u terms of size {:e} on the torus", t.mixed),
        });
    }
    let rank = linalg::numerical_rank(&t.a, RANK_TOL);
    let minor = if rank == 0 { Vec::new() } else { select_principal_minor(&t.a, rank)? };
    let nf = NormalForm::new(d, t.e, t.omega, t.a, t.m, minor)?;
    let remainder = shifted.filter(|idx| idx.degree() >= 3);
    let weights = NormWeights::new(params.r0, params.s0(d))?;
    Ok((nf, remainder, weights))
}

/// Pulls `N + P` back to the torus at `y(lambda)`:
/// `P(x, y + y(lambda), u)` plus the Taylor remainder of `N`.
pub fn pullback_to_chart(
    n_full: &FtSeries,
    p_full: &FtSeries,
    chart: &ParamChart,
    lambda: &[f64],
    params: &KamParams,
) -> Result<ModelHamiltonian, ModelError> {
    let (nf, rem, weights) = pullback_normal_form(n_full, chart, lambda, params)?;
    let p = p_full.shift_y(&chart.eval(lambda))?.add(&rem)?;
    Ok(ModelHamiltonian { nf, p, weights })
}

/// Same as [`pullback_to_chart`] for a perturbation already written in
/// coordinates centred at `y(lambda)`.
pub fn pullback_with_local_perturbation(
    n_full: &FtSeries,
    p_local: &FtSeries,
    chart: &ParamChart,
    lambda: &[f64],
    params: &KamParams,
) -> Result<ModelHamiltonian, ModelError> {
    let (nf, rem, weights) = pullback_normal_form(n_full, chart, lambda, params)?;
    let p = p_local.add(&rem)?;
    Ok(ModelHamiltonian { nf, p, weights })
}

/// Central finite-difference partial `d^alpha f` as a tensor product of
/// one-dimensional stencils `sum_i (-1)^i C(j,i) f(x + (j/2 - i) h) / h^j`.
pub fn central_partial<F>(f: &F, x: &[f64], alpha: &[u32], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut acc: Option<Vec<f64>> = None;
    let mut idx = vec![0u32; alpha.len()];
    loop {
        let mut w = 1.0;
        let mut pt = x.to_vec();
        for (ax, (&a, &i)) in alpha.iter().zip(&idx).enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            w *= sign * crate::series::binomial(a as u64, i as u64) / h.powi(a as i32);
            pt[ax] += (a as f64 / 2.0 - i as f64) * h;
        }
        let v = f(&pt);
        match &mut acc {
            None => acc = Some(v.iter().map(|z| w * z).collect()),
            Some(s) => s.iter_mut().zip(&v).for_each(|(s, z)| *s += w * z),
        }
        // next stencil index
        let mut ax = 0;
        loop {
            if ax == alpha.len() {
                return acc.unwrap_or_default();
            }
            if idx[ax] < alpha[ax] {
                idx[ax] += 1;
                break;
            }
            idx[ax] = 0;
            ax += 1;
        }
    }
}

/// Multi-indices `alpha` in `N^{n0}` with `|alpha| <= order`, graded.
pub fn multi_indices_up_to(n0: usize, order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=order {
        let mut cur = vec![0u32; n0];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if i + 1 == cur.len() {
                cur[i] = left;
                out.push(cur.clone());
                return;
            }
            for v in (0..=left).rev() {
                cur[i] = v;
                rec(i + 1, left - v, cur, out);
            }
        }
        if n0 > 0 {
            rec(0, total, &mut cur, &mut out);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Columns `d^alpha w`, in the order of `alphas`.
    pub columns: Vec<Vec<f64>>,
    pub alphas: Vec<Vec<u32>>,
}

/// Numerical rank of `{d^alpha w(lambda) : |alpha| <= order}`.
pub fn check_a1_rank(
    n_full: &FtSeries,
    chart: &ParamChart,
    lambda: &[f64],
    order: u32,
    h: f64,
) -> Result<RankReport, ModelError> {
    if !chart.contains(lambda) {
        return Err(ModelError::OutsideDomain { lambda: lambda.to_vec() });
    }
    let need = order as f64 * h;
    if chart.boundary_margin(lambda) < need {
        return Err(ModelError::TooCloseToBoundary { lambda: lambda.to_vec(), margin: need });
    }
    let n = n_full.dims().n;
    let f = |l: &[f64]| frequency_map(n_full, chart, l).unwrap_or_else(|_| vec![f64::NAN; n]);
    let alphas = multi_indices_up_to(chart.n0, order);
    let columns: Vec<Vec<f64>> = alphas.iter().map(|a| central_partial(&f, lambda, a, h)).collect();
    let mat = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let singular_values = linalg::singular_values(&mat);
    let rank = linalg::numerical_rank(&mat, RANK_TOL);
    Ok(RankReport { rank, singular_values, columns, alphas })
}

/// Determinant of the bordered matrix `[[Ã, w*], [w*^T, 0]]` and whether it
/// is nonzero.
pub fn check_a1_doubleprime(nf: &NormalForm) -> (bool, f64) {
    let idx = &nf.minor_indices;
    let d = idx.len();
    let mut b = DMatrix::zeros(d + 1, d + 1);
    for (i, &ii) in idx.iter().enumerate() {
        for (j, &jj) in idx.iter().enumerate() {
            b[(i, j)] = nf.a[(ii, jj)];
        }
        b[(i, d)] = nf.omega[ii];
        b[(d, i)] = nf.omega[ii];
    }
    let det = b.determinant();
    let scale = b.amax().max(1.0).powi(d as i32 + 1);
    (det.abs() > 1e-12 * scale, det)
}

/// Zero-based index set of a `d x d` principal minor with the largest
/// `|det|`; ties within `1e-12` relative go to the lexicographically first.
pub fn select_principal_minor(a: &DMatrix<f64>, d: usize) -> Result<Vec<usize>, ModelError> {
    let n = a.nrows();
    if d == 0 || d > n {
        return Err(ModelError::NoPrincipalMinor { d });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        let det = linalg::principal_minor(a, &cur).determinant().abs();
        match &best {
            Some((_, b)) if det <= b * (1.0 + 1e-12) => {}
            _ => best = Some((cur.clone(), det)),
        }
        // next combination in lexicographic order
        let mut i = d;
        while i > 0 && cur[i - 1] == n - d + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        for j in i..d {
            cur[j] = cur[j - 1] + 1;
        }
    }
    let (idx, det) = best.expect("at least one combination");
    let scale = a.amax().max(1.0).powi(d as i32);
    if det <= 1e-12 * scale {
        return Err(ModelError::NoPrincipalMinor { d });
    }
    Ok(idx)
}
