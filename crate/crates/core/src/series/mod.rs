//! Fourier-Taylor series in `(x, y, u)`.

mod index;
mod ops;
mod text;

pub use index::{is_canonical_half, l1_ball, l1_shell_count, Dims, MultiIndex, MAX_N, MAX_NORMAL};
pub(crate) use index::{binomial, Key};

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::SeriesError;

/// Coefficients below this magnitude are dropped.
pub const ZERO_CUTOFF: f64 = 1e-300;

/// Radii of the complex domain `D(r, s)` used by the majorant norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    pub r: f64,
    pub s: f64,
}

impl NormWeights {
    pub fn new(r: f64, s: f64) -> Result<Self, SeriesError> {
        if !(r > 0.0 && s > 0.0 && r.is_finite() && s.is_finite()) {
            return Err(SeriesError::InvalidWeights { r, s });
        }
        Ok(NormWeights { r, s })
    }
}

/// A coordinate to differentiate against. Normal coordinates use the
/// interleaved index: `U(2j)` is `u_j`, `U(2j + 1)` is `v_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
    U(usize),
}

/// Finite sum `sum c_{klp} y^l u^p e^{i<k,x>}`.
///
/// `real` marks series whose coefficients satisfy
/// `c(-k, l, p) = conj(c(k, l, p))`, i.e. real-valued on real arguments.
#[derive(Clone, Debug)]
pub struct FtSeries {
    dims: Dims,
    terms: FxHashMap<Key, Complex64>,
    real: bool,
}

impl PartialEq for FtSeries {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.terms == other.terms
    }
}

impl FtSeries {
    /// The zero series. It is real.
    pub fn zero(dims: Dims) -> Self {
        FtSeries {
            dims,
            terms: FxHashMap::default(),
            real: true,
        }
    }

    pub fn constant(dims: Dims, c: f64) -> Self {
        let mut s = Self::zero(dims);
        s.insert_key(dims.zero_key(), Complex64::new(c, 0.0));
        s
    }

    /// Single term `c y^l u^p e^{i<k,x>}`. Real only if `k = 0` and `c` is real.
    pub fn monomial(dims: Dims, idx: &MultiIndex, c: Complex64) -> Result<Self, SeriesError> {
        let key = dims.pack(idx)?;
        let mut s = Self::zero(dims);
        s.real = c.im == 0.0 && idx.k.iter().all(|&k| k == 0);
        s.insert_key(key, c);
        Ok(s)
    }

    /// Real series `c y^l u^p e^{i<k,x>} + conj(c) y^l u^p e^{-i<k,x>}` for
    /// `k != 0`, or `Re(c) y^l u^p` for `k = 0`.
    pub fn real_mode(dims: Dims, idx: &MultiIndex, c: Complex64) -> Result<Self, SeriesError> {
        let key = dims.pack(idx)?;
        let mut s = Self::zero(dims);
        if key == dims.conj_key(key) {
            s.insert_key(key, Complex64::new(c.re, 0.0));
        } else {
            s.insert_key(key, c);
            s.insert_key(dims.conj_key(key), c.conj());
        }
        Ok(s)
    }

    /// The coordinate `y_i`.
    pub fn y(dims: Dims, i: usize) -> Result<Self, SeriesError> {
        if i >= dims.n {
            return Err(SeriesError::InvalidVariable { kind: "y", index: i, dim: dims.n });
        }
        let mut s = Self::zero(dims);
        s.insert_key(dims.zero_key() + dims.unit_l(i), Complex64::new(1.0, 0.0));
        Ok(s)
    }

    /// The normal coordinate with interleaved index `j`.
    pub fn u(dims: Dims, j: usize) -> Result<Self, SeriesError> {
        if j >= dims.normal() {
            return Err(SeriesError::InvalidVariable { kind: "u", index: j, dim: dims.normal() });
        }
        let mut s = Self::zero(dims);
        s.insert_key(dims.zero_key() + dims.unit_p(j), Complex64::new(1.0, 0.0));
        Ok(s)
    }

    /// Builds a series from explicit terms; repeated indices are summed.
    pub fn from_terms<I>(dims: Dims, terms: I, real: bool) -> Result<Self, SeriesError>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut s = Self::zero(dims);
        s.real = real;
        for (idx, c) in terms {
            let key = dims.pack(&idx)?;
            *s.terms.entry(key).or_default() += c;
        }
        s.canonicalize();
        Ok(s)
    }

    pub(crate) fn from_map(dims: Dims, terms: FxHashMap<Key, Complex64>, real: bool) -> Self {
        let mut s = FtSeries { dims, terms, real };
        s.canonicalize();
        s
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Sets the reality flag without checking; see [`Self::conjugate_asymmetry`].
    pub fn with_real(mut self, real: bool) -> Self {
        self.real = real;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Complex64 {
        match self.dims.pack(idx) {
            Ok(key) => self.terms.get(&key).copied().unwrap_or_default(),
            Err(_) => Complex64::default(),
        }
    }

    pub(crate) fn coeff_key(&self, key: Key) -> Complex64 {
        self.terms.get(&key).copied().unwrap_or_default()
    }

    /// Terms sorted by packed key, which makes iteration order reproducible.
    pub(crate) fn sorted_keys(&self) -> Vec<(Key, Complex64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    /// All terms in a deterministic order.
    pub fn terms(&self) -> Vec<(MultiIndex, Complex64)> {
        self.sorted_keys()
            .into_iter()
            .map(|(k, c)| (self.dims.unpack(k), c))
            .collect()
    }

    pub fn insert(&mut self, idx: &MultiIndex, c: Complex64) -> Result<(), SeriesError> {
        let key = self.dims.pack(idx)?;
        self.insert_key(key, c);
        Ok(())
    }

    pub(crate) fn insert_key(&mut self, key: Key, c: Complex64) {
        if c.norm() < ZERO_CUTOFF {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, c);
        }
    }

    pub(crate) fn add_key(&mut self, key: Key, c: Complex64) {
        let e = self.terms.entry(key).or_default();
        *e += c;
        if e.norm() < ZERO_CUTOFF {
            self.terms.remove(&key);
        }
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|_, c| c.norm() >= ZERO_CUTOFF);
    }

    fn check_dims(&self, other: &Self) -> Result<(), SeriesError> {
        if self.dims != other.dims {
            return Err(SeriesError::DimensionMismatch(
                self.dims.n,
                self.dims.m,
                other.dims.n,
                other.dims.m,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + a * other`. Real if both are real and `a` is real.
    pub fn axpy(&self, a: Complex64, other: &Self) -> Result<Self, SeriesError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        out.add_assign_scaled(a, other)?;
        Ok(out)
    }

    pub fn add_assign_scaled(&mut self, a: Complex64, other: &Self) -> Result<(), SeriesError> {
        self.check_dims(other)?;
        for (key, c) in other.sorted_keys() {
            self.add_key(key, a * c);
        }
        self.real = self.real && other.real && a.im == 0.0;
        Ok(())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let terms = self.terms.iter().map(|(&k, &c)| (k, a * c)).collect();
        Self::from_map(self.dims, terms, self.real && a.im == 0.0)
    }

    /// Terms with `|k| <= k_max` and `|l| + |p| <= d_max`.
    pub fn truncate(&self, k_max: u32, d_max: u32) -> Self {
        self.filter(|idx| idx.k_norm() <= k_max && idx.degree() <= d_max)
    }

    /// Terms whose multi-index satisfies `keep`. The reality flag survives if
    /// `keep` is invariant under `k -> -k`, which the caller must ensure.
    pub fn filter<F: Fn(&MultiIndex) -> bool>(&self, keep: F) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(&key, _)| keep(&self.dims.unpack(key)))
            .map(|(&k, &c)| (k, c))
            .collect();
        FtSeries { dims: self.dims, terms, real: self.real }
    }

    /// Mean over the torus: the `k = 0` terms.
    pub fn average_over_torus(&self) -> Self {
        let zero = self.dims.k_part(self.dims.zero_key());
        let terms = self
            .terms
            .iter()
            .filter(|(&key, _)| self.dims.k_part(key) == zero)
            .map(|(&k, &c)| (k, c))
            .collect();
        FtSeries { dims: self.dims, terms, real: self.real }
    }

    /// `sum |c| e^{|k| r} s^{|l|+|p|}`; `+inf` if that overflows.
    pub fn majorant_norm(&self, w: NormWeights) -> f64 {
        let mut total = 0.0;
        for (&key, c) in &self.terms {
            total += c.norm() * self.term_weight(key, w);
        }
        if total.is_finite() {
            total
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn term_weight(&self, key: Key, w: NormWeights) -> f64 {
        let d = self.dims;
        let mut kn = 0u32;
        for i in 0..d.n {
            kn += d.k_of(key, i).unsigned_abs();
        }
        let mut deg = 0u32;
        for i in 0..d.n {
            deg += d.l_of(key, i);
        }
        for j in 0..d.normal() {
            deg += d.p_of(key, j);
        }
        (kn as f64 * w.r).exp() * w.s.powi(deg as i32)
    }

    /// Largest `|c(-k,l,p) - conj(c(k,l,p))|` over stored terms.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&key, &c) in &self.terms {
            let partner = self.coeff_key(self.dims.conj_key(key));
            worst = worst.max((partner - c.conj()).norm());
        }
        worst
    }

    pub fn partial_derivative(&self, var: Var) -> Result<Self, SeriesError> {
        let d = self.dims;
        let mut out = FxHashMap::default();
        match var {
            Var::X(i) => {
                if i >= d.n {
                    return Err(SeriesError::InvalidVariable { kind: "x", index: i, dim: d.n });
                }
                for (&key, &c) in &self.terms {
                    let k = d.k_of(key, i);
                    if k != 0 {
                        out.insert(key, c * Complex64::new(0.0, k as f64));
                    }
                }
            }
            Var::Y(i) => {
                if i >= d.n {
                    return Err(SeriesError::InvalidVariable { kind: "y", index: i, dim: d.n });
                }
                for (&key, &c) in &self.terms {
                    let l = d.l_of(key, i);
                    if l > 0 {
                        out.insert(key - d.unit_l(i), c * l as f64);
                    }
                }
            }
            Var::U(j) => {
                if j >= d.normal() {
                    return Err(SeriesError::InvalidVariable { kind: "u", index: j, dim: d.normal() });
                }
                for (&key, &c) in &self.terms {
                    let p = d.p_of(key, j);
                    if p > 0 {
                        out.insert(key - d.unit_p(j), c * p as f64);
                    }
                }
            }
        }
        Ok(Self::from_map(d, out, self.real))
    }

    /// Value at `(x, y, u)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64], u: &[f64]) -> Result<Complex64, SeriesError> {
        let d = self.dims;
        check_len("x", d.n, x.len())?;
        check_len("y", d.n, y.len())?;
        check_len("u", d.normal(), u.len())?;
        let mut total = Complex64::default();
        for (key, c) in self.sorted_keys() {
            total += c * self.monomial_value(key, x, y, u);
        }
        Ok(total)
    }

    pub(crate) fn monomial_value(&self, key: Key, x: &[f64], y: &[f64], u: &[f64]) -> Complex64 {
        let d = self.dims;
        let mut phase = 0.0;
        let mut mag = 1.0;
        for i in 0..d.n {
            phase += d.k_of(key, i) as f64 * x[i];
            mag *= y[i].powi(d.l_of(key, i) as i32);
        }
        for (j, uj) in u.iter().enumerate() {
            mag *= uj.powi(d.p_of(key, j) as i32);
        }
        Complex64::from_polar(mag, phase)
    }

    /// `P(x, y + shift, u)`, expanded exactly.
    pub fn shift_y(&self, shift: &[f64]) -> Result<Self, SeriesError> {
        let d = self.dims;
        check_len("shift", d.n, shift.len())?;
        if shift.iter().all(|&v| v == 0.0) {
            return Ok(self.clone());
        }
        let mut out: FxHashMap<Key, Complex64> = FxHashMap::default();
        for (key, c) in self.sorted_keys() {
            let base = key
                - (0..d.n)
                    .map(|i| d.unit_l(i) * d.l_of(key, i) as Key)
                    .sum::<Key>();
            // expand prod_i (y_i + shift_i)^{l_i}
            let mut partial: Vec<(Key, Complex64)> = vec![(base, c)];
            for i in 0..d.n {
                let l = d.l_of(key, i);
                if l == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(partial.len() * (l as usize + 1));
                for &(pk, pc) in &partial {
                    for j in 0..=l {
                        let w = binomial(l as u64, j as u64) * shift[i].powi((l - j) as i32);
                        if w != 0.0 {
                            next.push((pk + d.unit_l(i) * j as Key, pc * w));
                        }
                    }
                }
                partial = next;
            }
            for (pk, pc) in partial {
                *out.entry(pk).or_default() += pc;
            }
        }
        Ok(Self::from_map(d, out, self.real))
    }

    /// Drops terms whose weighted size `|c| e^{|k|r} s^{deg}` is below `threshold`
    /// and returns the pruned series with the majorant norm of what was dropped.
    pub fn prune(&self, w: NormWeights, threshold: f64) -> (Self, f64) {
        let mut dropped = 0.0;
        let mut terms = FxHashMap::default();
        for (key, c) in self.sorted_keys() {
            let size = c.norm() * self.term_weight(key, w);
            if size < threshold {
                dropped += size;
            } else {
                terms.insert(key, c);
            }
        }
        (FtSeries { dims: self.dims, terms, real: self.real }, dropped)
    }

    /// Replaces every coefficient by its symmetrized value
    /// `(c(k) + conj(c(-k))) / 2` and marks the series real.
    pub fn realify(&self) -> Self {
        let d = self.dims;
        let mut out = FxHashMap::default();
        for (&key, &c) in &self.terms {
            let partner = self.coeff_key(d.conj_key(key));
            out.insert(key, (c + partner.conj()) * 0.5);
        }
        for (&key, &c) in &self.terms {
            let ck = d.conj_key(key);
            out.entry(ck).or_insert_with(|| c.conj() * 0.5);
        }
        Self::from_map(d, out, true)
    }

    /// Largest `|k|_1` among stored terms.
    pub fn max_k_norm(&self) -> u32 {
        self.terms
            .keys()
            .map(|&key| (0..self.dims.n).map(|i| self.dims.k_of(key, i).unsigned_abs()).sum())
            .max()
            .unwrap_or(0)
    }

    /// Largest total degree `|l| + |p|` among stored terms.
    pub fn max_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|&key| self.dims.unpack(key).degree())
            .max()
            .unwrap_or(0)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), SeriesError> {
    if expected != got {
        return Err(SeriesError::LengthMismatch { what, expected, got });
    }
    Ok(())
}
