//! Multi-indices `(k, l, p)` and their packed 128-bit keys.
//!
//! Layout, from the least significant bit: `n` Fourier fields of
//! [`K_BITS`] bits (stored with offset [`K_OFFSET`]), then `n` action
//! degrees and `2m` normal degrees of [`D_BITS`] bits each. Because every
//! field is stored with a fixed offset, the key of a product monomial is
//! `a + b - zero_key` as long as no field overflows.

use serde::{Deserialize, Serialize};

use crate::error::SeriesError;

pub(crate) const K_BITS: u32 = 10;
pub(crate) const K_OFFSET: i64 = 512;
pub(crate) const K_MAX: i32 = 511;
pub(crate) const D_BITS: u32 = 6;
pub(crate) const D_MAX: u32 = 63;

/// Largest action dimension representable in a packed key.
pub const MAX_N: usize = 8;
/// Largest normal dimension `2m` representable in a packed key.
pub const MAX_NORMAL: usize = 18;

pub(crate) type Key = u128;

/// Phase-space dimensions: `T^n x R^n x R^{2m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize) -> Result<Self, SeriesError> {
        if n == 0 || n > MAX_N || 2 * m > MAX_NORMAL || 16 * n + 12 * m > 128 {
            return Err(SeriesError::UnsupportedDims { n, m });
        }
        Ok(Dims { n, m })
    }

    /// Dimension of the normal space, `2m`.
    #[inline]
    pub fn normal(&self) -> usize {
        2 * self.m
    }

    #[inline]
    pub(crate) fn k_shift(&self, i: usize) -> u32 {
        K_BITS * i as u32
    }

    #[inline]
    pub(crate) fn l_shift(&self, i: usize) -> u32 {
        K_BITS * self.n as u32 + D_BITS * i as u32
    }

    #[inline]
    pub(crate) fn p_shift(&self, j: usize) -> u32 {
        (K_BITS + D_BITS) * self.n as u32 + D_BITS * j as u32
    }

    /// Key of the zero multi-index (all Fourier fields at their offset).
    pub(crate) fn zero_key(&self) -> Key {
        let mut key: Key = 0;
        for i in 0..self.n {
            key |= (K_OFFSET as Key) << self.k_shift(i);
        }
        key
    }

    #[inline]
    pub(crate) fn unit_l(&self, i: usize) -> Key {
        1 << self.l_shift(i)
    }

    #[inline]
    pub(crate) fn unit_p(&self, j: usize) -> Key {
        1 << self.p_shift(j)
    }

    pub(crate) fn pack(&self, idx: &MultiIndex) -> Result<Key, SeriesError> {
        if idx.k.len() != self.n {
            return Err(SeriesError::LengthMismatch {
                what: "k",
                expected: self.n,
                got: idx.k.len(),
            });
        }
        if idx.l.len() != self.n {
            return Err(SeriesError::LengthMismatch {
                what: "l",
                expected: self.n,
                got: idx.l.len(),
            });
        }
        if idx.p.len() != self.normal() {
            return Err(SeriesError::LengthMismatch {
                what: "p",
                expected: self.normal(),
                got: idx.p.len(),
            });
        }
        let mut key: Key = 0;
        for (i, &k) in idx.k.iter().enumerate() {
            if k.abs() > K_MAX {
                return Err(SeriesError::IndexOverflow);
            }
            key |= ((k as i64 + K_OFFSET) as Key) << self.k_shift(i);
        }
        for (i, &l) in idx.l.iter().enumerate() {
            if l > D_MAX {
                return Err(SeriesError::IndexOverflow);
            }
            key |= (l as Key) << self.l_shift(i);
        }
        for (j, &p) in idx.p.iter().enumerate() {
            if p > D_MAX {
                return Err(SeriesError::IndexOverflow);
            }
            key |= (p as Key) << self.p_shift(j);
        }
        Ok(key)
    }

    pub(crate) fn unpack(&self, key: Key) -> MultiIndex {
        let kmask: Key = (1 << K_BITS) - 1;
        let dmask: Key = (1 << D_BITS) - 1;
        let k = (0..self.n)
            .map(|i| (((key >> self.k_shift(i)) & kmask) as i64 - K_OFFSET) as i32)
            .collect();
        let l = (0..self.n)
            .map(|i| ((key >> self.l_shift(i)) & dmask) as u32)
            .collect();
        let p = (0..self.normal())
            .map(|j| ((key >> self.p_shift(j)) & dmask) as u32)
            .collect();
        MultiIndex { k, l, p }
    }

    #[inline]
    pub(crate) fn k_of(&self, key: Key, i: usize) -> i32 {
        (((key >> self.k_shift(i)) & ((1 << K_BITS) - 1)) as i64 - K_OFFSET) as i32
    }

    #[inline]
    pub(crate) fn l_of(&self, key: Key, i: usize) -> u32 {
        ((key >> self.l_shift(i)) & ((1 << D_BITS) - 1)) as u32
    }

    #[inline]
    pub(crate) fn p_of(&self, key: Key, j: usize) -> u32 {
        ((key >> self.p_shift(j)) & ((1 << D_BITS) - 1)) as u32
    }

    /// Key of `(-k, l, p)`.
    pub(crate) fn conj_key(&self, key: Key) -> Key {
        let mut out = key;
        let kmask: Key = (1 << K_BITS) - 1;
        for i in 0..self.n {
            let sh = self.k_shift(i);
            let field = (key >> sh) & kmask;
            let neg = (2 * K_OFFSET as Key) - field;
            out = (out & !(kmask << sh)) | (neg << sh);
        }
        out
    }

    /// Fourier part of a key with the degree fields cleared.
    pub(crate) fn k_part(&self, key: Key) -> Key {
        let bits = K_BITS * self.n as u32;
        key & ((1 << bits) - 1)
    }
}

/// Fourier index `k`, action exponents `l` and normal exponents `p` of a
/// monomial `y^l u^p e^{i<k,x>}`. The normal variables are stored
/// interleaved: `p[2j]` is the exponent of `u_j`, `p[2j+1]` of `v_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub k: Vec<i32>,
    pub l: Vec<u32>,
    pub p: Vec<u32>,
}

impl MultiIndex {
    pub fn zero(dims: Dims) -> Self {
        MultiIndex {
            k: vec![0; dims.n],
            l: vec![0; dims.n],
            p: vec![0; dims.normal()],
        }
    }

    pub fn new(k: Vec<i32>, l: Vec<u32>, p: Vec<u32>) -> Self {
        MultiIndex { k, l, p }
    }

    /// `l1` norm of the Fourier index.
    pub fn k_norm(&self) -> u32 {
        self.k.iter().map(|k| k.unsigned_abs()).sum()
    }

    pub fn y_degree(&self) -> u32 {
        self.l.iter().sum()
    }

    pub fn u_degree(&self) -> u32 {
        self.p.iter().sum()
    }

    /// Total `(y, u)` degree `|l| + |p|`.
    pub fn degree(&self) -> u32 {
        self.y_degree() + self.u_degree()
    }
}

/// Number of `k in Z^n` with `|k|_1 = j`.
pub fn l1_shell_count(n: usize, j: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    // sum_i 2^i C(n, i) C(j-1, i-1)
    let mut total = 0.0;
    for i in 1..=n.min(j as usize) {
        total += 2f64.powi(i as i32) * binomial(n as u64, i as u64) * binomial(j - 1, i as u64 - 1);
    }
    total
}

pub(crate) fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// All `k in Z^n` with `0 < |k|_1 <= kmax`, in lexicographic order.
pub fn l1_ball(n: usize, kmax: u32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; n];
    fn rec(i: usize, budget: u32, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == cur.len() {
            if cur.iter().any(|&c| c != 0) {
                out.push(cur.clone());
            }
            return;
        }
        let b = budget as i32;
        for v in -b..=b {
            cur[i] = v;
            rec(i + 1, budget - v.unsigned_abs(), cur, out);
        }
        cur[i] = 0;
    }
    rec(0, kmax, &mut cur, &mut out);
    out
}

/// `true` if `k` is in the canonical half of `Z^n \ {0}`: its first nonzero
/// entry is positive.
pub fn is_canonical_half(k: &[i32]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}
