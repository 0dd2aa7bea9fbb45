//! Products and Poisson brackets.
//!
//! Pairwise loops over two term lists are split into fixed-size chunks of the
//! left operand; each chunk accumulates into its own map and the maps are
//! merged in chunk order, so the floating-point result does not depend on the
//! number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::index::{Dims, Key, D_MAX, K_MAX, MAX_N, MAX_NORMAL};
use super::{FtSeries, NormWeights};
use crate::error::SeriesError;

const CHUNK: usize = 32;
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Copy)]
struct Term {
    key: Key,
    c: Complex64,
    k: [i32; MAX_N],
    l: [u32; MAX_N],
    p: [u32; MAX_NORMAL],
}

fn unpack_terms(s: &FtSeries) -> Vec<Term> {
    let d = s.dims;
    s.sorted_keys()
        .into_iter()
        .map(|(key, c)| {
            let mut t = Term { key, c, k: [0; MAX_N], l: [0; MAX_N], p: [0; MAX_NORMAL] };
            for i in 0..d.n {
                t.k[i] = d.k_of(key, i);
                t.l[i] = d.l_of(key, i);
            }
            for j in 0..d.normal() {
                t.p[j] = d.p_of(key, j);
            }
            t
        })
        .collect()
}

/// Per-field maxima, used to rule out key overflow before a product.
fn field_max(d: Dims, ts: &[Term]) -> ([i32; MAX_N], [u32; MAX_N], [u32; MAX_NORMAL]) {
    let mut mk = [0i32; MAX_N];
    let mut ml = [0u32; MAX_N];
    let mut mp = [0u32; MAX_NORMAL];
    for t in ts {
        for i in 0..d.n {
            mk[i] = mk[i].max(t.k[i].abs());
            ml[i] = ml[i].max(t.l[i]);
        }
        for j in 0..d.normal() {
            mp[j] = mp[j].max(t.p[j]);
        }
    }
    (mk, ml, mp)
}

fn check_product_range(d: Dims, a: &[Term], b: &[Term]) -> Result<(), SeriesError> {
    let (ak, al, ap) = field_max(d, a);
    let (bk, bl, bp) = field_max(d, b);
    for i in 0..d.n {
        if ak[i] + bk[i] > K_MAX || al[i] + bl[i] > D_MAX {
            return Err(SeriesError::IndexOverflow);
        }
    }
    for j in 0..d.normal() {
        if ap[j] + bp[j] > D_MAX {
            return Err(SeriesError::IndexOverflow);
        }
    }
    Ok(())
}

fn pair_loop<F>(a: &[Term], b: &[Term], kernel: F) -> FxHashMap<Key, Complex64>
where
    F: Fn(&Term, &Term, &mut FxHashMap<Key, Complex64>) + Sync,
{
    let run_chunk = |chunk: &[Term]| {
        let mut acc = FxHashMap::default();
        for ta in chunk {
            for tb in b {
                kernel(ta, tb, &mut acc);
            }
        }
        acc
    };
    if a.len() * b.len() < PAR_THRESHOLD {
        return run_chunk(a);
    }
    let parts: Vec<FxHashMap<Key, Complex64>> = a.par_chunks(CHUNK).map(run_chunk).collect();
    let mut out: FxHashMap<Key, Complex64> = FxHashMap::default();
    for part in parts {
        let mut entries: Vec<_> = part.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        for (key, c) in entries {
            *out.entry(key).or_default() += c;
        }
    }
    out
}

impl FtSeries {
    /// Product: convolution in `k`, polynomial product in `(y, u)`.
    pub fn multiply(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_dims(other)?;
        let d = self.dims;
        let a = unpack_terms(self);
        let b = unpack_terms(other);
        check_product_range(d, &a, &b)?;
        let zero = d.zero_key();
        let map = pair_loop(&a, &b, |ta, tb, acc| {
            *acc.entry(ta.key + tb.key - zero).or_default() += ta.c * tb.c;
        });
        Ok(FtSeries::from_map(d, map, self.real && other.real))
    }

    /// `{F, G} = <d_y F, d_x G> - <d_x F, d_y G> + <d_u F, J d_u G>` with `J`
    /// block-diagonal `[[0, 1], [-1, 0]]` on each pair `(u_j, v_j)`.
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_dims(other)?;
        let d = self.dims;
        let a = unpack_terms(self);
        let b = unpack_terms(other);
        check_product_range(d, &a, &b)?;
        let zero = d.zero_key();
        let n = d.n;
        let m = d.m;
        let unit_l: Vec<Key> = (0..n).map(|i| d.unit_l(i)).collect();
        let unit_uv: Vec<Key> = (0..m).map(|j| d.unit_p(2 * j) + d.unit_p(2 * j + 1)).collect();
        let map = pair_loop(&a, &b, |ta, tb, acc| {
            let base = ta.key + tb.key - zero;
            let cc = ta.c * tb.c;
            for i in 0..n {
                let w = ta.l[i] as i64 * tb.k[i] as i64 - ta.k[i] as i64 * tb.l[i] as i64;
                if w != 0 {
                    *acc.entry(base - unit_l[i]).or_default() += cc * Complex64::new(0.0, w as f64);
                }
            }
            for j in 0..m {
                let w = ta.p[2 * j] as i64 * tb.p[2 * j + 1] as i64
                    - ta.p[2 * j + 1] as i64 * tb.p[2 * j] as i64;
                if w != 0 {
                    *acc.entry(base - unit_uv[j]).or_default() += cc * w as f64;
                }
            }
        });
        Ok(FtSeries::from_map(d, map, self.real && other.real))
    }
}

impl FtSeries {
    /// [`FtSeries::poisson_bracket`] that skips every pair whose weighted
    /// contribution at `w` is bounded by less than `threshold`. Returns the
    /// bracket and the sum of the skipped bounds, which dominates the
    /// majorant norm of the difference to the exact bracket.
    pub fn poisson_bracket_pruned(&self, other: &Self, w: NormWeights, threshold: f64) -> Result<(Self, f64), SeriesError> {
        self.check_dims(other)?;
        let d = self.dims;
        let a = unpack_terms(self);
        let mut b = unpack_terms(other);
        check_product_range(d, &a, &b)?;
        let n = d.n;
        let m = d.m;
        let size = |t: &Term| t.c.norm() * self.term_weight(t.key, w);
        let mut bs: Vec<(f64, Term)> = b.drain(..).map(|t| (size(&t), t)).collect();
        bs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.key.cmp(&y.1.key)));
        let mut suffix = vec![0.0; bs.len() + 1];
        for i in (0..bs.len()).rev() {
            suffix[i] = suffix[i + 1] + bs[i].0;
        }
        let (kb, lb, pb) = field_max(d, &bs.iter().map(|x| x.1).collect::<Vec<_>>());
        let kb = kb[..n].iter().copied().max().unwrap_or(0) as f64;
        let lb = lb[..n].iter().copied().max().unwrap_or(0) as f64;
        let pb = pb[..d.normal()].iter().copied().max().unwrap_or(0) as f64;
        let zero = d.zero_key();
        let unit_l: Vec<Key> = (0..n).map(|i| d.unit_l(i)).collect();
        let unit_uv: Vec<Key> = (0..m).map(|j| d.unit_p(2 * j) + d.unit_p(2 * j + 1)).collect();
        let mut acc: FxHashMap<Key, Complex64> = FxHashMap::default();
        let mut skipped = 0.0;
        for ta in &a {
            let sa = size(ta);
            let la: u32 = ta.l[..n].iter().sum();
            let ka: u32 = ta.k[..n].iter().map(|v| v.unsigned_abs()).sum();
            let pa: u32 = ta.p[..d.normal()].iter().sum();
            let phi = (la as f64 * kb + ka as f64 * lb) / w.s + pa as f64 * pb / (w.s * w.s);
            let scale = sa * phi;
            if scale == 0.0 {
                continue;
            }
            let cut = bs.partition_point(|x| scale * x.0 >= threshold);
            skipped += scale * suffix[cut];
            for (_, tb) in &bs[..cut] {
                let base = ta.key + tb.key - zero;
                let cc = ta.c * tb.c;
                for i in 0..n {
                    let wi = ta.l[i] as i64 * tb.k[i] as i64 - ta.k[i] as i64 * tb.l[i] as i64;
                    if wi != 0 {
                        *acc.entry(base - unit_l[i]).or_default() += cc * Complex64::new(0.0, wi as f64);
                    }
                }
                for j in 0..m {
                    let wj = ta.p[2 * j] as i64 * tb.p[2 * j + 1] as i64 - ta.p[2 * j + 1] as i64 * tb.p[2 * j] as i64;
                    if wj != 0 {
                        *acc.entry(base - unit_uv[j]).or_default() += cc * wj as f64;
                    }
                }
            }
        }
        Ok((FtSeries::from_map(d, acc, self.real && other.real), skipped))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{MultiIndex, Var};
    use super::*;

    fn d() -> Dims {
        Dims::new(2, 1).unwrap()
    }

    fn mono(k: [i32; 2], l: [u32; 2], p: [u32; 2], c: Complex64) -> FtSeries {
        FtSeries::monomial(d(), &MultiIndex::new(k.to_vec(), l.to_vec(), p.to_vec()), c).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn product_examples() {
        let a = mono([1, -2], [1, 0], [0, 1], Complex64::new(0.5, 0.2));
        let unit = FtSeries::constant(d(), 1.0);
        assert_eq!(a.multiply(&unit).unwrap(), a);
        let y1 = mono([0, 0], [1, 0], [0, 0], one());
        let y1sq = y1.multiply(&y1).unwrap();
        assert_eq!(y1sq.terms(), vec![(MultiIndex::new(vec![0, 0], vec![2, 0], vec![0, 0]), one())]);
        let e = mono([1, 0], [0, 0], [0, 0], one());
        let ec = mono([-1, 0], [0, 0], [0, 0], one());
        assert_eq!(e.multiply(&ec).unwrap(), FtSeries::constant(d(), 1.0));
    }

    #[test]
    fn product_overflow_detected() {
        let hi = mono([400, 0], [0, 0], [0, 0], one());
        assert!(matches!(hi.multiply(&hi), Err(SeriesError::IndexOverflow)));
    }

    #[test]
    fn bracket_of_frequency_term() {
        // {<w, y>, e^{i<k,x>}} = i<k,w> e^{i<k,x>}
        let w = [1.3, -0.7];
        let nf = mono([0, 0], [1, 0], [0, 0], w[0].into())
            .add(&mono([0, 0], [0, 1], [0, 0], w[1].into()))
            .unwrap();
        let e = mono([2, 3], [0, 0], [0, 0], one());
        let b = nf.poisson_bracket(&e).unwrap();
        let expect = Complex64::new(0.0, 2.0 * w[0] + 3.0 * w[1]);
        assert_eq!(b.len(), 1);
        assert!((b.terms()[0].1 - expect).norm() < 1e-15);
        assert!(e.poisson_bracket(&e).unwrap().is_empty());
    }

    /// Bracket through explicit partial derivatives, an independent route.
    fn bracket_by_derivatives(f: &FtSeries, g: &FtSeries) -> FtSeries {
        let dd = f.dims();
        let mut out = FtSeries::zero(dd);
        for i in 0..dd.n {
            let t1 = f.partial_derivative(Var::Y(i)).unwrap().multiply(&g.partial_derivative(Var::X(i)).unwrap()).unwrap();
            let t2 = f.partial_derivative(Var::X(i)).unwrap().multiply(&g.partial_derivative(Var::Y(i)).unwrap()).unwrap();
            out = out.add(&t1).unwrap().sub(&t2).unwrap();
        }
        for j in 0..dd.m {
            let fu = f.partial_derivative(Var::U(2 * j)).unwrap();
            let fv = f.partial_derivative(Var::U(2 * j + 1)).unwrap();
            let gu = g.partial_derivative(Var::U(2 * j)).unwrap();
            let gv = g.partial_derivative(Var::U(2 * j + 1)).unwrap();
            out = out.add(&fu.multiply(&gv).unwrap()).unwrap().sub(&fv.multiply(&gu).unwrap()).unwrap();
        }
        out
    }

    #[test]
    fn bracket_matches_derivative_route() {
        let f = mono([1, 0], [1, 1], [1, 0], Complex64::new(0.3, -0.1))
            .add(&mono([0, -2], [0, 2], [0, 2], Complex64::new(-1.1, 0.4)))
            .unwrap();
        let g = mono([-1, 1], [2, 0], [1, 1], Complex64::new(0.9, 0.2))
            .add(&mono([0, 0], [0, 1], [2, 0], one()))
            .unwrap();
        let lhs = f.poisson_bracket(&g).unwrap();
        let rhs = bracket_by_derivatives(&f, &g);
        let w = NormWeights::new(0.5, 0.5).unwrap();
        assert!(lhs.sub(&rhs).unwrap().majorant_norm(w) < 1e-14);
    }

    #[test]
    fn bracket_parallel_path_is_deterministic() {
        let mut f = FtSeries::zero(d());
        let mut g = FtSeries::zero(d());
        for k1 in -6..=6 {
            for k2 in -6..=6 {
                let c = Complex64::new((k1 * 7 + k2) as f64 * 0.01, k2 as f64 * 0.003);
                f.insert(&MultiIndex::new(vec![k1, k2], vec![1, (k1.unsigned_abs()) % 2], vec![1, 0]), c).unwrap();
                g.insert(&MultiIndex::new(vec![k2, k1], vec![0, 1], vec![0, 1]), c.conj()).unwrap();
            }
        }
        let a = f.poisson_bracket(&g).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| f.poisson_bracket(&g).unwrap());
        assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn pruned_bracket_bounds_its_error() {
        let mut f = FtSeries::zero(d());
        let mut g = FtSeries::zero(d());
        for k1 in -3i32..=3 {
            for k2 in -3i32..=3 {
                let c = Complex64::new(0.5f64.powi(k1.abs() + 2 * k2.abs()), 0.1 * k1 as f64);
                f.insert(&MultiIndex::new(vec![k1, k2], vec![1, 0], vec![(k2.unsigned_abs()) % 2, 1]), c).unwrap();
                g.insert(&MultiIndex::new(vec![k2, k1], vec![0, 1], vec![1, 0]), c * 0.3).unwrap();
            }
        }
        let w = NormWeights::new(0.3, 0.2).unwrap();
        let exact = f.poisson_bracket(&g).unwrap();
        let (full, skipped) = f.poisson_bracket_pruned(&g, w, 0.0).unwrap();
        assert_eq!(skipped, 0.0);
        assert!(exact.sub(&full).unwrap().majorant_norm(w) < 1e-14 * exact.majorant_norm(w));
        let (approx, skipped) = f.poisson_bracket_pruned(&g, w, 1e-3).unwrap();
        assert!(skipped > 0.0);
        assert!(!exact.sub(&approx).unwrap().is_empty());
        assert!(exact.sub(&approx).unwrap().majorant_norm(w) <= skipped * (1.0 + 1e-12));
    }
}
