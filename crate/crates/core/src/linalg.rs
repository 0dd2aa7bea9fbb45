//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::ModelError;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Block-diagonal symplectic matrix: `[[0, 1], [-1, 0]]` on each `(u_j, v_j)`.
pub fn j_matrix(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for b in 0..m {
        j[(2 * b, 2 * b + 1)] = 1.0;
        j[(2 * b + 1, 2 * b)] = -1.0;
    }
    j
}

/// Largest `|a_ij - a_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-major stacking of the columns of `x`.
pub fn vec_of(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn principal_minor(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values at least `rel_tol` times the largest.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v >= rel_tol * top).count(),
        _ => 0,
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    a.complex_eigenvalues().iter().copied().collect()
}

/// Eigenvalues of a complex square matrix: the diagonal of its (complex)
/// Schur form.
///
/// The QR iteration can stall on matrices with exactly repeated eigenvalues;
/// it is then restarted on `S^{-1} A S` for a fixed well-conditioned `S`.
pub fn complex_eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>, ModelError> {
    let q = a.nrows();
    let diag = |t: CMatrix| Ok((0..q).map(|i| t[(i, i)]).collect());
    if let Some(s) = a.clone().try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
        return diag(s.unpack().1);
    }
    for attempt in 1..=4 {
        let h = 0.1 * attempt as f64;
        let s = CMatrix::from_fn(q, q, |i, j| {
            let v = if i == j { 1.0 } else { h * ((1 + i + 3 * j) as f64).sin() / q as f64 };
            Complex64::new(v, 0.5 * h * ((2 + 5 * i + j) as f64).cos() / q as f64)
        });
        let Some(inv) = s.clone().try_inverse() else { continue };
        if let Some(t) = (inv * a * s).try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
            return diag(t.unpack().1);
        }
    }
    Err(ModelError::Eigen("complex Schur iteration did not converge".into()))
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Sorts complex numbers by real part, then imaginary part, treating
/// parts within `tol` as equal.
pub fn sort_canonical(v: &mut [Complex64], tol: f64) {
    v.sort_by(|a, b| {
        if (a.re - b.re).abs() > tol {
            a.re.total_cmp(&b.re)
        } else {
            a.im.total_cmp(&b.im)
        }
    });
}

/// Greedy multiset matching distance: the largest `|a_i - b_σ(i)|` where each
/// `a_i` is paired with the nearest unused `b`.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for &x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("same length");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_and_vec_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = to_complex(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = to_complex(&DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.0]));
        let x = to_complex(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -2.0, 3.0]));
        let lhs = vec_of(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_of(&x);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn rank_and_singular_values() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numerical_rank(&a, 1e-8), 1);
        assert_eq!(numerical_rank(&DMatrix::<f64>::identity(3, 3), 1e-8), 3);
    }

    #[test]
    fn complex_spectrum_of_triangular() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = Complex64::new(1.0, 2.0);
        a[(1, 1)] = Complex64::new(-0.5, 0.0);
        a[(2, 2)] = Complex64::new(0.0, -3.0);
        a[(0, 2)] = Complex64::new(0.7, 0.1);
        let ev = complex_eigenvalues(&a).unwrap();
        let expect = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0), Complex64::new(0.0, -3.0)];
        assert!(multiset_distance(&ev, &expect) < 1e-10);
    }

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j_matrix(2);
        assert_eq!(&j * &j, -DMatrix::<f64>::identity(4, 4));
    }
}
