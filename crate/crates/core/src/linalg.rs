//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

/// Column-major vectorization, `vec(A)`.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a square `n x n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `C ⊗ I_block`.
pub fn kron_identity(c: &DMatrix<f64>, block: usize) -> DMatrix<f64> {
    c.kronecker(&DMatrix::identity(block, block))
}

/// Largest eigenvalue modulus via a dense Schur decomposition.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a real square matrix, possibly complex.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Spectral radius estimate by normalized power iteration on the linear map `apply`.
///
/// Used for matrices too large for a dense eigen-solver. The estimate averages the
/// growth rate over the trailing half of the iterations so that complex dominant
/// pairs (which make single-step ratios oscillate) are still captured.
pub fn spectral_radius_power<F>(dim: usize, iterations: usize, mut apply: F) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
    v /= v.norm();
    let burn = iterations / 2;
    let mut log_sum = 0.0;
    let mut counted = 0usize;
    for it in 0..iterations {
        let next = apply(&v);
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        if it >= burn {
            log_sum += norm.ln();
            counted += 1;
        }
        v = next / norm;
    }
    (log_sum / counted.max(1) as f64).exp()
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * smax;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            let vi = vt.row(i).transpose();
            let ui = u.column(i);
            out += (vi * ui.transpose()) / s;
        }
    }
    out
}

/// Solve `a x = b` by LU, `None` when `a` is numerically singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.clone().lu().solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Reciprocal condition estimate `sigma_min / sigma_max`.
pub fn inverse_condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// Complex Schur form `A = Q T Q^*` with `T` upper triangular.
pub fn complex_schur(m: &DMatrix<f64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mc = to_complex(m);
    Schur::new(mc).unpack()
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Diagonalization `A = V diag(values) V^{-1}`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    /// Right eigenvectors as columns, unit Euclidean norm.
    pub vectors: DMatrix<Complex64>,
    /// `vectors^{-1}`; its rows are left eigenvectors.
    pub inverse: DMatrix<Complex64>,
}

/// Largest admissible condition number of the eigenvector matrix.
const MAX_EIGENVECTOR_CONDITION: f64 = 1e10;

/// Eigen-decomposition of a real matrix through its complex Schur form.
///
/// Returns `None` when the matrix is numerically defective (a repeated eigenvalue
/// with a non-trivial Jordan block, or an ill-conditioned eigenvector basis).
pub fn eigen_decompose(m: &DMatrix<f64>) -> Option<EigenDecomposition> {
    let n = m.nrows();
    if n == 0 {
        return Some(EigenDecomposition {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
            inverse: DMatrix::zeros(0, 0),
        });
    }
    let (q, t) = complex_schur(m);
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-9 * scale;
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        y[(i, i)] = Complex64::new(1.0, 0.0);
        let lambda = t[(i, i)];
        for j in (0..i).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=i {
                s += t[(j, l)] * y[(l, i)];
            }
            let denom = t[(j, j)] - lambda;
            if denom.norm() <= tol {
                if s.norm() <= tol {
                    y[(j, i)] = Complex64::new(0.0, 0.0);
                } else {
                    return None;
                }
            } else {
                y[(j, i)] = -s / denom;
            }
        }
    }
    let mut v = &q * y;
    for mut col in v.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        col /= Complex64::new(norm, 0.0);
    }
    let inv = v.clone().lu().try_inverse()?;
    let cond = frobenius_c(&v) * frobenius_c(&inv);
    if !cond.is_finite() || cond > MAX_EIGENVECTOR_CONDITION {
        return None;
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Some(EigenDecomposition { values, vectors: v, inverse: inv })
}

pub fn frobenius_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis (columns) of the orthogonal complement of `v`.
pub fn orthogonal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let unit = v / v.norm();
    // Householder reflector mapping e_1 onto ±unit; its other columns span unit⊥
    let sign = if unit[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = unit * sign;
    u[0] -= 1.0;
    let un = u.norm();
    let h = if un < 1e-15 {
        DMatrix::identity(n, n)
    } else {
        u /= un;
        DMatrix::identity(n, n) - (&u * u.transpose()) * 2.0
    };
    h.columns(1, n - 1).into_owned()
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Vertical stack of matrices with equal column count.
pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, 0), (b.nrows(), cols)).copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn vstack_vec(blocks: &[DVector<f64>]) -> DVector<f64> {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(n);
    let mut off = 0;
    for b in blocks {
        out.rows_mut(off, b.len()).copy_from(b);
        off += b.len();
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Pearson correlation; `NaN` when either side is constant.
pub fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_roundtrip_and_kron_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = vec(&a);
        assert_eq!(v.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&v, 2), a);
        // vec(Y S Z) = (Z^T ⊗ Y) vec(S)
        let y = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.3]);
        let z = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, -0.7, 1.1]);
        let lhs = vec(&(&y * &a * &z));
        let rhs = kron(&z.transpose(), &y) * vec(&a);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn eigen_decomposition_reconstructs_complex_pair() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 1.0, 0.0, -1.0, 0.2, 0.3, 0.0, 0.5, 0.7]);
        let ed = eigen_decompose(&a).expect("diagonalizable");
        let d = DMatrix::from_diagonal(&DVector::from_vec(ed.values.clone()));
        let rec = &ed.vectors * d * &ed.inverse;
        let err = frobenius_c(&(rec - to_complex(&a)));
        assert!(err < 1e-10, "reconstruction error {err}");
        assert!(ed.values.iter().any(|z| z.im.abs() > 0.5));
    }

    #[test]
    fn eigen_decomposition_repeated_diagonalizable() {
        // complete-graph averaging matrix: eigenvalue 0 with multiplicity 2
        let a = DMatrix::from_element(3, 3, 1.0 / 3.0);
        let ed = eigen_decompose(&a).expect("diagonalizable");
        let d = DMatrix::from_diagonal(&DVector::from_vec(ed.values.clone()));
        let rec = &ed.vectors * d * &ed.inverse;
        assert!(frobenius_c(&(rec - to_complex(&a))) < 1e-10);
    }

    #[test]
    fn eigen_decomposition_rejects_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        assert!(eigen_decompose(&a).is_none());
    }

    #[test]
    fn power_iteration_matches_dense_radius() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.4, 0.0, -0.4, 0.5, 0.1, 0.0, 0.2, 0.3]);
        let dense = spectral_radius(&a);
        let power = spectral_radius_power(3, 4000, |v| &a * v);
        assert!((dense - power).abs() < 1e-3, "{dense} vs {power}");
    }

    #[test]
    fn pseudo_inverse_of_singular_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudo_inverse(&a, 1e-12);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = DVector::from_vec(vec![0.2, 0.5, 0.3]);
        let b = orthogonal_complement(&v);
        assert_eq!(b.ncols(), 2);
        assert!((b.transpose() * &v).norm() < 1e-12);
        assert!((b.transpose() * &b - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
