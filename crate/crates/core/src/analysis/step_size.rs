//! Sufficient step-size bound for mean stability from Gershgorin disks of a similarity
//! transform of `C_kron^T (I - mu R)`.
//!
//! With `C^T = Y J Y^{-1}` (unit eigenvalue first, `Y e_1 = 1`, `e_1^T Y^{-1} = tau^T`) and
//! `E = (Y^{-1} ⊗ I) R (Y ⊗ I)` partitioned as `[[G_bar, E12], [E21, E22]]`, the disks of
//! the transformed matrix give three families of upper bounds on `mu`; `mu_o` is their
//! minimum. When `C^T` or `G_bar` is numerically defective a Schur triangularization
//! replaces the Jordan form, which keeps the bound valid but looser.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// How the similarity parameters `(epsilon, beta, sigma)` are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityParams {
    /// Coarse grid search maximizing the bound.
    Auto,
    Fixed {
        epsilon: f64,
        beta: f64,
        sigma: f64,
    },
}

/// Result of [`step_size_bound`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepSizeBound {
    pub mu_o: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub sigma: f64,
    /// Minimum of each bracket family: `[C-eigenvalue, E22-disk, G_bar-disk]`;
    /// `None` when the family is empty (single agent).
    pub brackets: [Option<f64>; 3],
    pub min_re_g_bar: f64,
    /// Largest modulus among the non-unit eigenvalues of `C` (0 for a single agent).
    pub lambda2_abs: f64,
    /// Set when a Schur form replaced a Jordan form.
    pub reduced_tightness: bool,
}

/// Triangular similarity `M = Y T Y^{-1}`.
struct Triangular {
    y: DMatrix<Complex64>,
    y_inv: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
    diagonal: bool,
}

fn triangularize(m: &DMatrix<f64>) -> Triangular {
    if let Some(ed) = linalg::eigen_decompose(m) {
        return Triangular {
            t: DMatrix::from_diagonal(&DVector::from_vec(ed.values)),
            y: ed.vectors,
            y_inv: ed.inverse,
            diagonal: true,
        };
    }
    let (q, t) = linalg::complex_schur(m);
    Triangular { y_inv: q.adjoint(), y: q, t, diagonal: false }
}

/// Decomposition of `C^T` whose first column is `1` and whose inverse has first row `tau^T`.
fn decompose_c(c: &DMatrix<f64>, tau: &DVector<f64>) -> Triangular {
    let n = c.nrows();
    let one = Complex64::new(1.0, 0.0);
    let ct = c.transpose();
    if let Some(ed) = linalg::eigen_decompose(&ct) {
        let unit = (0..n)
            .min_by(|&a, &b| (ed.values[a] - one).norm().total_cmp(&(ed.values[b] - one).norm()))
            .expect("non-empty");
        let mut order: Vec<usize> = vec![unit];
        order.extend((0..n).filter(|&i| i != unit));
        let mut y = DMatrix::from_fn(n, n, |i, j| ed.vectors[(i, order[j])]);
        let mut y_inv = DMatrix::from_fn(n, n, |i, j| ed.inverse[(order[i], j)]);
        for i in 0..n {
            y[(i, 0)] = one;
            y_inv[(0, i)] = Complex64::new(tau[i], 0.0);
        }
        let values: Vec<Complex64> = order.iter().map(|&i| ed.values[i]).collect();
        let mut t = DMatrix::from_diagonal(&DVector::from_vec(values));
        t[(0, 0)] = one;
        return Triangular { y, y_inv, t, diagonal: true };
    }
    // Y = [1, V W], V an orthonormal basis of tau-perp, V^T C^T V = W T W^*
    let v = linalg::orthogonal_complement(tau);
    let inner = v.transpose() * &ct * &v;
    let (w, t0) = linalg::complex_schur(&inner);
    let vc = linalg::to_complex(&v);
    let vw = &vc * &w;
    let mut y = DMatrix::zeros(n, n);
    let mut y_inv = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    t[(0, 0)] = one;
    t.view_mut((1, 1), (n - 1, n - 1)).copy_from(&t0);
    let proj = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, 1, 1.0) * tau.transpose();
    let lower = w.adjoint() * linalg::to_complex(&(v.transpose() * proj));
    for i in 0..n {
        y[(i, 0)] = one;
        y_inv[(0, i)] = Complex64::new(tau[i], 0.0);
    }
    y.view_mut((0, 1), (n, n - 1)).copy_from(&vw);
    y_inv.view_mut((1, 0), (n - 1, n)).copy_from(&lower);
    Triangular { y, y_inv, t, diagonal: false }
}

/// Parameter-independent ingredients of the bound.
struct Ingredients {
    n: usize,
    b: usize,
    lambda_g: Vec<Complex64>,
    g_tri: DMatrix<Complex64>,
    g_diag: bool,
    c_tri: DMatrix<Complex64>,
    c_diag: bool,
    /// `[m][j-1]`: row-`m` absolute sum of block `j` of `Y_G^{-1} E12`.
    base12: Vec<Vec<f64>>,
    /// `[i-1]`: `|T21_i|` with `T21_i = sum_l J0_il E21_l Y_G`.
    abs21: Vec<DMatrix<f64>>,
    /// `[(i-1)*b + r][j-1]`: off-diagonal absolute row sums of block `(i, j)` of `(J0 ⊗ I) E22`.
    base22: Vec<Vec<f64>>,
    diag22: Vec<f64>,
}

fn ingredients(c: &DMatrix<f64>, blocks: &[DMatrix<f64>], tau: &DVector<f64>) -> Result<(Ingredients, DMatrix<f64>)> {
    let n = blocks.len();
    let b = blocks[0].nrows();
    let mut g_bar = DMatrix::zeros(b, b);
    for (t, g) in tau.iter().zip(blocks) {
        g_bar += g * *t;
    }
    let gt = triangularize(&g_bar);
    let lambda_g: Vec<Complex64> = (0..b).map(|i| gt.t[(i, i)]).collect();
    let ct = decompose_c(c, tau);
    let gc: Vec<DMatrix<Complex64>> = blocks.iter().map(linalg::to_complex).collect();
    // E block (i, j) = sum_k Yinv[i,k] G_k Y[k,j]
    let e_block = |i: usize, j: usize| {
        let mut acc = DMatrix::<Complex64>::zeros(b, b);
        for k in 0..n {
            let coef = ct.y_inv[(i, k)] * ct.y[(k, j)];
            if coef.norm() != 0.0 {
                acc += &gc[k] * coef;
            }
        }
        acc
    };
    let mut base12 = vec![vec![0.0; n.saturating_sub(1)]; b];
    let mut abs21 = Vec::new();
    let mut base22 = vec![vec![0.0; n.saturating_sub(1)]; b * n.saturating_sub(1)];
    let mut diag22 = vec![0.0; b * n.saturating_sub(1)];
    if n > 1 {
        for j in 1..n {
            let s12 = &gt.y_inv * e_block(0, j);
            for m in 0..b {
                base12[m][j - 1] = s12.row(m).iter().map(|z| z.norm()).sum();
            }
        }
        let e21: Vec<DMatrix<Complex64>> = (1..n).map(|l| e_block(l, 0) * &gt.y).collect();
        let e22: Vec<Vec<DMatrix<Complex64>>> = (1..n).map(|l| (1..n).map(|j| e_block(l, j)).collect()).collect();
        for i in 1..n {
            let mut t21 = DMatrix::<Complex64>::zeros(b, b);
            for l in 1..n {
                let jc = ct.t[(i, l)];
                if jc.norm() != 0.0 {
                    t21 += &e21[l - 1] * jc;
                }
            }
            abs21.push(t21.map(|z| z.norm()));
            for j in 1..n {
                let mut t22 = DMatrix::<Complex64>::zeros(b, b);
                for l in 1..n {
                    let jc = ct.t[(i, l)];
                    if jc.norm() != 0.0 {
                        t22 += &e22[l - 1][j - 1] * jc;
                    }
                }
                for r in 0..b {
                    let row = (i - 1) * b + r;
                    let mut s = 0.0;
                    for cc in 0..b {
                        let v = t22[(r, cc)].norm();
                        if i == j && cc == r {
                            diag22[row] = v;
                        } else {
                            s += v;
                        }
                    }
                    base22[row][j - 1] = s;
                }
            }
        }
    }
    Ok((
        Ingredients {
            n,
            b,
            lambda_g,
            g_tri: gt.t,
            g_diag: gt.diagonal,
            c_tri: ct.t,
            c_diag: ct.diagonal,
            base12,
            abs21,
            base22,
            diag22,
        },
        g_bar,
    ))
}

impl Ingredients {
    fn min_re(&self) -> f64 {
        self.lambda_g.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    fn lambda2_abs(&self) -> f64 {
        (1..self.n).map(|i| self.c_tri[(i, i)].norm()).fold(0.0, f64::max)
    }

    /// Power index of row `m` of `G_bar`'s similarity scaling.
    fn pos_g(&self, m: usize) -> i32 {
        if self.g_diag {
            1
        } else {
            m as i32 + 1
        }
    }

    /// Power index of agent-block `i` (1-based, `i >= 1`) of the `C` scaling.
    fn pos_c(&self, i: usize) -> i32 {
        if self.c_diag {
            1
        } else {
            i as i32
        }
    }

    fn slack_g(&self, m: usize, eps: f64) -> f64 {
        if self.g_diag {
            eps
        } else {
            ((m + 1)..self.b).map(|j| self.g_tri[(m, j)].norm() * eps.powi((j - m) as i32)).sum()
        }
    }

    fn slack_c(&self, i: usize, beta: f64) -> f64 {
        if self.c_diag {
            beta
        } else {
            ((i + 1)..self.n).map(|j| self.c_tri[(i, j)].norm() * beta.powi((j - i) as i32)).sum()
        }
    }

    fn chi21(&self, eps: f64, beta: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.b * (self.n - 1));
        let epow: Vec<f64> = (0..self.b).map(|q| eps.powi(self.pos_g(q))).collect();
        for i in 1..self.n {
            let scale = beta.powi(-self.pos_c(i));
            let a = &self.abs21[i - 1];
            for r in 0..self.b {
                let s: f64 = (0..self.b).map(|q| a[(r, q)] * epow[q]).sum();
                out.push(scale * s);
            }
        }
        out
    }

    fn max_chi21(&self, eps: f64, beta: f64) -> f64 {
        self.chi21(eps, beta).into_iter().fold(0.0, f64::max)
    }

    /// Returns the three bracket minima, or `None` when a margin is not positive.
    fn evaluate(&self, eps: f64, beta: f64, sigma: f64) -> Option<[f64; 3]> {
        let (n, b) = (self.n, self.b);
        let mut third = f64::INFINITY;
        for m in 0..b {
            let chi12: f64 = if n > 1 {
                let s: f64 = (1..n).map(|j| beta.powi(self.pos_c(j)) * self.base12[m][j - 1]).sum();
                s * eps.powi(-self.pos_g(m))
            } else {
                0.0
            };
            let lam = self.lambda_g[m];
            let margin = lam.re - self.slack_g(m, eps);
            if margin <= 0.0 {
                return None;
            }
            let a2 = lam.norm_sqr();
            let r = chi12 / sigma;
            let root = (-r + (r * r + 2.0 * a2 * margin).sqrt()) / a2;
            third = third.min(root * root);
        }
        let (mut first, mut second) = (f64::INFINITY, f64::INFINITY);
        if n > 1 {
            let chi21 = self.chi21(eps, beta);
            for i in 1..n {
                let margin = 1.0 - self.c_tri[(i, i)].norm() - self.slack_c(i, beta);
                if margin <= 0.0 {
                    return None;
                }
                first = first.min(margin * margin);
                for r in 0..b {
                    let row = (i - 1) * b + r;
                    let num = 1.0 - sigma * chi21[row];
                    if num <= 0.0 {
                        return None;
                    }
                    let chi22: f64 =
                        (1..n).map(|j| beta.powi(self.pos_c(j) - self.pos_c(i)) * self.base22[row][j - 1]).sum();
                    let den = chi22 + self.diag22[row];
                    let v = if den > 0.0 { (num / den).powi(2) } else { f64::INFINITY };
                    second = second.min(v);
                }
            }
        }
        Some([first, second, third])
    }
}

const GRID: [f64; 12] = [0.01, 0.03, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.97];

/// Step-size `mu_o` below which diffusion GTD is mean-stable.
///
/// `blocks` are the agents' expected coefficient matrices `G_k` (the step-size ratio
/// is already folded into them) and `tau` is the Perron vector of `C`.
pub fn step_size_bound(
    c: &DMatrix<f64>,
    blocks: &[DMatrix<f64>],
    tau: &DVector<f64>,
    params: SimilarityParams,
) -> Result<StepSizeBound> {
    let n = blocks.len();
    if n == 0 || c.shape() != (n, n) || tau.len() != n {
        return Err(Error::DimensionMismatch { context: "step-size bound inputs", expected: n, found: c.nrows() });
    }
    let (ing, _) = ingredients(c, blocks, tau)?;
    let min_re = ing.min_re();
    if !(min_re > 0.0) {
        return Err(Error::InvalidParameter(format!("G_bar has an eigenvalue with real part {min_re} <= 0")));
    }
    let lambda2 = ing.lambda2_abs();
    if n > 1 && lambda2 >= 1.0 {
        return Err(Error::NotPrimitive);
    }
    let reduced = !(ing.g_diag && ing.c_diag);
    let make = |eps: f64, beta: f64, sigma: f64, br: [f64; 3]| StepSizeBound {
        mu_o: br.iter().copied().fold(f64::INFINITY, f64::min),
        epsilon: eps,
        beta,
        sigma,
        brackets: br.map(|v| v.is_finite().then_some(v)),
        min_re_g_bar: min_re,
        lambda2_abs: lambda2,
        reduced_tightness: reduced,
    };
    match params {
        SimilarityParams::Fixed { epsilon, beta, sigma } => {
            if !(epsilon > 0.0 && epsilon < min_re) {
                return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, {min_re})")));
            }
            if n > 1 {
                if !(beta > 0.0 && beta < 1.0 - lambda2) {
                    return Err(Error::InvalidParameter(format!("beta {beta} must lie in (0, {})", 1.0 - lambda2)));
                }
                let cap = 1.0 / ing.max_chi21(epsilon, beta);
                if !(sigma > 0.0 && sigma < cap) {
                    return Err(Error::InvalidParameter(format!("sigma {sigma} must lie in (0, {cap})")));
                }
            }
            let br = ing
                .evaluate(epsilon, beta, sigma)
                .ok_or_else(|| Error::InvalidParameter("similarity parameters leave no stability margin".into()))?;
            Ok(make(epsilon, beta, sigma, br))
        }
        SimilarityParams::Auto => {
            let mut best: Option<StepSizeBound> = None;
            let betas: Vec<f64> = if n > 1 { GRID.iter().map(|f| f * (1.0 - lambda2)).collect() } else { vec![0.5] };
            for fe in GRID {
                let eps = fe * min_re;
                for &beta in &betas {
                    let sigmas: Vec<f64> = if n > 1 {
                        let cap = 1.0 / ing.max_chi21(eps, beta);
                        if !cap.is_finite() {
                            vec![1.0]
                        } else {
                            GRID.iter().map(|f| f * cap).collect()
                        }
                    } else {
                        vec![1.0]
                    };
                    for sigma in sigmas {
                        if let Some(br) = ing.evaluate(eps, beta, sigma) {
                            let cand = make(eps, beta, sigma, br);
                            if best.as_ref().is_none_or(|b| cand.mu_o > b.mu_o) {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
            best.ok_or_else(|| Error::InvalidParameter("no admissible similarity parameters found".into()))
        }
    }
}
