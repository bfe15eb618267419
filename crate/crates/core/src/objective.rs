//! Linear value approximation: projection, projected Bellman error, its minimizer and
//! the deterministic primal-dual reference iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold for the full-column-rank check on `X`.
pub const RANK_TOL: f64 = 1e-10;

/// Reciprocal condition below which `X^T D X` or `B` is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// `S x M` feature matrix, row `s` being the feature vector of state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    x: DMatrix<f64>,
    rows: Vec<f64>,
}

impl FeatureMap {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter("empty feature matrix".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature entry".into()));
        }
        let rank = linalg::numerical_rank(&x, RANK_TOL);
        if rank < x.ncols() {
            return Err(Error::RankDeficient { rank, expected: x.ncols() });
        }
        let rows = x.transpose().as_slice().to_vec();
        Ok(Self { x, rows })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn num_states(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Feature vector of state `s` as a contiguous slice.
    pub fn row(&self, s: usize) -> &[f64] {
        let m = self.x.ncols();
        &self.rows[s * m..(s + 1) * m]
    }

    /// Approximate values `X w`.
    pub fn values(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.x * w
    }
}

/// Everything the objective needs: features, state weighting `D = diag(d)`, and the
/// target chain `(P^pi, r^pi, gamma)`.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    pub features: FeatureMap,
    pub d: DVector<f64>,
    pub p_pi: DMatrix<f64>,
    pub r_pi: DVector<f64>,
    pub gamma: f64,
    /// `X^T D (I - gamma P^pi) X`.
    pub b: DMatrix<f64>,
    /// `X^T D X`.
    pub xtdx: DMatrix<f64>,
    /// `X^T D r^pi`.
    pub xtdr: DVector<f64>,
}

impl ObjectiveContext {
    pub fn new(
        features: FeatureMap,
        d: DVector<f64>,
        p_pi: DMatrix<f64>,
        r_pi: DVector<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let s = features.num_states();
        for (ctx, n) in [("weighting", d.len()), ("reward", r_pi.len()), ("transition", p_pi.nrows())] {
            if n != s {
                return Err(Error::DimensionMismatch { context: ctx, expected: s, found: n });
            }
        }
        if p_pi.ncols() != s {
            return Err(Error::DimensionMismatch { context: "transition columns", expected: s, found: p_pi.ncols() });
        }
        if d.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("weighting must be nonnegative".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} not in (0,1)")));
        }
        let x = features.matrix();
        let dx = DMatrix::from_fn(s, x.ncols(), |i, j| d[i] * x[(i, j)]);
        let xtdx = x.transpose() * &dx;
        let xtdr = dx.transpose() * &r_pi;
        let bellman_x = x - (&p_pi * x) * gamma;
        let b = dx.transpose() * bellman_x;
        Ok(Self { features, d, p_pi, r_pi, gamma, b, xtdx, xtdr })
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn num_states(&self) -> usize {
        self.features.num_states()
    }

    /// `(I - gamma P^pi) X`.
    pub fn bellman_features(&self) -> DMatrix<f64> {
        let x = self.features.matrix();
        x - (&self.p_pi * x) * self.gamma
    }

    fn has_full_support(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }

    fn xtdx_inverse(&self) -> Result<DMatrix<f64>> {
        if linalg::inverse_condition(&self.xtdx) < SINGULAR_RCOND {
            return Err(Error::InsufficientCoverage);
        }
        self.xtdx.clone().try_inverse().ok_or(Error::InsufficientCoverage)
    }

    /// Weighting matrix of the quadratic form in `J_PB`: the inverse of `X^T D X`, or
    /// its pseudo-inverse when `D` leaves some states unweighted.
    pub fn metric(&self) -> Result<DMatrix<f64>> {
        if self.has_full_support() {
            self.xtdx_inverse()
        } else {
            Ok(linalg::pseudo_inverse(&self.xtdx, RANK_TOL))
        }
    }
}

/// `Pi = X (X^T D X)^{-1} X^T D`.
pub fn projection_matrix(ctx: &ObjectiveContext) -> Result<DMatrix<f64>> {
    let inv = ctx.xtdx_inverse()?;
    let x = ctx.features.matrix();
    let xtd = DMatrix::from_fn(x.ncols(), x.nrows(), |i, j| x[(j, i)] * ctx.d[j]);
    Ok(x * inv * xtd)
}

/// `J_PB(w) = (X^T D r - B w)^T (X^T D X)^{-1} (X^T D r - B w)`.
pub fn projected_bellman_error(w: &DVector<f64>, ctx: &ObjectiveContext) -> Result<f64> {
    check_len(w, ctx.dim())?;
    let metric = ctx.metric()?;
    let e = &ctx.xtdr - &ctx.b * w;
    Ok(e.dot(&(metric * &e)).max(0.0))
}

/// Gradient of `J_PB` with respect to `w`.
pub fn projected_bellman_gradient(w: &DVector<f64>, ctx: &ObjectiveContext) -> Result<DVector<f64>> {
    check_len(w, ctx.dim())?;
    let metric = ctx.metric()?;
    let e = &ctx.xtdr - &ctx.b * w;
    Ok(-(ctx.b.transpose() * (metric * e)) * 2.0)
}

/// `w* = B^{-1} X^T D r^pi`.
pub fn optimal_w(ctx: &ObjectiveContext) -> Result<DVector<f64>> {
    if linalg::inverse_condition(&ctx.b) < SINGULAR_RCOND {
        return Err(Error::SingularSystem);
    }
    linalg::solve(&ctx.b, &ctx.xtdr).ok_or(Error::SingularSystem)
}

/// One deterministic primal-dual step on the Lagrangian.
pub fn arrow_hurwicz_step(
    theta: &DVector<f64>,
    w: &DVector<f64>,
    ctx: &ObjectiveContext,
    mu_theta: f64,
    mu_w: f64,
) -> (DVector<f64>, DVector<f64>) {
    let x = ctx.features.matrix();
    let bx = ctx.bellman_features();
    let resid = x * theta + &bx * w - &ctx.r_pi;
    let dres = resid.component_mul(&ctx.d);
    let theta_next = theta - (x.transpose() * dres) * mu_theta;
    let dxt = (x * theta).component_mul(&ctx.d);
    let w_next = w + (bx.transpose() * dxt) * mu_w;
    (theta_next, w_next)
}

fn check_len(w: &DVector<f64>, m: usize) -> Result<()> {
    if w.len() != m {
        return Err(Error::DimensionMismatch { context: "parameter length", expected: m, found: w.len() });
    }
    Ok(())
}

/// Precomputed `J_PB` evaluator: writes `J(w) = c - 2 b^T w + w^T Q w` with
/// `Q = B^T W B`, `b = B^T W X^T D r`, `c = r^T D X W X^T D r`, `W` the metric.
///
/// Costs `O(M^2)` per evaluation instead of re-forming the residual.
#[derive(Debug, Clone)]
pub struct PbeEvaluator {
    q: DMatrix<f64>,
    lin: DVector<f64>,
    c: f64,
    metric: DMatrix<f64>,
    b: DMatrix<f64>,
    xtdr: DVector<f64>,
}

impl PbeEvaluator {
    pub fn new(ctx: &ObjectiveContext) -> Result<Self> {
        let metric = ctx.metric()?;
        let wb = &metric * &ctx.b;
        let q = ctx.b.transpose() * &wb;
        let wr = &metric * &ctx.xtdr;
        let lin = ctx.b.transpose() * &wr;
        let c = ctx.xtdr.dot(&wr);
        Ok(Self { q, lin, c, metric, b: ctx.b.clone(), xtdr: ctx.xtdr.clone() })
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        let m = self.lin.len();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += self.q[(i, j)] * w[j];
            }
            quad += w[i] * acc;
            lin += self.lin[i] * w[i];
        }
        let v = self.c - 2.0 * lin + quad;
        // expansion can cancel badly near the optimum; fall back to the residual form
        if v < 1e-8 * self.c.abs().max(1.0) {
            let wv = DVector::from_column_slice(w);
            let e = &self.xtdr - &self.b * wv;
            return e.dot(&(&self.metric * &e)).max(0.0);
        }
        v
    }
}
