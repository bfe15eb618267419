//! Agent networks: topology, combination weights, Perron vector, and the diffusion
//! GTD recursion with its cooperative and non-cooperative variants.

mod diffusion;
mod experiment;
mod topology;

pub use diffusion::{diffusion_gtd_round, NetworkState};
pub use experiment::{run_experiment, ExperimentSetup, Mode, ReplicaResult, Trace};
pub use topology::Graph;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Graph plus a left-stochastic combination matrix, `c[(l, k)]` being the weight agent
/// `k` gives to neighbor `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    graph: Graph,
    c: DMatrix<f64>,
}

impl Network {
    /// Validates `c` against the graph: nonnegative, columns summing to one, support
    /// inside neighborhoods, some positive self-weight, connected and primitive.
    pub fn new(graph: Graph, c: DMatrix<f64>) -> Result<Self> {
        let n = graph.len();
        if c.shape() != (n, n) {
            return Err(Error::DimensionMismatch { context: "combination matrix", expected: n, found: c.nrows() });
        }
        for k in 0..n {
            let mut sum = 0.0;
            for l in 0..n {
                let v = c[(l, k)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidCombination(format!("entry ({l},{k}) = {v}")));
                }
                if v > 0.0 && !graph.is_neighbor(l, k) {
                    return Err(Error::InvalidCombination(format!("weight on non-neighbor pair ({l},{k})")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidCombination(format!("column {k} sums to {sum}")));
            }
        }
        if !(0..n).any(|k| c[(k, k)] > 0.0) {
            return Err(Error::InvalidCombination("no agent keeps positive self-weight".into()));
        }
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if !is_primitive(&c) {
            return Err(Error::NotPrimitive);
        }
        Ok(Self { graph, c })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn combination(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.len() == 0
    }

    pub fn perron(&self) -> Result<DVector<f64>> {
        perron_eigenvector(&self.c)
    }
}

/// Averaging rule `c_lk = 1 / |N_k|` on the neighbors of `k`.
pub fn averaging_combination_matrix(graph: &Graph) -> Result<Network> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.len();
    let mut c = DMatrix::zeros(n, n);
    for k in 0..n {
        let nb = graph.neighbors(k);
        let w = 1.0 / nb.len() as f64;
        for &l in nb {
            c[(l, k)] = w;
        }
    }
    Network::new(graph.clone(), c)
}

/// Nonnegative square matrix is primitive iff its support graph satisfies Wielandt's
/// bound: `A^((n-1)^2 + 1) > 0` elementwise.
pub fn is_primitive(c: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    if n == 0 {
        return false;
    }
    let support: Vec<bool> = (0..n * n).map(|i| c[(i / n, i % n)] > 0.0).collect();
    let power = (n - 1) * (n - 1) + 1;
    let bool_mul = |a: &[bool], b: &[bool]| {
        let mut out = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if a[i * n + k] {
                    for j in 0..n {
                        if b[k * n + j] {
                            out[i * n + j] = true;
                        }
                    }
                }
            }
        }
        out
    };
    let mut result: Option<Vec<bool>> = None;
    let mut base = support;
    let mut e = power;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => bool_mul(&r, &base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = bool_mul(&base, &base);
        }
    }
    result.is_some_and(|r| r.iter().all(|&b| b))
}

/// Positive right eigenvector of a primitive left-stochastic `C`: `C tau = tau`, entries
/// summing to one.
pub fn perron_eigenvector(c: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = c.nrows();
    if c.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch { context: "combination matrix", expected: n, found: c.ncols() });
    }
    if !is_primitive(c) {
        return Err(Error::NotPrimitive);
    }
    // (C - I) tau = 0 with the last equation replaced by 1^T tau = 1
    let mut a = c - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    a.row_mut(n - 1).fill(1.0);
    rhs[n - 1] = 1.0;
    let mut tau = a.lu().solve(&rhs).ok_or(Error::NotPrimitive)?;
    // polish with power steps; C is a contraction towards tau on the simplex
    for _ in 0..100 {
        let next = c * &tau;
        let res = (&next - &tau).amax();
        tau = next;
        let s = tau.sum();
        tau /= s;
        if res <= 1e-15 {
            break;
        }
    }
    if tau.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPrimitive);
    }
    Ok(tau)
}
