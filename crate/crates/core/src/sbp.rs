//! Diagonal-norm SBP operators on Legendre-Gauss-Lobatto points.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 12;

/// 1-D operators for polynomial order `p`. Matrices are dense row-major.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub p: usize,
    pub n: usize,
    pub nodes: Vec<f64>,
    /// Diagonal of the norm matrix.
    pub p_diag: Vec<f64>,
    pub q: Vec<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    /// Two-point backward difference, `n` rows by `n + 1` columns.
    pub delta: Vec<f64>,
    pub flux_nodes: Vec<f64>,
}

fn legendre_row(x: f64, p: usize) -> Vec<f64> {
    let mut l = vec![0.0; p + 1];
    l[0] = 1.0;
    if p >= 1 {
        l[1] = x;
    }
    for k in 2..=p {
        let kf = k as f64;
        l[k] = ((2.0 * kf - 1.0) * x * l[k - 1] - (kf - 1.0) * l[k - 2]) / kf;
    }
    l
}

/// LGL nodes and weights, ascending.
pub fn lgl_nodes_weights(p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = p + 1;
    let pf = p as f64;
    // Chebyshev-Gauss-Lobatto guess, Newton on (1 - x^2) L'_p.
    let mut x: Vec<f64> = (0..n)
        .map(|i| -(std::f64::consts::PI * i as f64 / pf).cos())
        .collect();
    x[0] = -1.0;
    x[p] = 1.0;
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for xi in x.iter_mut().take(p).skip(1) {
            let l = legendre_row(*xi, p);
            let step = (*xi * l[p] - l[p - 1]) / (n as f64 * l[p]);
            *xi -= step;
            change = change.max(step.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    let w = x
        .iter()
        .map(|&xi| {
            let lp = legendre_row(xi, p)[p];
            2.0 / (pf * (pf + 1.0) * lp * lp)
        })
        .collect();
    (x, w)
}

/// Lagrange differentiation matrix on `x` (barycentric, negative-sum diagonal).
pub fn diff_matrix(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let lam: Vec<f64> = (0..n)
        .map(|j| {
            let mut prod = 1.0;
            for k in 0..n {
                if k != j {
                    prod *= x[j] - x[k];
                }
            }
            1.0 / prod
        })
        .collect();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (lam[j] / lam[i]) / (x[i] - x[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

pub fn build_lgl(p: usize) -> Result<OperatorSet> {
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::Config(format!("polynomial order {p} outside 1..={MAX_ORDER}")));
    }
    let n = p + 1;
    let (nodes, p_diag) = lgl_nodes_weights(p);
    let d = diff_matrix(&nodes);
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = p_diag[i] * d[i * n + j];
        }
    }
    let mut b = vec![0.0; n * n];
    b[0] = -1.0;
    b[n * n - 1] = 1.0;
    let mut delta = vec![0.0; n * (n + 1)];
    for i in 0..n {
        delta[i * (n + 1) + i] = -1.0;
        delta[i * (n + 1) + i + 1] = 1.0;
    }
    let mut flux_nodes = vec![-1.0; n + 1];
    for s in 1..n {
        flux_nodes[s] = flux_nodes[s - 1] + p_diag[s - 1];
    }
    flux_nodes[n] = 1.0;
    Ok(OperatorSet { p, n, nodes, p_diag, q, d, b, delta, flux_nodes })
}

static REGISTRY: OnceLock<Vec<Arc<OperatorSet>>> = OnceLock::new();

/// Shared operator set for order `p`, built once for all orders.
pub fn operators(p: usize) -> Result<Arc<OperatorSet>> {
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::Config(format!("polynomial order {p} outside 1..={MAX_ORDER}")));
    }
    let reg = REGISTRY.get_or_init(|| {
        (1..=MAX_ORDER)
            .map(|k| Arc::new(build_lgl(k).expect("order in range")))
            .collect()
    });
    Ok(reg[p - 1].clone())
}

impl OperatorSet {
    #[inline]
    pub fn d_at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    #[inline]
    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    /// `P^-1 Delta fbar`.
    pub fn telescope(&self, fbar: &[f64]) -> Result<Vec<f64>> {
        if fbar.len() != self.n + 1 {
            return Err(Error::Contract(format!(
                "telescope expects {} flux values, got {}",
                self.n + 1,
                fbar.len()
            )));
        }
        Ok((0..self.n).map(|i| (fbar[i + 1] - fbar[i]) / self.p_diag[i]).collect())
    }

    /// `D f` for a single line.
    pub fn differentiate(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|j| self.d[i * n + j] * f[j]).sum()).collect()
    }

    /// Max-norm of `Q + Q^T - B`.
    pub fn sbp_defect(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = self.q[i * n + j] + self.q[j * n + i] - self.b[i * n + j];
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Interpolate nodal values `f` to the point `x` in [-1, 1].
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            let mut l = 1.0;
            for k in 0..n {
                if k != j {
                    l *= (x - self.nodes[k]) / (self.nodes[j] - self.nodes[k]);
                }
            }
            acc += l * f[j];
        }
        acc
    }
}

/// Tensor-product view of an operator set on an `n^3` element.
#[derive(Debug, Clone)]
pub struct TensorOps {
    pub base: Arc<OperatorSet>,
    /// `P_ii P_jj P_kk`, indexed like element data.
    pub weights: Vec<f64>,
}

impl TensorOps {
    pub fn new(base: Arc<OperatorSet>) -> Self {
        let n = base.n;
        let mut weights = vec![0.0; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    weights[i + n * (j + n * k)] = base.p_diag[i] * base.p_diag[j] * base.p_diag[k];
                }
            }
        }
        TensorOps { base, weights }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.base.n
    }

    #[inline]
    pub fn npts(&self) -> usize {
        self.base.n * self.base.n * self.base.n
    }

    /// Stride of direction `dir` (0-based) in element data.
    #[inline]
    pub fn stride(&self, dir: usize) -> usize {
        match dir {
            0 => 1,
            1 => self.base.n,
            _ => self.base.n * self.base.n,
        }
    }

    /// Index of the first point of line `line` (0..n^2) running along `dir`.
    #[inline]
    pub fn line_start(&self, dir: usize, line: usize) -> usize {
        let n = self.base.n;
        let (a, b) = (line % n, line / n);
        match dir {
            0 => n * (a + n * b),
            1 => a + n * n * b,
            _ => a + n * b,
        }
    }

    /// Apply `D` along `dir` to a field with `ncomp` interleaved components.
    pub fn apply_derivative(&self, dir: usize, field: &[f64], ncomp: usize) -> Result<Vec<f64>> {
        let npts = self.npts();
        if field.len() != npts * ncomp {
            return Err(Error::Contract(format!(
                "derivative input has {} values, expected {}",
                field.len(),
                npts * ncomp
            )));
        }
        let n = self.base.n;
        let s = self.stride(dir);
        let mut out = vec![0.0; field.len()];
        for line in 0..n * n {
            let start = self.line_start(dir, line);
            for i in 0..n {
                let oi = start + i * s;
                for j in 0..n {
                    let dij = self.base.d[i * n + j];
                    let fj = start + j * s;
                    for c in 0..ncomp {
                        out[oi * ncomp + c] += dij * field[fj * ncomp + c];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Volume quadrature `1^T P f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}
