//! Quality-augmented DPP kernels and the log-determinant batch loss.
//!
//! For a batch `x_1..x_n` with qualities `q_i`, the batch kernel is
//!
//! ```text
//! L(i, j) = k(x_i, x_j) * (q_i * q_j)^gamma0      (+ jitter on the diagonal)
//! ```
//!
//! and the loss is `-logdet(L) / n`. The feature vectors behind the
//! similarity (`k(x, y) = <phi(x), phi(y)>`, unit norm) are never
//! materialized; they exist only through the RBF kernel.
//!
//! Loss and gradients share one Cholesky factorization. Writing `M = L^-1`
//! and `f_i = q_i^gamma0`, the gradient with respect to a position is
//!
//! ```text
//! dloss/dx_a = 2 / (n h^2) * sum_j M(a, j) L(a, j) (x_a - x_j)
//! ```
//!
//! and with respect to a quality
//!
//! ```text
//! dloss/dq_a = -2 gamma0 / n * q_a^(gamma0 - 1) * sum_j M(a, j) k(a, j) f_j
//! ```
//!
//! which is chained through `dq/dx` to give the full per-design gradient.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::quality::Point;
use crate::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-6;

/// `exp(-||x - y||^2 / (2 h^2))`.
#[inline]
pub fn rbf_similarity(x: &Point, y: &Point, bandwidth: f64) -> f64 {
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    (-0.5 * d2 / (bandwidth * bandwidth)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
}

/// Pairwise similarity with `k(x, x) = 1` and values in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityKernel {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl SimilarityKernel {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(SimilarityKernel {
            kind: KernelKind::Rbf,
            bandwidth,
        })
    }

    #[inline]
    pub fn similarity(&self, x: &Point, y: &Point) -> f64 {
        match self.kind {
            KernelKind::Rbf => rbf_similarity(x, y, self.bandwidth),
        }
    }

    /// Full similarity matrix of a point set.
    pub fn matrix(&self, points: &[Point]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..i {
                let v = self.similarity(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

impl Default for SimilarityKernel {
    fn default() -> Self {
        SimilarityKernel {
            kind: KernelKind::Rbf,
            bandwidth: 1.0,
        }
    }
}

/// The quality-augmented kernel of one batch.
#[derive(Debug, Clone)]
pub struct BatchKernel {
    matrix: DMatrix<f64>,
    similarity: DMatrix<f64>,
    /// `q_i^gamma0` per design.
    quality_factors: Vec<f64>,
    gamma0: f64,
    jitter: f64,
}

impl BatchKernel {
    /// Wraps an explicit symmetric matrix (no quality factors, no jitter).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel must be square and non-empty, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput("kernel matrix is not symmetric".into()));
                }
            }
        }
        Ok(BatchKernel {
            similarity: matrix.clone(),
            matrix,
            quality_factors: vec![1.0; n],
            gamma0: 0.0,
            jitter: 0.0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn similarity(&self) -> &DMatrix<f64> {
        &self.similarity
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Cholesky factorization of the (jittered) kernel.
    pub fn factorize(&self) -> Result<KernelFactor> {
        Cholesky::new(self.matrix.clone())
            .map(|chol| KernelFactor { chol })
            .ok_or(Error::NotPositiveDefinite { size: self.size() })
    }
}

/// A factorized batch kernel; the source of both logdet and inverse.
pub struct KernelFactor {
    chol: Cholesky<f64, Dyn>,
}

impl KernelFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Builds `L(i, j) = k(x_i, x_j) (q_i q_j)^gamma0`, plus `jitter` on the diagonal.
pub fn build_kernel(
    points: &[Point],
    qualities: &[f64],
    gamma0: f64,
    kernel: &SimilarityKernel,
    jitter: f64,
) -> Result<BatchKernel> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if points.len() != qualities.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} qualities",
            points.len(),
            qualities.len()
        )));
    }
    if let Some(q) = qualities.iter().find(|q| !(**q >= 0.0) || !q.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "qualities must be finite and non-negative, got {q}"
        )));
    }
    if !(gamma0 >= 0.0) || !(jitter >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma0 and jitter must be non-negative (got {gamma0}, {jitter})"
        )));
    }
    let n = points.len();
    let similarity = kernel.matrix(points);
    let quality_factors: Vec<f64> = if gamma0 == 0.0 {
        vec![1.0; n]
    } else {
        qualities.iter().map(|q| q.powf(gamma0)).collect()
    };
    let mut matrix = DMatrix::from_fn(n, n, |i, j| {
        similarity[(i, j)] * quality_factors[i] * quality_factors[j]
    });
    for i in 0..n {
        matrix[(i, i)] += jitter;
    }
    Ok(BatchKernel {
        matrix,
        similarity,
        quality_factors,
        gamma0,
        jitter,
    })
}

/// `-logdet(L) / n`.
pub fn pad_loss(kernel: &BatchKernel) -> Result<f64> {
    let factor = kernel.factorize()?;
    Ok(-factor.log_det() / kernel.size() as f64)
}

/// Gradient of [`pad_loss`] with respect to each design, including the
/// quality channel chained through `quality_gradients`.
pub fn pad_loss_gradients(
    kernel: &BatchKernel,
    points: &[Point],
    qualities: &[f64],
    quality_gradients: &[Point],
    similarity: &SimilarityKernel,
) -> Result<Vec<Point>> {
    let factor = kernel.factorize()?;
    gradients_with_factor(
        kernel,
        &factor,
        points,
        qualities,
        quality_gradients,
        similarity,
    )
}

/// Loss and gradients from a single factorization.
pub fn pad_loss_and_gradients(
    kernel: &BatchKernel,
    points: &[Point],
    qualities: &[f64],
    quality_gradients: &[Point],
    similarity: &SimilarityKernel,
) -> Result<(f64, Vec<Point>)> {
    let factor = kernel.factorize()?;
    let loss = -factor.log_det() / kernel.size() as f64;
    let grads = gradients_with_factor(
        kernel,
        &factor,
        points,
        qualities,
        quality_gradients,
        similarity,
    )?;
    Ok((loss, grads))
}

fn gradients_with_factor(
    kernel: &BatchKernel,
    factor: &KernelFactor,
    points: &[Point],
    qualities: &[f64],
    quality_gradients: &[Point],
    similarity: &SimilarityKernel,
) -> Result<Vec<Point>> {
    let n = kernel.size();
    if points.len() != n || qualities.len() != n || quality_gradients.len() != n {
        return Err(Error::Dimension(format!(
            "kernel of size {n} but {} points, {} qualities, {} quality gradients",
            points.len(),
            qualities.len(),
            quality_gradients.len()
        )));
    }
    let inv = factor.inverse();
    let nf = n as f64;
    let h2 = similarity.bandwidth * similarity.bandwidth;
    let gamma0 = kernel.gamma0;
    let mut grads = vec![[0.0, 0.0]; n];
    for a in 0..n {
        let mut g = [0.0, 0.0];
        let mut quality_sum = 0.0;
        for j in 0..n {
            let m = inv[(a, j)];
            if j != a {
                // off-diagonal entries carry no jitter
                let w = m * kernel.matrix[(a, j)];
                g[0] += w * (points[a][0] - points[j][0]);
                g[1] += w * (points[a][1] - points[j][1]);
            }
            quality_sum += m * kernel.similarity[(a, j)] * kernel.quality_factors[j];
        }
        let scale = 2.0 / (nf * h2);
        g[0] *= scale;
        g[1] *= scale;
        if gamma0 != 0.0 {
            let q = if gamma0 < 1.0 {
                qualities[a].max(f64::MIN_POSITIVE)
            } else {
                qualities[a]
            };
            let dq = -2.0 * gamma0 / nf * q.powf(gamma0 - 1.0) * quality_sum;
            g[0] += dq * quality_gradients[a][0];
            g[1] += dq * quality_gradients[a][1];
        }
        grads[a] = g;
    }
    if grads.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("DPP loss gradients"));
    }
    Ok(grads)
}

/// `det(L_S) / det(L + I)`: the L-ensemble probability of drawing exactly `subset`.
pub fn subset_probability(l: &DMatrix<f64>, subset: &[usize]) -> Result<f64> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::Dimension("L must be square".into()));
    }
    if subset.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("subset index out of range".into()));
    }
    let normalizer = (l + DMatrix::<f64>::identity(n, n)).determinant();
    Ok(principal_minor(l, subset) / normalizer)
}

/// `det(L_S)`; the empty minor is 1.
pub fn principal_minor(l: &DMatrix<f64>, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 1.0;
    }
    let k = subset.len();
    DMatrix::from_fn(k, k, |i, j| l[(subset[i], subset[j])]).determinant()
}
