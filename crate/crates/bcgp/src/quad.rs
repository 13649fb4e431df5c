//! Gauss-Hermite quadrature for expectations under a Gaussian law.
//!
//! A k-point rule integrates `exp(-x^2) f(x)` over the real line exactly
//! when `f` is a polynomial of degree at most `2k - 1`.

use nalgebra::DMatrix;

/// Nodes and weights of the k-point Gauss-Hermite rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the rule by the Golub-Welsch method: eigendecomposition of the
    /// symmetric tridiagonal Jacobi matrix with `sqrt(i/2)` off-diagonals.
    ///
    /// Panics if `k == 0`.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "Gauss-Hermite rule needs at least one node");
        if k == 1 {
            return GaussHermite {
                nodes: vec![0.0],
                weights: vec![std::f64::consts::PI.sqrt()],
            };
        }
        let mut jacobi = DMatrix::zeros(k, k);
        for i in 0..k - 1 {
            let off = ((i + 1) as f64 / 2.0).sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
        let eigen = jacobi.symmetric_eigen();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = eigen
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &node)| {
                let v0 = eigen.eigenvectors[(0, i)];
                (node, v0 * v0 * sqrt_pi)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `exp(-x^2) * f(x)` over the real line.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Expectation `E[h(X)]` for `X ~ N(mean, variance)`, mapping each node
    /// through `x = sqrt(2 variance) x_i + mean`.
    pub fn expect_gaussian<F: Fn(f64) -> f64>(&self, mean: f64, variance: f64, h: F) -> f64 {
        let scale = (2.0 * variance).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * h(scale * x + mean))
            .sum::<f64>()
            * inv_sqrt_pi
    }

    /// Fallible variant of [`expect_gaussian`](Self::expect_gaussian): the
    /// integrand sees each mapped node together with its index so callers
    /// can report exactly which node left their domain.
    pub fn try_expect_gaussian<E, F: FnMut(usize, f64) -> Result<f64, E>>(
        &self,
        mean: f64,
        variance: f64,
        mut h: F,
    ) -> Result<f64, E> {
        let scale = (2.0 * variance).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let mut total = 0.0;
        for (i, (&x, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            total += w * h(i, scale * x + mean)?;
        }
        Ok(total * inv_sqrt_pi)
    }
}
