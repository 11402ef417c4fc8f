//! Gauss–Hermite quadrature for expectations over a normal distribution.
//!
//! Nodes and weights of the physicists' rule (weight `exp(-x^2)`) come from
//! the Golub–Welsch algorithm: the nodes are the eigenvalues of the symmetric
//! tridiagonal Jacobi matrix with off-diagonal entries `sqrt(k/2)`, and each
//! weight is `sqrt(pi)` times the squared first component of the matching
//! unit eigenvector.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Number of nodes used for the decision integral.
pub const DEFAULT_NODES: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], sqrt_pi * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    /// The cached 7-node rule.
    pub fn seven() -> &'static Self {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(Y)]` for `Y ~ N(mean, variance)`, normalized by the weight sum so a
    /// constant integrand is reproduced exactly.
    pub fn expect_normal(&self, mean: f64, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        let spread = (2.0 * variance.max(0.0)).sqrt();
        let mut total = 0.0;
        let mut wsum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            total += w * f(mean + spread * x);
            wsum += w;
        }
        total / wsum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 7, 12] {
            let r = GaussHermite::new(n);
            let s: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(s, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn seven_point_nodes() {
        // Largest root of H_7 and its weight.
        let r = GaussHermite::seven();
        assert_abs_diff_eq!(r.nodes[6], 2.651_961_356_835_233_5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.weights[6], 9.717_812_450_995_192e-4, epsilon = 1e-14);
        assert_abs_diff_eq!(r.nodes[3], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.nodes[0], -r.nodes[6], epsilon = 1e-13);
    }

    #[test]
    fn polynomial_moments_exact() {
        let r = GaussHermite::seven();
        let (m, v) = (1.5, 4.0);
        assert_abs_diff_eq!(r.expect_normal(m, v, |y| y), m, epsilon = 1e-12);
        assert_abs_diff_eq!(
            r.expect_normal(m, v, |y| (y - m).powi(2)),
            v,
            epsilon = 1e-11
        );
        assert_abs_diff_eq!(
            r.expect_normal(m, v, |y| (y - m).powi(4)),
            3.0 * v * v,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(r.expect_normal(m, 0.0, |y| y * y), m * m, epsilon = 1e-12);
    }
}
