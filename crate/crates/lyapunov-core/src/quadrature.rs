//! Gauss–Legendre quadrature on `[0,1]` and tensorized integration.
//!
//! Nodes are computed by Newton iteration on the Legendre recurrence and
//! mirrored pairwise, so the rule is exactly symmetric about `1/2`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub const MAX_NODES: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("node count {0} outside 1..={MAX_NODES}")]
    NodeCount(usize),
    #[error("integrand is not finite at node ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

/// Gauss–Legendre rule mapped affinely from `[-1,1]` to `[0,1]`.
///
/// Nodes are strictly increasing in `(0,1)`; weights are positive and sum
/// to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the `n`-point Gauss–Legendre rule on `[0,1]`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule, QuadratureError> {
    if !(1..=MAX_NODES).contains(&n) {
        return Err(QuadratureError::NodeCount(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root of P_n on [-1,1]
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if libm::fabs(dz) < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        let hi = n - 1 - i;
        if i == hi {
            nodes[i] = 0.5;
        } else {
            nodes[hi] = (1.0 + z) / 2.0;
            nodes[i] = (1.0 - z) / 2.0;
        }
        weights[i] = w / 2.0;
        weights[hi] = w / 2.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

impl QuadratureRule {
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

    /// `Σ_i w_i g(x_i)`.
    pub fn integrate_1d(&self, g: impl Fn(f64) -> f64) -> Result<f64, QuadratureError> {
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = g(x);
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x, y: f64::NAN });
            }
            sum += w * v;
        }
        Ok(sum)
    }

    /// `Σ_ij w_i w_j g(x_i, x_j)`, accumulated in node order.
    pub fn integrate_2d(&self, g: impl Fn(f64, f64) -> f64) -> Result<f64, QuadratureError> {
        let mut sum = 0.0;
        for (&x, &wx) in self.nodes.iter().zip(&self.weights) {
            let mut row = 0.0;
            for (&y, &wy) in self.nodes.iter().zip(&self.weights) {
                let v = g(x, y);
                if !v.is_finite() {
                    return Err(QuadratureError::NonFinite { x, y });
                }
                row += wy * v;
            }
            sum += wx * row;
        }
        Ok(sum)
    }
}
