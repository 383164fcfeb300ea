//! Nyström discretization of the Lyapunov operator
//! `Lf(t) = Σ_pq w_p w_q K(t,x_p,x_q) f_p f_q` and the normalized operator
//! `Hf = Lf / (Lf)(0)` on grid functions.
//!
//! Off-grid evaluation re-applies the integral formula at the requested
//! `t` (the natural Nyström extension), which preserves positivity; no
//! polynomial interpolation is involved.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::kernel::{KernelError, KernelFn};
use crate::quadrature::QuadratureRule;

/// Kernel values at grid triples are cached up to this total size
/// (`n³ ≤ 2^24`, i.e. 128 MiB); larger rules evaluate on the fly.
const TENSOR_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("grid function value {value} at node {index} is not strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("value vector has length {got}, rule has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("normalizing denominator {denom} underflowed")]
    DenominatorUnderflow { denom: f64 },
    #[error("operator image is not finite at node {index}")]
    NonFinite { index: usize },
}

/// Which fixed-point equation a residual is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `Hf = f`
    H,
    /// `Lf = f`
    L,
}

/// A strictly positive function on `[0,1]` represented by its values at
/// the quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    rule: Arc<QuadratureRule>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(rule: Arc<QuadratureRule>, values: Vec<f64>) -> Result<Self, OperatorError> {
        if values.len() != rule.len() {
            return Err(OperatorError::LengthMismatch {
                got: values.len(),
                expected: rule.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(OperatorError::NonPositive { index: i, value: v });
            }
        }
        Ok(GridFunction { rule, values })
    }

    pub fn constant(rule: Arc<QuadratureRule>, c: f64) -> Result<Self, OperatorError> {
        let n = rule.len();
        Self::new(rule, vec![c; n])
    }

    pub fn from_fn(
        rule: Arc<QuadratureRule>,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, OperatorError> {
        let values = rule.nodes().iter().map(|&x| f(x)).collect();
        Self::new(rule, values)
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max(libm::fabs(a - b)))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Pointwise scaling by a positive constant.
    pub fn scale(&self, c: f64) -> Result<Self, OperatorError> {
        Self::new(
            self.rule.clone(),
            self.values.iter().map(|v| c * v).collect(),
        )
    }
}

/// Dense square matrix in row-major order (the discretized Jacobian).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// The operators `L` and `H` discretized on a fixed rule for a fixed
/// kernel. Kernel values at node triples are precomputed when they fit.
pub struct NystromOperator<'a> {
    kernel: &'a dyn KernelFn,
    rule: Arc<QuadratureRule>,
    /// `K(t_i, x_p, x_q)` row-major in (i,p,q), when cached
    tensor: Option<Vec<f64>>,
    /// `K(0, x_p, x_q)` row-major in (p,q)
    zero_slice: Vec<f64>,
}

// index-based loops here walk several parallel slices at once; the
// iterator forms clippy suggests read worse
#[allow(clippy::needless_range_loop)]
impl<'a> NystromOperator<'a> {
    pub fn new(kernel: &'a dyn KernelFn, rule: Arc<QuadratureRule>) -> Result<Self, OperatorError> {
        let n = rule.len();
        let nodes = rule.nodes();
        let mut zero_slice = Vec::with_capacity(n * n);
        for &u in nodes {
            for &v in nodes {
                zero_slice.push(kernel.eval(0.0, u, v)?);
            }
        }
        let tensor = if n * n * n <= TENSOR_LIMIT {
            let mut data = Vec::with_capacity(n * n * n);
            for &t in nodes {
                for &u in nodes {
                    for &v in nodes {
                        data.push(kernel.eval(t, u, v)?);
                    }
                }
            }
            Some(data)
        } else {
            None
        };
        Ok(NystromOperator {
            kernel,
            rule,
            tensor,
            zero_slice,
        })
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    fn k_node(&self, i: usize, p: usize, q: usize) -> Result<f64, OperatorError> {
        let n = self.rule.len();
        match &self.tensor {
            Some(data) => Ok(data[(i * n + p) * n + q]),
            None => {
                let nodes = self.rule.nodes();
                Ok(self.kernel.eval(nodes[i], nodes[p], nodes[q])?)
            }
        }
    }

    fn check_input(&self, f: &GridFunction) -> Result<(), OperatorError> {
        if f.len() != self.rule.len() {
            return Err(OperatorError::LengthMismatch {
                got: f.len(),
                expected: self.rule.len(),
            });
        }
        Ok(())
    }

    /// `(Lf)(t_i)` at every node.
    pub fn apply_l(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        self.check_input(f)?;
        let n = self.rule.len();
        let w = self.rule.weights();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut sum = 0.0;
            for p in 0..n {
                let fp = w[p] * f.values[p];
                let mut row = 0.0;
                for q in 0..n {
                    row += w[q] * f.values[q] * self.k_node(i, p, q)?;
                }
                sum += fp * row;
            }
            if !sum.is_finite() {
                return Err(OperatorError::NonFinite { index: i });
            }
            out.push(sum);
        }
        GridFunction::new(self.rule.clone(), out)
    }

    /// Nyström extension of `Lf` to arbitrary `t`.
    pub fn l_at(&self, t: f64, f: &GridFunction) -> Result<f64, OperatorError> {
        self.check_input(f)?;
        let nodes = self.rule.nodes();
        let w = self.rule.weights();
        let mut sum = 0.0;
        for (p, &u) in nodes.iter().enumerate() {
            let fp = w[p] * f.values[p];
            let mut row = 0.0;
            for (q, &v) in nodes.iter().enumerate() {
                let k = if t == 0.0 {
                    self.zero_slice[p * nodes.len() + q]
                } else {
                    self.kernel.eval(t, u, v)?
                };
                row += w[q] * f.values[q] * k;
            }
            sum += fp * row;
        }
        Ok(sum)
    }

    /// `∫∫ K(0,u,v) f(u) f(v) du dv`, the normalizing denominator of `H`.
    pub fn denominator(&self, f: &GridFunction) -> Result<f64, OperatorError> {
        self.check_input(f)?;
        let n = self.rule.len();
        let w = self.rule.weights();
        let mut sum = 0.0;
        for p in 0..n {
            let fp = w[p] * f.values[p];
            let mut row = 0.0;
            for q in 0..n {
                row += w[q] * f.values[q] * self.zero_slice[p * n + q];
            }
            sum += fp * row;
        }
        if !(sum.is_finite() && sum > f64::MIN_POSITIVE) {
            return Err(OperatorError::DenominatorUnderflow { denom: sum });
        }
        Ok(sum)
    }

    /// `Hf = Lf / (Lf)(0)`; the image satisfies `(Hf)(0) = 1` by
    /// construction of the denominator.
    pub fn apply_h(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        let lf = self.apply_l(f)?;
        let d = self.denominator(f)?;
        lf.scale(1.0 / d)
    }

    /// Nyström extension of `Hf` to arbitrary `t`.
    pub fn h_at(&self, t: f64, f: &GridFunction) -> Result<f64, OperatorError> {
        let d = self.denominator(f)?;
        Ok(self.l_at(t, f)? / d)
    }

    /// Sup over grid nodes of `|operator image - f|`.
    pub fn residual(&self, f: &GridFunction, eq: Equation) -> Result<f64, OperatorError> {
        let image = match eq {
            Equation::H => self.apply_h(f)?,
            Equation::L => self.apply_l(f)?,
        };
        Ok(image.sup_distance(f))
    }

    /// Entries `∂(Hf)(t_i)/∂f_j` of the discretized `H` by the quotient
    /// rule.
    pub fn jacobian_h(&self, f: &GridFunction) -> Result<Matrix, OperatorError> {
        self.check_input(f)?;
        let n = self.rule.len();
        let w = self.rule.weights();
        let d = self.denominator(f)?;
        let lf = self.apply_l(f)?;
        // dD_j = w_j Σ_q w_q (K0(j,q) + K0(q,j)) f_q
        let mut dd = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for q in 0..n {
                s += w[q] * f.values[q] * (self.zero_slice[j * n + q] + self.zero_slice[q * n + j]);
            }
            dd[j] = w[j] * s;
        }
        let mut jac = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for q in 0..n {
                    s += w[q] * f.values[q] * (self.k_node(i, j, q)? + self.k_node(i, q, j)?);
                }
                let dl = w[j] * s;
                jac.set(i, j, (dl * d - lf.values[i] * dd[j]) / (d * d));
            }
        }
        Ok(jac)
    }
}
