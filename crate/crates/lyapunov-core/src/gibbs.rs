//! Finite-volume Gibbs distributions on the rooted tree and the residuals
//! tying them to the fixed-point equation.
//!
//! The tree is the rooted half-tree: every vertex, including the root,
//! has exactly `k` successors, so each successor set is a full `k`-tuple
//! and the triple/second-neighbor structure closes at every vertex.
//! Boundary terms `h(t) = ln f(t)` attach to the outermost shell `W_n`;
//! for the depth-0 volume that shell is the root itself, which is what
//! makes the depth 1 → 0 marginalization reproduce the fixed-point
//! normalization at `t = 0`.
//!
//! Interaction argument order follows the kernel: the parent spin comes
//! first in the triple term and in the nearest-neighbor term.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::kernel::ModelParams;
use crate::operators::{Equation, GridFunction, NystromOperator, OperatorError};
use crate::quadrature::QuadratureRule;

/// Tensor-quadrature state-count ceiling for tree integrals.
pub const MAX_TENSOR_STATES: u128 = 100_000_000;

/// Points per interior vertex in the compatibility sup-grid.
const INTERIOR_GRID: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GibbsError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("spin {value} at vertex {vertex} outside [0,1]")]
    SpinOutOfRange { vertex: usize, value: f64 },
    #[error("configuration has {got} spins, tree has {expected} vertices")]
    ConfigLength { got: usize, expected: usize },
    #[error("tensor quadrature would need {states} states (limit {MAX_TENSOR_STATES})")]
    Infeasible { states: u128 },
    #[error("boundary field is not positive at t={t} (value {value})")]
    NonPositiveField { t: f64, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Expr(#[from] EvalError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// The first `n+1` shells of the rooted half-tree of branching order `k`,
/// with heap indexing: the successors of vertex `x` are `k·x+1 ..= k·x+k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    k: usize,
    depth: usize,
    /// shell m occupies indices `shell_starts[m] .. shell_starts[m+1]`
    shell_starts: Vec<usize>,
    /// nearest-neighbor edges (parent, child) within the volume
    edges: Vec<(usize, usize)>,
    /// second neighbors: sibling pairs (same parent, same shell)
    sibling_pairs: Vec<(usize, usize)>,
    /// triples (parent, child, child) over each successor pair
    triples: Vec<(usize, usize, usize)>,
}

impl RootedTree {
    pub fn new(k: usize, depth: usize) -> Result<Self, GibbsError> {
        if k < 1 {
            return Err(GibbsError::InvalidTree(
                "branching order must be at least 1".to_string(),
            ));
        }
        let mut shell_starts = vec![0usize];
        let mut shell_size = 1usize;
        for _ in 0..=depth {
            let last = *shell_starts.last().unwrap();
            let next = last
                .checked_add(shell_size)
                .ok_or_else(|| GibbsError::InvalidTree("tree too large".to_string()))?;
            shell_starts.push(next);
            shell_size = shell_size
                .checked_mul(k)
                .ok_or_else(|| GibbsError::InvalidTree("tree too large".to_string()))?;
        }
        let vertex_count = shell_starts[depth + 1];
        if vertex_count > 64 {
            return Err(GibbsError::InvalidTree(alloc::format!(
                "{vertex_count} vertices exceed the desk-scale limit of 64"
            )));
        }
        let mut edges = Vec::new();
        let mut sibling_pairs = Vec::new();
        let mut triples = Vec::new();
        for x in 0..shell_starts[depth] {
            for c in 1..=k {
                edges.push((x, k * x + c));
            }
            for a in 1..=k {
                for b in (a + 1)..=k {
                    sibling_pairs.push((k * x + a, k * x + b));
                    triples.push((x, k * x + a, k * x + b));
                }
            }
        }
        Ok(RootedTree {
            k,
            depth,
            shell_starts,
            edges,
            sibling_pairs,
            triples,
        })
    }

    pub fn branching(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vertex_count(&self) -> usize {
        self.shell_starts[self.depth + 1]
    }

    /// Index range of shell `m`.
    pub fn shell(&self, m: usize) -> core::ops::Range<usize> {
        self.shell_starts[m]..self.shell_starts[m + 1]
    }

    /// Index range of the boundary shell `W_n`.
    pub fn boundary(&self) -> core::ops::Range<usize> {
        self.shell(self.depth)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn sibling_pairs(&self) -> &[(usize, usize)] {
        &self.sibling_pairs
    }

    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }
}

/// Hamiltonian of a configuration on the full volume (β not applied).
///
/// Sums range over the triples, sibling pairs, edges and vertices of the
/// volume, each unordered object counted once.
pub fn energy(tree: &RootedTree, config: &[f64], params: &ModelParams) -> Result<f64, GibbsError> {
    if config.len() != tree.vertex_count() {
        return Err(GibbsError::ConfigLength {
            got: config.len(),
            expected: tree.vertex_count(),
        });
    }
    for (i, &s) in config.iter().enumerate() {
        if !(0.0..=1.0).contains(&s) {
            return Err(GibbsError::SpinOutOfRange {
                vertex: i,
                value: s,
            });
        }
    }
    let mut e = 0.0;
    if params.j3 != 0.0 {
        for &(p, a, b) in &tree.triples {
            e -= params.j3 * params.xi1.eval(&[config[p], config[a], config[b]])?;
        }
    }
    if params.j != 0.0 {
        for &(a, b) in &tree.sibling_pairs {
            e -= params.j * params.xi2.eval(&[config[a], config[b]])?;
        }
    }
    if params.j1 != 0.0 {
        for &(p, c) in &tree.edges {
            e -= params.j1 * params.xi3.eval(&[config[p], config[c]])?;
        }
    }
    if params.alpha != 0.0 {
        e -= params.alpha * config.iter().sum::<f64>();
    }
    Ok(e)
}

/// A translation-invariant boundary field, evaluable at arbitrary spin
/// values in `[0,1]`.
pub trait BoundaryField {
    /// `h(t) = ln f(t)`.
    fn log_f(&self, t: f64) -> Result<f64, GibbsError>;
}

/// Field carried by a solved grid function; off-node values come from
/// the Nyström extension of the operator image, which agrees with the
/// grid values on the solved manifold.
pub struct SolvedField<'a> {
    pub op: &'a NystromOperator<'a>,
    pub f: &'a GridFunction,
}

impl BoundaryField for SolvedField<'_> {
    fn log_f(&self, t: f64) -> Result<f64, GibbsError> {
        let v = self.op.h_at(t, self.f)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(GibbsError::NonPositiveField { t, value: v });
        }
        Ok(libm::log(v))
    }
}

/// Field given in closed form as an expression in `t`.
pub struct ExprField<'a>(pub &'a Expression);

impl BoundaryField for ExprField<'_> {
    fn log_f(&self, t: f64) -> Result<f64, GibbsError> {
        let v = self.0.eval(&[t])?;
        if !(v.is_finite() && v > 0.0) {
            return Err(GibbsError::NonPositiveField { t, value: v });
        }
        Ok(libm::log(v))
    }
}

/// Memoizes field evaluations; tree integrals revisit the same few spin
/// values (quadrature nodes and sup-grid points) many times, and a solved
/// field pays an operator extension per distinct value.
struct MemoField<'a> {
    inner: &'a dyn BoundaryField,
    cache: core::cell::RefCell<Vec<(f64, f64)>>,
}

impl MemoField<'_> {
    fn log_f(&self, t: f64) -> Result<f64, GibbsError> {
        if let Some(&(_, v)) = self.cache.borrow().iter().find(|(key, _)| *key == t) {
            return Ok(v);
        }
        let v = self.inner.log_f(t)?;
        self.cache.borrow_mut().push((t, v));
        Ok(v)
    }
}

/// The distribution μ⁽ⁿ⁾ on configurations of the depth-`n` volume, with
/// the partition function evaluated by tensor quadrature.
///
/// All exponentials are rescaled by the maximum exponent before
/// normalization, so large β cancels instead of overflowing.
pub struct GibbsDistribution<'a> {
    tree: &'a RootedTree,
    params: &'a ModelParams,
    field: MemoField<'a>,
    rule: &'a QuadratureRule,
    log_z: f64,
}

impl<'a> GibbsDistribution<'a> {
    pub fn new(
        tree: &'a RootedTree,
        params: &'a ModelParams,
        field: &'a dyn BoundaryField,
        rule: &'a QuadratureRule,
    ) -> Result<Self, GibbsError> {
        check_states(pow_u128(rule.len(), tree.vertex_count())?)?;
        let mut dist = GibbsDistribution {
            tree,
            params,
            field: MemoField {
                inner: field,
                cache: core::cell::RefCell::new(Vec::new()),
            },
            rule,
            log_z: 0.0,
        };
        // pass 1: maximum exponent over the tensor grid
        let mut max_e = f64::NEG_INFINITY;
        dist.for_each_state(|_, _, exponent| {
            max_e = max_e.max(exponent);
            Ok(())
        })?;
        // pass 2: shifted sum
        let mut sum = 0.0;
        dist.for_each_state(|_, weight, exponent| {
            sum += weight * libm::exp(exponent - max_e);
            Ok(())
        })?;
        dist.log_z = max_e + libm::log(sum);
        Ok(dist)
    }

    /// `−β H(σ) + Σ_{x ∈ W_n} ln f(σ(x))`.
    fn log_unnormalized(&self, config: &[f64]) -> Result<f64, GibbsError> {
        let mut e = -self.params.beta * energy(self.tree, config, self.params)?;
        for x in self.tree.boundary() {
            e += self.field.log_f(config[x])?;
        }
        Ok(e)
    }

    /// Iterates over every tensor-grid configuration, passing the spin
    /// vector, its tensor weight and its unnormalized exponent, in a
    /// fixed deterministic order.
    fn for_each_state(
        &self,
        mut visit: impl FnMut(&[f64], f64, f64) -> Result<(), GibbsError>,
    ) -> Result<(), GibbsError> {
        let nv = self.tree.vertex_count();
        let q = self.rule.len();
        let nodes = self.rule.nodes();
        let weights = self.rule.weights();
        let mut digits = vec![0usize; nv];
        let mut spins = vec![nodes[0]; nv];
        loop {
            let weight: f64 = digits.iter().map(|&d| weights[d]).product();
            let exponent = self.log_unnormalized(&spins)?;
            visit(&spins, weight, exponent)?;
            let mut i = 0;
            loop {
                if i == nv {
                    return Ok(());
                }
                digits[i] += 1;
                if digits[i] < q {
                    spins[i] = nodes[digits[i]];
                    break;
                }
                digits[i] = 0;
                spins[i] = nodes[0];
                i += 1;
            }
        }
    }

    pub fn log_partition_function(&self) -> f64 {
        self.log_z
    }

    pub fn partition_function(&self) -> f64 {
        libm::exp(self.log_z)
    }

    /// Density of `config` under μ⁽ⁿ⁾.
    pub fn density(&self, config: &[f64]) -> Result<f64, GibbsError> {
        Ok(libm::exp(self.log_unnormalized(config)? - self.log_z))
    }

    /// Tensor-quadrature integral of the density; 1 up to quadrature
    /// arithmetic by construction of Z.
    pub fn density_integral(&self) -> Result<f64, GibbsError> {
        let mut sum = 0.0;
        self.for_each_state(|_, weight, exponent| {
            sum += weight * libm::exp(exponent - self.log_z);
            Ok(())
        })?;
        Ok(sum)
    }
}

fn pow_u128(base: usize, exp: usize) -> Result<u128, GibbsError> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc
            .checked_mul(base as u128)
            .ok_or(GibbsError::Infeasible { states: u128::MAX })?;
    }
    Ok(acc)
}

fn check_states(states: u128) -> Result<(), GibbsError> {
    if states > MAX_TENSOR_STATES {
        return Err(GibbsError::Infeasible { states });
    }
    Ok(())
}

/// Pre-flight feasibility guard: fails if either the partition sum or
/// the compatibility marginalization sweep would exceed the tensor
/// state budget for this tree and spin-node count.
pub fn check_feasibility(tree: &RootedTree, spin_nodes: usize) -> Result<(), GibbsError> {
    check_states(pow_u128(spin_nodes, tree.vertex_count())?)?;
    if tree.depth() >= 1 {
        let n_boundary = tree.boundary().len();
        let n_interior = tree.vertex_count() - n_boundary;
        let states = pow_u128(INTERIOR_GRID, n_interior)?
            .checked_mul(pow_u128(spin_nodes, n_boundary)?)
            .ok_or(GibbsError::Infeasible { states: u128::MAX })?;
        check_states(states)?;
    }
    Ok(())
}

/// Sup over a coarse grid of interior configurations of
/// `|∫ μ⁽ⁿ⁾(σ ∨ ω) dλ(ω) − μ⁽ⁿ⁻¹⁾(σ)|`, marginalizing the boundary
/// spins by tensor quadrature.
pub fn compatibility_residual(
    tree: &RootedTree,
    params: &ModelParams,
    field: &dyn BoundaryField,
    rule: &QuadratureRule,
) -> Result<f64, GibbsError> {
    if tree.depth() == 0 {
        return Err(GibbsError::Precondition(
            "compatibility needs depth >= 1".to_string(),
        ));
    }
    let inner_tree = RootedTree::new(tree.branching(), tree.depth() - 1)?;
    let n_interior = inner_tree.vertex_count();
    let boundary = tree.boundary();
    let n_boundary = boundary.len();
    let q = rule.len();
    let states = pow_u128(INTERIOR_GRID, n_interior)?
        .checked_mul(pow_u128(q, n_boundary)?)
        .ok_or(GibbsError::Infeasible { states: u128::MAX })?;
    check_states(states)?;

    let outer = GibbsDistribution::new(tree, params, field, rule)?;
    let inner = GibbsDistribution::new(&inner_tree, params, field, rule)?;

    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut config = vec![0.0; tree.vertex_count()];
    let mut interior_digits = vec![0usize; n_interior];
    let mut worst: f64 = 0.0;
    loop {
        for (i, &d) in interior_digits.iter().enumerate() {
            config[i] = d as f64 / (INTERIOR_GRID - 1) as f64;
        }
        // marginalize the boundary spins
        let mut marginal = 0.0;
        let mut boundary_digits = vec![0usize; n_boundary];
        loop {
            let mut weight = 1.0;
            for (b, &d) in boundary_digits.iter().enumerate() {
                config[boundary.start + b] = nodes[d];
                weight *= weights[d];
            }
            marginal += weight * outer.density(&config)?;
            let mut i = 0;
            loop {
                if i == n_boundary {
                    break;
                }
                boundary_digits[i] += 1;
                if boundary_digits[i] < q {
                    break;
                }
                boundary_digits[i] = 0;
                i += 1;
            }
            if boundary_digits.iter().all(|&d| d == 0) {
                break;
            }
        }
        let reference = inner.density(&config[..n_interior])?;
        worst = worst.max(libm::fabs(marginal - reference));
        let mut i = 0;
        loop {
            if i == n_interior {
                return Ok(worst);
            }
            interior_digits[i] += 1;
            if interior_digits[i] < INTERIOR_GRID {
                break;
            }
            interior_digits[i] = 0;
            i += 1;
        }
    }
}

/// The Gibbs-facing name for the fixed-point residual: for a
/// translation-invariant field this is `sup |Hf − f|` on the grid.
pub fn consistency_residual(op: &NystromOperator<'_>, f: &GridFunction) -> Result<f64, GibbsError> {
    Ok(op.residual(f, Equation::H)?)
}

/// Checks the product reduction available when only the nearest-neighbor
/// coupling survives: `Hf(t)` must equal the squared ratio of 1-D
/// integrals `∫ e^{J1·β·ξ3(t,u)} f(u) du / ∫ e^{J1·β·ξ3(0,u)} f(u) du`.
/// Returns the sup of the mismatch over a 101-point `t`-grid.
pub fn product_form_check(
    op: &NystromOperator<'_>,
    params: &ModelParams,
    f: &GridFunction,
) -> Result<f64, GibbsError> {
    if params.j3 != 0.0 || params.j != 0.0 || params.alpha != 0.0 {
        return Err(GibbsError::Precondition(
            "product form requires J3 = J = alpha = 0".to_string(),
        ));
    }
    if params.j1 == 0.0 {
        return Err(GibbsError::Precondition(
            "product form requires J1 != 0".to_string(),
        ));
    }
    let rule = f.rule();
    let factor = |t: f64| -> Result<f64, GibbsError> {
        let mut sum = 0.0;
        for (&u, (&w, &fv)) in rule
            .nodes()
            .iter()
            .zip(rule.weights().iter().zip(f.values()))
        {
            sum += w * fv * libm::exp(params.j1 * params.beta * params.xi3.eval(&[t, u])?);
        }
        Ok(sum)
    };
    let denom = factor(0.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let lhs = op.h_at(t, f)?;
        let ratio = factor(t)? / denom;
        worst = worst.max(libm::fabs(lhs - ratio * ratio));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelFn};
    use crate::quadrature::gauss_legendre;
    use crate::solver::{solve_h, SolverConfig};
    use alloc::sync::Arc;

    #[allow(clippy::too_many_arguments)]
    fn params(
        j3: f64,
        j: f64,
        j1: f64,
        alpha: f64,
        beta: f64,
        xi1: &str,
        xi2: &str,
        xi3: &str,
    ) -> ModelParams {
        ModelParams {
            j3,
            j,
            j1,
            alpha,
            beta,
            xi1: Expression::parse(xi1, &['t', 'u', 'v']).unwrap(),
            xi2: Expression::parse(xi2, &['u', 'v']).unwrap(),
            xi3: Expression::parse(xi3, &['t', 'u']).unwrap(),
        }
    }

    struct UnitField;
    impl BoundaryField for UnitField {
        fn log_f(&self, _: f64) -> Result<f64, GibbsError> {
            Ok(0.0)
        }
    }

    #[test]
    fn tree_counts() {
        let t = RootedTree::new(2, 1).unwrap();
        assert_eq!(t.vertex_count(), 3);
        assert_eq!(t.boundary(), 1..3);
        assert_eq!(t.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(t.sibling_pairs(), &[(1, 2)]);
        assert_eq!(t.triples(), &[(0, 1, 2)]);

        let t = RootedTree::new(3, 2).unwrap();
        assert_eq!(t.vertex_count(), 13);
        for m in 0..=2 {
            assert_eq!(t.shell(m).len(), 3usize.pow(m as u32));
        }
        // every triple's pair is a sibling pair; counts match
        assert_eq!(t.triples().len(), t.sibling_pairs().len());
        let per_vertex = 3 * (3 - 1) / 2;
        assert_eq!(t.sibling_pairs().len(), (1 + 3) * per_vertex);
    }

    #[test]
    fn energy_alpha_only() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.0, 0.0, 0.0, 1.0, 1.0, "0", "0", "0");
        let e = energy(&tree, &[1.0, 1.0, 1.0], &p).unwrap();
        assert_eq!(e, -3.0);
    }

    #[test]
    fn energy_all_unit_couplings() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(1.0, 1.0, 1.0, 1.0, 1.0, "t*u*v", "u*v", "t*u");
        // 1 triple + 1 pair + 2 edges + 3 vertices, all terms 1 at σ≡1
        let e = energy(&tree, &[1.0, 1.0, 1.0], &p).unwrap();
        assert_eq!(e, -7.0);
    }

    #[test]
    fn energy_vanishes_at_zero_spins() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(2.0, 3.0, 4.0, 5.0, 1.0, "t*u*v", "u*v", "t*u");
        assert_eq!(energy(&tree, &[0.0, 0.0, 0.0], &p).unwrap(), 0.0);
    }

    #[test]
    fn energy_sibling_relabeling_invariance() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(1.0, 0.5, 0.25, 0.125, 1.0, "t*u*v", "u*v", "t*u");
        let a = energy(&tree, &[0.3, 0.9, 0.2], &p).unwrap();
        let b = energy(&tree, &[0.3, 0.2, 0.9], &p).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn energy_rejects_bad_spins() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.0, 0.0, 0.0, 1.0, 1.0, "0", "0", "0");
        assert!(matches!(
            energy(&tree, &[0.5, 1.5, 0.5], &p),
            Err(GibbsError::SpinOutOfRange { vertex: 1, .. })
        ));
        assert!(matches!(
            energy(&tree, &[0.5, 0.5], &p),
            Err(GibbsError::ConfigLength { .. })
        ));
    }

    #[test]
    fn flat_distribution() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.0, 0.0, 0.0, 0.0, 1.0, "0", "0", "0");
        let rule = gauss_legendre(8).unwrap();
        let dist = GibbsDistribution::new(&tree, &p, &UnitField, &rule).unwrap();
        assert!((dist.partition_function() - 1.0).abs() < 1e-12);
        for cfg in [[0.1, 0.5, 0.9], [0.0, 0.0, 0.0]] {
            assert!((dist.density(&cfg).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_zero_closed_form() {
        // only the α term: Z_0 = ∫ e^{βσ} dσ = e − 1 for α = β = 1, f ≡ 1
        let tree = RootedTree::new(2, 0).unwrap();
        let p = params(0.0, 0.0, 0.0, 1.0, 1.0, "0", "0", "0");
        let rule = gauss_legendre(16).unwrap();
        let dist = GibbsDistribution::new(&tree, &p, &UnitField, &rule).unwrap();
        let expected = core::f64::consts::E - 1.0;
        assert!((dist.partition_function() - expected).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.3, 0.2, 0.4, 0.1, 1.3, "t*u*v", "u*v", "t*u");
        let rule = gauss_legendre(8).unwrap();
        let dist = GibbsDistribution::new(&tree, &p, &UnitField, &rule).unwrap();
        assert!((dist.density_integral().unwrap() - 1.0).abs() < 1e-10);
        assert!(dist.partition_function() > 0.0);
        assert!(dist.log_partition_function().is_finite());
    }

    #[test]
    fn partition_function_quadrature_convergence() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.0, 0.0, 0.5, 0.3, 1.0, "0", "0", "t*u");
        let z8 = GibbsDistribution::new(&tree, &p, &UnitField, &gauss_legendre(8).unwrap())
            .unwrap()
            .partition_function();
        let z16 = GibbsDistribution::new(&tree, &p, &UnitField, &gauss_legendre(16).unwrap())
            .unwrap()
            .partition_function();
        assert!((z8 - z16).abs() <= 1e-8 * z16.abs());
    }

    #[test]
    fn feasibility_guard() {
        let tree = RootedTree::new(3, 2).unwrap(); // 13 vertices
        let p = params(0.0, 0.0, 0.0, 0.0, 1.0, "0", "0", "0");
        let rule = gauss_legendre(16).unwrap(); // 16^13 states
        assert!(matches!(
            GibbsDistribution::new(&tree, &p, &UnitField, &rule),
            Err(GibbsError::Infeasible { .. })
        ));
    }

    #[test]
    fn compatibility_zero_couplings() {
        let tree = RootedTree::new(2, 1).unwrap();
        let p = params(0.0, 0.0, 0.0, 0.0, 1.0, "0", "0", "0");
        let rule = gauss_legendre(8).unwrap();
        let r = compatibility_residual(&tree, &p, &UnitField, &rule).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn compatibility_solved_field_small_perturbed_large() {
        let p = params(0.0, 0.0, 1.0, 0.0, 0.05, "0", "0", "t*u");
        let kernel = build_kernel(p.clone()).unwrap();
        let op_rule = Arc::new(gauss_legendre(32).unwrap());
        let op = NystromOperator::new(&kernel as &dyn KernelFn, op_rule.clone()).unwrap();
        let start = GridFunction::constant(op_rule.clone(), 1.0).unwrap();
        let solved = solve_h(&op, &SolverConfig::default(), &start).unwrap();
        assert!(solved.converged);

        let tree = RootedTree::new(2, 1).unwrap();
        let spin_rule = gauss_legendre(16).unwrap();
        let field = SolvedField {
            op: &op,
            f: &solved.solution,
        };
        let r = compatibility_residual(&tree, &p, &field, &spin_rule).unwrap();
        assert!(r < 1e-6, "solved-field residual {r}");

        let bad_expr = Expression::parse("1+t", &['t']).unwrap();
        let bad = ExprField(&bad_expr);
        let r_bad = compatibility_residual(&tree, &p, &bad, &spin_rule).unwrap();
        assert!(r_bad > 1e-3, "negative control residual {r_bad}");
    }

    #[test]
    fn consistency_residual_cases() {
        let p = params(0.0, 0.0, 1.0, 0.0, 0.05, "0", "0", "t*u");
        let kernel = build_kernel(p).unwrap();
        let rule = Arc::new(gauss_legendre(32).unwrap());
        let op = NystromOperator::new(&kernel as &dyn KernelFn, rule.clone()).unwrap();
        let start = GridFunction::constant(rule.clone(), 1.0).unwrap();
        let solved = solve_h(&op, &SolverConfig::default(), &start).unwrap();
        assert!(consistency_residual(&op, &solved.solution).unwrap() < 1e-12);
        let one = GridFunction::constant(rule, 1.0).unwrap();
        assert!(consistency_residual(&op, &one).unwrap() > 0.0);
    }

    #[test]
    fn product_form_holds_under_precondition() {
        for j1beta in [1.0, 0.2] {
            let p = params(0.0, 0.0, 1.0, 0.0, j1beta, "0", "0", "t*u");
            let kernel = build_kernel(p.clone()).unwrap();
            let rule = Arc::new(gauss_legendre(32).unwrap());
            let op = NystromOperator::new(&kernel as &dyn KernelFn, rule.clone()).unwrap();
            for f0 in [
                GridFunction::constant(rule.clone(), 1.0).unwrap(),
                GridFunction::from_fn(rule.clone(), |u| 1.0 + u).unwrap(),
            ] {
                let v = product_form_check(&op, &p, &f0).unwrap();
                assert!(v < 1e-13, "j1beta={j1beta} check {v}");
            }
        }
    }

    #[test]
    fn product_form_guard() {
        let p = params(1.0, 0.0, 1.0, 0.0, 1.0, "t*u*v", "0", "t*u");
        let kernel = build_kernel(p.clone()).unwrap();
        let rule = Arc::new(gauss_legendre(8).unwrap());
        let op = NystromOperator::new(&kernel as &dyn KernelFn, rule.clone()).unwrap();
        let f = GridFunction::constant(rule, 1.0).unwrap();
        assert!(matches!(
            product_form_check(&op, &p, &f),
            Err(GibbsError::Precondition(_))
        ));
    }
}
