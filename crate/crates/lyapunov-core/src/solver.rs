//! Fixed points of `H` and `L`, eigenpairs of `L`, the correspondence
//! between the three, and multi-start fixed-point counting.
//!
//! The iteration is damped Picard on `H`, `f ← (1-d)f + d·Hf`, with one
//! Newton step using the discretized Jacobian once the residual drops
//! below `1e-6`. Existence is known non-constructively; non-convergence
//! is a reported outcome, not an error.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::operators::{Equation, GridFunction, NystromOperator, OperatorError};

const NEWTON_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("iterate lost positivity at iteration {iteration}; reduce damping")]
    PositivityLoss { iteration: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// sup-norm residual target
    pub tol: f64,
    pub max_iter: usize,
    /// Picard damping in (0,1]
    pub damping: f64,
    /// number of random starts for multi_start
    pub starts: usize,
    pub seed: u64,
    /// sup-distance below which two solutions count as one fixed point
    pub cluster_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            max_iter: 1000,
            damping: 1.0,
            starts: 20,
            seed: 0,
            cluster_eps: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolverError::InvalidConfig(
                "tol must be positive".to_string(),
            ));
        }
        if !self.cluster_eps.is_finite() || self.cluster_eps <= self.tol {
            return Err(SolverError::InvalidConfig(
                "cluster_eps must exceed tol".to_string(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::InvalidConfig(
                "damping must lie in (0,1]".to_string(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iter must be at least 1".to_string(),
            ));
        }
        if self.starts == 0 {
            return Err(SolverError::InvalidConfig(
                "starts must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixedPointKind {
    HFixed,
    LFixed,
    Eigenpair { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub solution: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kind: FixedPointKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartReport {
    /// one report per start, in start order
    pub reports: Vec<FixedPointReport>,
    /// number of sup-distance clusters among the converged solutions
    pub distinct_count: usize,
}

/// Damped Picard iteration for `Hf = f` from `start`.
pub fn solve_h(
    op: &NystromOperator<'_>,
    cfg: &SolverConfig,
    start: &GridFunction,
) -> Result<FixedPointReport, SolverError> {
    cfg.validate()?;
    let mut f = start.clone();
    let mut best = f.clone();
    let mut best_res = f64::INFINITY;
    let mut polished = false;
    let mut iterations = 0;
    loop {
        let hf = op.apply_h(&f)?;
        let res = hf.sup_distance(&f);
        if res < best_res {
            best_res = res;
            best = f.clone();
        }
        if res < cfg.tol {
            return Ok(FixedPointReport {
                solution: f,
                residual: res,
                iterations,
                converged: true,
                kind: FixedPointKind::HFixed,
            });
        }
        if iterations >= cfg.max_iter {
            return Ok(FixedPointReport {
                solution: best,
                residual: best_res,
                iterations,
                converged: false,
                kind: FixedPointKind::HFixed,
            });
        }
        let mut next = None;
        if res < NEWTON_THRESHOLD && !polished {
            polished = true;
            next = newton_step(op, &f, &hf)?;
        }
        let next = match next {
            Some(v) => v,
            None => picard_step(&f, &hf, cfg.damping),
        };
        match GridFunction::new(f.rule().clone(), next) {
            Ok(g) => f = g,
            Err(OperatorError::NonPositive { .. }) => {
                return Err(SolverError::PositivityLoss {
                    iteration: iterations + 1,
                });
            }
            Err(e) => return Err(e.into()),
        }
        iterations += 1;
    }
}

fn picard_step(f: &GridFunction, hf: &GridFunction, damping: f64) -> Vec<f64> {
    f.values()
        .iter()
        .zip(hf.values())
        .map(|(a, b)| (1.0 - damping) * a + damping * b)
        .collect()
}

/// One Newton step on `f - Hf = 0`: solve `(I - J) δ = Hf - f`.
/// Returns `None` when the linear system is singular or the step would
/// leave the positive cone; the caller falls back to Picard.
fn newton_step(
    op: &NystromOperator<'_>,
    f: &GridFunction,
    hf: &GridFunction,
) -> Result<Option<Vec<f64>>, SolverError> {
    let jac = op.jacobian_h(f)?;
    let n = jac.n();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let eye = if i == j { 1.0 } else { 0.0 };
            a[i * n + j] = eye - jac.get(i, j);
        }
    }
    let rhs: Vec<f64> = hf
        .values()
        .iter()
        .zip(f.values())
        .map(|(h, v)| h - v)
        .collect();
    let delta = match lu_solve(a, rhs, n) {
        Some(d) => d,
        None => return Ok(None),
    };
    let next: Vec<f64> = f.values().iter().zip(&delta).map(|(v, d)| v + d).collect();
    if next.iter().all(|&v| v.is_finite() && v > 0.0) {
        Ok(Some(next))
    } else {
        Ok(None)
    }
}

/// Gaussian elimination with partial pivoting; `a` is row-major n×n.
fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        let mut pmax = libm::fabs(a[col * n + col]);
        for row in col + 1..n {
            let v = libm::fabs(a[row * n + col]);
            if v > pmax {
                pmax = v;
                pivot = row;
            }
        }
        if pmax == 0.0 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for j in row + 1..n {
            s -= a[row * n + j] * x[j];
        }
        x[row] = s / a[row * n + row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Converts an `H`-fixed point to an `L`-fixed point: `g = f / D(f)` with
/// `D(f) = ∫∫ K(0,u,v) f(u) f(v) du dv`. Returns `(g, D)`.
pub fn h_to_l(
    op: &NystromOperator<'_>,
    f: &GridFunction,
) -> Result<(GridFunction, f64), SolverError> {
    let d = op.denominator(f)?;
    Ok((f.scale(1.0 / d)?, d))
}

/// Converts an `L`-fixed point back to the `f(0)=1` normalization:
/// `f = g / g(0)` with `g(0)` the Nyström extension at 0.
pub fn l_to_h(op: &NystromOperator<'_>, g: &GridFunction) -> Result<GridFunction, SolverError> {
    let g0 = op.l_at(0.0, g)?;
    if !(g0.is_finite() && g0 > 0.0) {
        return Err(SolverError::Operator(OperatorError::DenominatorUnderflow {
            denom: g0,
        }));
    }
    Ok(g.scale(1.0 / g0)?)
}

/// Solves `Lg = g` by solving `Hf = f` and rescaling; the residual is
/// re-measured on the `L` equation.
pub fn solve_l(
    op: &NystromOperator<'_>,
    cfg: &SolverConfig,
    start: &GridFunction,
) -> Result<FixedPointReport, SolverError> {
    let h_report = solve_h(op, cfg, start)?;
    let (g, _) = h_to_l(op, &h_report.solution)?;
    let residual = op.residual(&g, Equation::L)?;
    Ok(FixedPointReport {
        solution: g,
        residual,
        iterations: h_report.iterations,
        converged: h_report.converged && residual < cfg.tol,
        kind: FixedPointKind::LFixed,
    })
}

/// Produces an eigenpair `L h = λ h` for any `λ > 0` by degree-2
/// homogeneity: with `Lg = g`, the function `h = λ g` satisfies
/// `L(λg) = λ²·Lg = λ·(λg)`.
pub fn find_eigenpair(
    op: &NystromOperator<'_>,
    cfg: &SolverConfig,
    lambda: f64,
    start: &GridFunction,
) -> Result<FixedPointReport, SolverError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SolverError::InvalidConfig(
            "eigenvalue target must be positive".to_string(),
        ));
    }
    let l_report = solve_l(op, cfg, start)?;
    let h = l_report.solution.scale(lambda)?;
    let lh = op.apply_l(&h)?;
    let residual = lh.sup_distance(&h.scale(lambda)?);
    Ok(FixedPointReport {
        solution: h,
        residual,
        iterations: l_report.iterations,
        converged: l_report.converged && residual < cfg.tol * lambda * lambda.max(1.0),
        kind: FixedPointKind::Eigenpair { lambda },
    })
}

/// Runs `solve_h` from `cfg.starts` seeded random positive starts with
/// node values log-uniform in `[0.1, 10]`, then clusters the converged
/// solutions by sup-distance.
pub fn multi_start(
    op: &NystromOperator<'_>,
    cfg: &SolverConfig,
) -> Result<MultiStartReport, SolverError> {
    cfg.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = op.rule().len();
    let ln_lo = libm::log(0.1);
    let ln_hi = libm::log(10.0);
    let mut reports = Vec::with_capacity(cfg.starts);
    for _ in 0..cfg.starts {
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                libm::exp(ln_lo + u * (ln_hi - ln_lo))
            })
            .collect();
        let start = GridFunction::new(op.rule().clone(), values)?;
        let report = match solve_h(op, cfg, &start) {
            Ok(r) => r,
            // positivity loss counts as a failed start, not a failed sweep
            Err(SolverError::PositivityLoss { iteration }) => FixedPointReport {
                solution: start,
                residual: f64::INFINITY,
                iterations: iteration,
                converged: false,
                kind: FixedPointKind::HFixed,
            },
            Err(e) => return Err(e),
        };
        reports.push(report);
    }
    let mut representatives: Vec<&GridFunction> = Vec::new();
    for report in reports.iter().filter(|r| r.converged) {
        if !representatives
            .iter()
            .any(|rep| rep.sup_distance(&report.solution) < cfg.cluster_eps)
        {
            representatives.push(&report.solution);
        }
    }
    let distinct_count = representatives.len();
    Ok(MultiStartReport {
        reports,
        distinct_count,
    })
}
