//! Command implementations: pure config → report functions, no IO.

use std::sync::Arc;

use lyapunov_core::expr::Expression;
use lyapunov_core::gibbs::{
    self, compatibility_residual, consistency_residual, ExprField, GibbsError, RootedTree,
    SolvedField,
};
use lyapunov_core::kernel::{self, build_kernel};
use lyapunov_core::operators::Equation;
use lyapunov_core::quadrature::gauss_legendre;
use lyapunov_core::solver::{self, SolverError};
use lyapunov_core::{GridFunction, NystromOperator};

use crate::config::ExperimentConfig;
use crate::report::{BoundsReport, SolveReport, StartSummary, SweepRow, VerifyReport};
use crate::CliError;

pub const COMPATIBILITY_TOL: f64 = 1e-6;
pub const CONSISTENCY_TOL: f64 = 1e-6;

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Config(format!("solver: {e}"))
    }
}

impl From<kernel::KernelError> for CliError {
    fn from(e: kernel::KernelError) -> Self {
        CliError::Config(format!("kernel: {e}"))
    }
}

impl From<GibbsError> for CliError {
    fn from(e: GibbsError) -> Self {
        match e {
            GibbsError::Infeasible { .. } => CliError::Feasibility(e.to_string()),
            other => CliError::Config(format!("gibbs: {other}")),
        }
    }
}

pub fn run_bounds(cfg: &ExperimentConfig, with_uniqueness: bool) -> Result<BoundsReport, CliError> {
    let params = cfg.model_params()?;
    let k = build_kernel(params)?;
    let b = kernel::kernel_bounds(&k, cfg.bounds.grid, cfg.bounds.refine)?;
    let mut report = BoundsReport {
        omega: b.omega,
        big_omega: b.big_omega,
        ratio: b.ratio(),
        c_max: None,
        satisfied: None,
    };
    if with_uniqueness {
        let check = kernel::uniqueness_check(&b);
        report.c_max = Some(check.c_max);
        report.satisfied = Some(check.satisfied);
    }
    Ok(report)
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveReport, CliError> {
    let params = cfg.model_params()?;
    let k = build_kernel(params)?;
    let rule = Arc::new(
        gauss_legendre(cfg.quadrature.nodes)
            .map_err(|e| CliError::Config(format!("quadrature: {e}")))?,
    );
    let op =
        NystromOperator::new(&k, rule).map_err(|e| CliError::Config(format!("operator: {e}")))?;
    let multi = solver::multi_start(&op, &cfg.solver.to_solver_config())?;

    let per_start: Vec<StartSummary> = multi
        .reports
        .iter()
        .map(|r| StartSummary {
            converged: r.converged,
            residual: r.residual,
            iterations: r.iterations,
        })
        .collect();
    let converged_count = per_start.iter().filter(|s| s.converged).count();
    let best = multi
        .reports
        .iter()
        .filter(|r| r.converged)
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .ok_or_else(|| CliError::NoConvergence("no start converged".into()))?;

    let (g, denominator) = solver::h_to_l(&op, &best.solution)
        .map_err(|e| CliError::Config(format!("h_to_l: {e}")))?;
    let l_residual = op
        .residual(&g, Equation::L)
        .map_err(|e| CliError::Config(format!("residual: {e}")))?;

    Ok(SolveReport {
        starts: cfg.solver.starts,
        converged_count,
        distinct_count: multi.distinct_count,
        min_residual: best.residual,
        per_start,
        solution: best.solution.values().to_vec(),
        l_solution: g.values().to_vec(),
        denominator,
        l_residual,
    })
}

pub fn run_verify(
    cfg: &ExperimentConfig,
    field_override: Option<&str>,
) -> Result<VerifyReport, CliError> {
    let params = cfg.model_params()?;
    let k = build_kernel(params.clone())?;
    let rule = Arc::new(
        gauss_legendre(cfg.quadrature.nodes)
            .map_err(|e| CliError::Config(format!("quadrature: {e}")))?,
    );
    let op = NystromOperator::new(&k, rule.clone())
        .map_err(|e| CliError::Config(format!("operator: {e}")))?;
    let tree = RootedTree::new(cfg.tree.k, cfg.tree.n)?;
    let spin_rule = gauss_legendre(cfg.tree.quadrature_nodes)
        .map_err(|e| CliError::Config(format!("tree quadrature: {e}")))?;
    gibbs::check_feasibility(&tree, spin_rule.len())?;

    let (field_label, f, expr): (String, GridFunction, Option<Expression>) = match field_override {
        Some(src) => {
            let expr = Expression::parse(src, &['t'])
                .map_err(|e| CliError::Config(format!("field override: {e}")))?;
            let values = rule
                .nodes()
                .iter()
                .map(|&t| expr.eval(&[t]))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| CliError::Config(format!("field override: {e}")))?;
            let f = GridFunction::new(rule.clone(), values)
                .map_err(|e| CliError::Config(format!("field override: {e}")))?;
            (format!("override: {expr}"), f, Some(expr))
        }
        None => {
            let start = GridFunction::constant(rule.clone(), 1.0)
                .map_err(|e| CliError::Config(format!("operator: {e}")))?;
            let rep = solver::solve_h(&op, &cfg.solver.to_solver_config(), &start)?;
            if !rep.converged {
                return Err(CliError::NoConvergence(format!(
                    "fixed-point solve stalled at residual {}",
                    rep.residual
                )));
            }
            ("solved".to_string(), rep.solution, None)
        }
    };

    let compatibility = match &expr {
        Some(e) => compatibility_residual(&tree, &params, &ExprField(e), &spin_rule)?,
        None => {
            compatibility_residual(&tree, &params, &SolvedField { op: &op, f: &f }, &spin_rule)?
        }
    };
    let consistency = consistency_residual(&op, &f)?;

    Ok(VerifyReport {
        field: field_label,
        compatibility_residual: compatibility,
        compatibility_tol: COMPATIBILITY_TOL,
        compatibility_pass: compatibility < COMPATIBILITY_TOL,
        consistency_residual: consistency,
        consistency_tol: CONSISTENCY_TOL,
        consistency_pass: consistency < CONSISTENCY_TOL,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep command needs a sweep block".into()))?;
    let mut rows = Vec::with_capacity(sweep.steps);
    for value in sweep.values() {
        let point = cfg.with_parameter(sweep.parameter, value);
        rows.push(sweep_point(&point, value));
    }
    Ok(rows)
}

/// One sweep point; failures become row data so the sweep continues.
fn sweep_point(cfg: &ExperimentConfig, value: f64) -> SweepRow {
    let mut row = SweepRow {
        sweep_value: value,
        omega: None,
        big_omega: None,
        ratio: None,
        satisfied: false,
        distinct_count: 0,
        min_residual: None,
        error: None,
    };
    match run_bounds(cfg, true) {
        Ok(b) => {
            row.omega = Some(b.omega);
            row.big_omega = Some(b.big_omega);
            row.ratio = Some(b.ratio);
            row.satisfied = b.satisfied.unwrap_or(false);
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    match run_solve(cfg) {
        Ok(s) => {
            row.distinct_count = s.distinct_count;
            row.min_residual = Some(s.min_residual);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}
