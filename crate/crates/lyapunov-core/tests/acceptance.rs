//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The "suite kernels" referenced by several criteria are the four
//! nearest-neighbor product kernels J₁β ∈ {0.01, 0.05, 0.1, 1} with
//! ξ₃ = tu, plus one kernel with all four interactions switched on.

use std::sync::Arc;
use std::time::Instant;

use lyapunov_core::expr::Expression;
use lyapunov_core::gibbs::{
    compatibility_residual, product_form_check, ExprField, GibbsDistribution, RootedTree,
    SolvedField,
};
use lyapunov_core::kernel::{build_kernel, kernel_value_bounds, ClosureKernel, Kernel};
use lyapunov_core::quadrature::gauss_legendre;
use lyapunov_core::solver::{h_to_l, l_to_h, multi_start, solve_h, solve_l};
use lyapunov_core::{GridFunction, ModelParams, NystromOperator, QuadratureRule};

fn rule(n: usize) -> Arc<QuadratureRule> {
    Arc::new(gauss_legendre(n).unwrap())
}

fn model(j3: f64, j: f64, j1: f64, alpha: f64, beta: f64) -> ModelParams {
    ModelParams {
        j3,
        j,
        j1,
        alpha,
        beta,
        xi1: Expression::parse("t*u*v", &['t', 'u', 'v']).unwrap(),
        xi2: Expression::parse("u*v", &['u', 'v']).unwrap(),
        xi3: Expression::parse("t*u", &['t', 'u']).unwrap(),
    }
}

/// Product kernel exp(J₁β·t·(u+v)).
fn product_kernel(j1beta: f64) -> Kernel {
    build_kernel(model(0.0, 0.0, j1beta, 0.0, 1.0)).unwrap()
}

fn suite_kernels() -> Vec<(String, Kernel)> {
    let mut out: Vec<(String, Kernel)> = [0.01, 0.05, 0.1, 1.0]
        .iter()
        .map(|&c| (format!("product J1b={c}"), product_kernel(c)))
        .collect();
    out.push((
        "four-interaction".to_string(),
        build_kernel(model(0.02, 0.03, 0.05, 0.04, 1.0)).unwrap(),
    ));
    out
}

fn default_cfg() -> lyapunov_core::SolverConfig {
    lyapunov_core::SolverConfig::default()
}

/// Deterministic positive pseudo-random values in (lo, hi), log-uniform.
fn lcg_values(seed: u64, n: usize, lo: f64, hi: f64) -> (u64, Vec<f64>) {
    let mut state = seed;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        out.push((lo.ln() + u * (hi.ln() - lo.ln())).exp());
    }
    (state, out)
}

#[test]
fn criterion_01_constant_kernel_analytics() {
    let started = Instant::now();
    for kappa in [0.5f64, 1.0, 4.0] {
        let k = ClosureKernel(move |_, _, _| kappa);
        let r = rule(32);
        let op = NystromOperator::new(&k, r.clone()).unwrap();
        let start = GridFunction::constant(r.clone(), 2.0).unwrap();
        let l = solve_l(&op, &default_cfg(), &start).unwrap();
        assert!(l.converged);
        for &v in l.solution.values() {
            assert!((v - 1.0 / kappa).abs() < 1e-12, "g != 1/kappa for {kappa}");
        }
        let h = solve_h(&op, &default_cfg(), &start).unwrap();
        assert!(h.converged);
        for &v in h.solution.values() {
            assert!((v - 1.0).abs() < 1e-13, "f != 1 for {kappa}");
        }
    }
    assert!(started.elapsed().as_secs_f64() < 1.0, "runtime over 1 s");
    println!("[acceptance] criterion 1 constant-kernel analytics: PASS");
}

#[test]
fn criterion_02_separable_kernel_constant_map() {
    // K = a(t)b(u)b(v) with a(0) = 1 makes H the constant map f ↦ a
    let a = |t: f64| (0.3 * t).exp();
    let k = ClosureKernel(move |t: f64, u: f64, v: f64| a(t) * (1.0 + u) * (1.0 + v));
    let r = rule(32);
    let op = NystromOperator::new(&k, r.clone()).unwrap();
    let start = GridFunction::constant(r.clone(), 3.0).unwrap();
    let rep = solve_h(&op, &default_cfg(), &start).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 2, "took {} iterations", rep.iterations);
    for (&t, &v) in r.nodes().iter().zip(rep.solution.values()) {
        assert!((v - a(t)).abs() < 1e-12);
    }
    println!("[acceptance] criterion 2 separable-kernel analytics: PASS");
}

#[test]
fn criterion_03_g_bounds() {
    for (name, k) in suite_kernels() {
        let b = kernel_value_bounds(&k, 64, 3).unwrap();
        let lo = b.omega / (b.big_omega * b.big_omega);
        let hi = b.big_omega / (b.omega * b.omega);
        let r = rule(32);
        let op = NystromOperator::new(&k, r.clone()).unwrap();
        let start = GridFunction::constant(r.clone(), 1.0).unwrap();
        let rep = solve_l(&op, &default_cfg(), &start).unwrap();
        assert!(rep.converged, "{name}: L-solve did not converge");
        for &g in rep.solution.values() {
            assert!(g >= lo - 1e-9, "{name}: g below omega/Omega^2");
            assert!(g <= hi + 1e-9, "{name}: g above Omega/omega^2");
        }
        assert!(
            rep.solution.sup_norm() >= 1.0 / b.big_omega - 1e-9,
            "{name}: sup norm below 1/Omega"
        );
    }
    println!("[acceptance] criterion 3 G-bounds for L-fixed points: PASS");
}

#[test]
fn criterion_04_inequality_13() {
    for (name, k) in suite_kernels() {
        let b = kernel_value_bounds(&k, 64, 3).unwrap();
        let r = rule(32);
        let op = NystromOperator::new(&k, r.clone()).unwrap();
        let mut seed = 0xfeed_u64;
        for _ in 0..100 {
            let (next, values) = lcg_values(seed, r.len(), 0.2, 5.0);
            seed = next;
            let h = GridFunction::new(r.clone(), values).unwrap();
            let lh: Vec<f64> = (0..=100)
                .map(|i| op.l_at(i as f64 / 100.0, &h).unwrap())
                .collect();
            let s_min = lh.iter().cloned().fold(f64::INFINITY, f64::min);
            let s_max = lh.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(
                s_min >= (b.omega / b.big_omega) * s_max - 1e-12,
                "{name}: inequality violated"
            );
        }
    }
    println!("[acceptance] criterion 4 inequality s_min >= (omega/Omega) s_max: PASS");
}

#[test]
fn criterion_05_uniqueness_under_condition_i() {
    // the ratio of the product kernel is e^(2·J1β), so only the first
    // two values sit strictly under condition (I); all three are still
    // expected to land in a single cluster
    let c_max = lyapunov_core::kernel::c_max();
    for j1beta in [0.01f64, 0.05, 0.1] {
        let started = Instant::now();
        let k = product_kernel(j1beta);
        let b = kernel_value_bounds(&k, 64, 3).unwrap();
        assert_eq!(
            b.ratio() < c_max,
            j1beta <= 0.05,
            "J1b={j1beta}: unexpected condition (I) status (ratio {})",
            b.ratio()
        );
        let r = rule(32);
        let op = NystromOperator::new(&k, r).unwrap();
        let rep = multi_start(&op, &default_cfg()).unwrap();
        assert_eq!(rep.distinct_count, 1, "J1b={j1beta}: expected 1 cluster");
        assert!(rep.reports.iter().all(|r| r.converged));
        assert!(
            started.elapsed().as_secs_f64() < 30.0,
            "J1b={j1beta}: over 30 s"
        );
    }
    println!("[acceptance] criterion 5 uniqueness under condition (I): PASS");
}

#[test]
fn criterion_06_existence_evidence() {
    for (name, k) in suite_kernels() {
        let r = rule(32);
        let op = NystromOperator::new(&k, r).unwrap();
        let rep = multi_start(&op, &default_cfg()).unwrap();
        assert!(
            rep.reports
                .iter()
                .any(|r| r.converged && r.residual < 1e-10),
            "{name}: no convergent start"
        );
    }
    println!("[acceptance] criterion 6 existence evidence: PASS");
}

#[test]
fn criterion_07_h_l_correspondence() {
    for (name, k) in suite_kernels() {
        let r = rule(32);
        let op = NystromOperator::new(&k, r.clone()).unwrap();
        let start = GridFunction::constant(r.clone(), 1.0).unwrap();
        let rep = solve_h(&op, &default_cfg(), &start).unwrap();
        assert!(rep.converged);
        let (g, _d) = h_to_l(&op, &rep.solution).unwrap();
        let back = l_to_h(&op, &g).unwrap();
        assert!(
            back.sup_distance(&rep.solution) < 1e-12,
            "{name}: h_to_l then l_to_h is not the identity"
        );
        for lambda in [0.5f64, 2.0, 10.0] {
            let scaled = g.scale(lambda).unwrap();
            let image = op.apply_l(&scaled).unwrap();
            let drift = image.sup_distance(&scaled.scale(lambda).unwrap());
            assert!(drift < 1e-9, "{name}: lambda={lambda} scaling failed");
        }
    }
    println!("[acceptance] criterion 7 h_to_l/l_to_h and lambda-scaling: PASS");
}

#[test]
fn criterion_08_compatibility_desk_scale() {
    let started = Instant::now();
    let params = model(0.0, 0.0, 0.05, 0.0, 1.0);
    let k = build_kernel(params.clone()).unwrap();
    let r = rule(32);
    let op = NystromOperator::new(&k, r.clone()).unwrap();
    let start = GridFunction::constant(r.clone(), 1.0).unwrap();
    let rep = solve_h(&op, &default_cfg(), &start).unwrap();
    assert!(rep.converged);

    let tree = RootedTree::new(2, 1).unwrap();
    let spin_rule = gauss_legendre(16).unwrap();
    let solved = SolvedField {
        op: &op,
        f: &rep.solution,
    };
    let res = compatibility_residual(&tree, &params, &solved, &spin_rule).unwrap();
    assert!(res < 1e-6, "solved field residual {res}");

    let control = Expression::parse("1+t", &['t']).unwrap();
    let res_bad = compatibility_residual(&tree, &params, &ExprField(&control), &spin_rule).unwrap();
    assert!(res_bad > 1e-3, "negative control residual {res_bad}");
    assert!(started.elapsed().as_secs_f64() < 10.0, "runtime over 10 s");
    println!("[acceptance] criterion 8 compatibility on the k=2 n=1 tree: PASS");
}

#[test]
fn criterion_09_product_factorization() {
    for j1beta in [0.2f64, 1.0] {
        let params = model(0.0, 0.0, j1beta, 0.0, 1.0);
        let k = build_kernel(params.clone()).unwrap();
        let r = rule(32);
        let op = NystromOperator::new(&k, r.clone()).unwrap();
        let mut seed = 0xabc_u64;
        for _ in 0..10 {
            let (next, values) = lcg_values(seed, r.len(), 0.2, 5.0);
            seed = next;
            let f = GridFunction::new(r.clone(), values).unwrap();
            let mismatch = product_form_check(&op, &params, &f).unwrap();
            assert!(mismatch < 1e-12, "J1b={j1beta}: mismatch {mismatch}");
        }
    }
    println!("[acceptance] criterion 9 product factorization: PASS");
}

#[test]
fn criterion_10_discretization_convergence() {
    // doubling quadrature nodes 32 → 64 moves every solved fixed point
    // by less than 1e-8 in sup norm (coarse solution compared against
    // the Nyström extension of the fine one)
    for (name, k) in suite_kernels() {
        let coarse_rule = rule(32);
        let fine_rule = rule(64);
        let coarse_op = NystromOperator::new(&k, coarse_rule.clone()).unwrap();
        let fine_op = NystromOperator::new(&k, fine_rule.clone()).unwrap();
        let coarse = solve_h(
            &coarse_op,
            &default_cfg(),
            &GridFunction::constant(coarse_rule.clone(), 1.0).unwrap(),
        )
        .unwrap();
        let fine = solve_h(
            &fine_op,
            &default_cfg(),
            &GridFunction::constant(fine_rule.clone(), 1.0).unwrap(),
        )
        .unwrap();
        assert!(coarse.converged && fine.converged);
        let drift = coarse_rule
            .nodes()
            .iter()
            .zip(coarse.solution.values())
            .map(|(&t, &v)| (fine_op.h_at(t, &fine.solution).unwrap() - v).abs())
            .fold(0.0f64, f64::max);
        assert!(drift < 1e-8, "{name}: node doubling moved solution {drift}");
    }

    // doubling tree spin nodes 8 → 16 changes Z_n by < 1e-8 relative
    let params = model(0.0, 0.0, 0.05, 0.0, 1.0);
    let tree = RootedTree::new(2, 1).unwrap();
    let field = Expression::parse("1", &['t']).unwrap();
    let z: Vec<f64> = [8usize, 16]
        .iter()
        .map(|&q| {
            let spin_rule = gauss_legendre(q).unwrap();
            GibbsDistribution::new(&tree, &params, &ExprField(&field), &spin_rule)
                .unwrap()
                .partition_function()
        })
        .collect();
    assert!(((z[0] - z[1]) / z[1]).abs() < 1e-8, "Z drift {:?}", z);
    println!("[acceptance] criterion 10 discretization convergence: PASS");
}

#[test]
fn criterion_11_quadrature_and_jacobian() {
    // Gauss-Legendre exactness: n nodes integrate x^(2n-1) exactly
    for n in [2usize, 8, 32] {
        let r = gauss_legendre(n).unwrap();
        let p = (2 * n - 1) as f64;
        let got = r.integrate_1d(|x| x.powf(p)).unwrap();
        assert!((got - 1.0 / (p + 1.0)).abs() < 1e-13, "n={n} not exact");
    }

    // Jacobian of H against central finite differences, 1e-6 relative
    let k = product_kernel(0.1);
    let r = rule(16);
    let op = NystromOperator::new(&k, r.clone()).unwrap();
    let (_, values) = lcg_values(0x11, r.len(), 0.5, 2.0);
    let f = GridFunction::new(r.clone(), values.clone()).unwrap();
    let jac = op.jacobian_h(&f).unwrap();
    let step = 1e-6;
    let scale: f64 = jac.as_slice().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for j in 0..r.len() {
        let mut up = values.clone();
        let mut dn = values.clone();
        up[j] += step;
        dn[j] -= step;
        let hu = op
            .apply_h(&GridFunction::new(r.clone(), up).unwrap())
            .unwrap();
        let hd = op
            .apply_h(&GridFunction::new(r.clone(), dn).unwrap())
            .unwrap();
        for i in 0..r.len() {
            let fd = (hu.values()[i] - hd.values()[i]) / (2.0 * step);
            assert!(
                (jac.get(i, j) - fd).abs() <= 1e-6 * scale.max(1.0),
                "J[{i}][{j}] disagrees with finite differences"
            );
        }
    }
    println!("[acceptance] criterion 11 quadrature exactness and jacobian: PASS");
}
