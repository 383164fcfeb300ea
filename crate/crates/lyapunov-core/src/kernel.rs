//! The kernel `K(t,u,v) = exp{J3·β·ξ1(t,u,v) + J·β·ξ2(u,v)
//! + J1·β·(ξ3(t,u) + ξ3(t,v)) + α·β·(u+v)}`, grid-certified bounds
//! `ω ≤ K ≤ Ω` on `[0,1]³`, and the uniqueness condition `Ω/ω < c_max`.

use alloc::string::{String, ToString};

use thiserror::Error;

use crate::expr::{EvalError, Expression};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Expr(#[from] EvalError),
    #[error("kernel is not finite and positive at ({t}, {u}, {v})")]
    NonFinite { t: f64, u: f64, v: f64 },
    #[error("bound grid must have at least 4 points per axis, got {0}")]
    BoundGrid(usize),
}

/// Coupling constants, inverse temperature and the three interaction
/// functions. Zero couplings are admitted; the corresponding interaction
/// term drops out of the exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub j3: f64,
    pub j: f64,
    pub j1: f64,
    pub alpha: f64,
    pub beta: f64,
    /// ξ1(t,u,v)
    pub xi1: Expression,
    /// ξ2(u,v)
    pub xi2: Expression,
    /// ξ3(t,u)
    pub xi3: Expression,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(KernelError::InvalidParams(
                "beta must be positive and finite".to_string(),
            ));
        }
        for c in [self.j3, self.j, self.j1, self.alpha] {
            if !c.is_finite() {
                return Err(KernelError::InvalidParams(
                    "couplings must be finite".to_string(),
                ));
            }
        }
        if self.xi1.vars() != ['t', 'u', 'v'] {
            return Err(KernelError::InvalidParams(
                "xi1 must be declared over (t,u,v)".to_string(),
            ));
        }
        if self.xi2.vars() != ['u', 'v'] {
            return Err(KernelError::InvalidParams(
                "xi2 must be declared over (u,v)".to_string(),
            ));
        }
        if self.xi3.vars() != ['t', 'u'] {
            return Err(KernelError::InvalidParams(
                "xi3 must be declared over (t,u)".to_string(),
            ));
        }
        // spot-check finiteness on a coarse grid of each cube
        self.xi1.bound_estimate(4)?;
        self.xi2.bound_estimate(4)?;
        self.xi3.bound_estimate(4)?;
        Ok(())
    }
}

/// Anything evaluable as a strictly positive kernel on `[0,1]³`.
///
/// [`Kernel`] is the exponential-form model kernel; [`ClosureKernel`]
/// admits arbitrary closed forms (used for analytic test kernels).
pub trait KernelFn {
    fn eval(&self, t: f64, u: f64, v: f64) -> Result<f64, KernelError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    params: ModelParams,
}

/// Validates `params` and wraps them as an evaluable kernel.
pub fn build_kernel(params: ModelParams) -> Result<Kernel, KernelError> {
    params.validate()?;
    Ok(Kernel { params })
}

impl Kernel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// The exponent of `K`; zero couplings skip the expression entirely.
    pub fn exponent(&self, t: f64, u: f64, v: f64) -> Result<f64, KernelError> {
        let p = &self.params;
        let mut s = 0.0;
        if p.j3 != 0.0 {
            s += p.j3 * p.beta * p.xi1.eval(&[t, u, v])?;
        }
        if p.j != 0.0 {
            s += p.j * p.beta * p.xi2.eval(&[u, v])?;
        }
        if p.j1 != 0.0 {
            s += p.j1 * p.beta * (p.xi3.eval(&[t, u])? + p.xi3.eval(&[t, v])?);
        }
        if p.alpha != 0.0 {
            s += p.alpha * p.beta * (u + v);
        }
        Ok(s)
    }
}

impl KernelFn for Kernel {
    fn eval(&self, t: f64, u: f64, v: f64) -> Result<f64, KernelError> {
        let k = libm::exp(self.exponent(t, u, v)?);
        if !(k.is_finite() && k > 0.0) {
            return Err(KernelError::NonFinite { t, u, v });
        }
        Ok(k)
    }
}

/// A kernel given by an arbitrary closure; must be positive and finite.
pub struct ClosureKernel<F: Fn(f64, f64, f64) -> f64>(pub F);

impl<F: Fn(f64, f64, f64) -> f64> KernelFn for ClosureKernel<F> {
    fn eval(&self, t: f64, u: f64, v: f64) -> Result<f64, KernelError> {
        let k = (self.0)(t, u, v);
        if !(k.is_finite() && k > 0.0) {
            return Err(KernelError::NonFinite { t, u, v });
        }
        Ok(k)
    }
}

/// Grid-certified bounds `ω ≤ K ≤ Ω` over all sampled points of `[0,1]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    /// min of `K` over the sampled grid (overestimates the true min)
    pub omega: f64,
    /// max of `K` over the sampled grid (underestimates the true max)
    pub big_omega: f64,
    pub grid_per_axis: usize,
    pub refine_rounds: usize,
}

impl KernelBounds {
    pub fn ratio(&self) -> f64 {
        self.big_omega / self.omega
    }
}

/// Result of testing the uniqueness condition `Ω/ω < c_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessCheck {
    pub satisfied: bool,
    pub ratio: f64,
    pub c_max: f64,
}

/// The sharp endpoint `½·sqrt(sqrt(17)+1)` of the admissible constant
/// interval; `Ω/ω` strictly below it guarantees a unique fixed point.
pub fn c_max() -> f64 {
    0.5 * libm::sqrt(libm::sqrt(17.0) + 1.0)
}

/// Bounds the exponent on a uniform corner-including grid, then applies
/// `exp` (monotone) and runs `refine_rounds` of local 4x zoom around the
/// incumbent argmin and argmax.
pub fn kernel_bounds(
    k: &Kernel,
    grid_per_axis: usize,
    refine_rounds: usize,
) -> Result<KernelBounds, KernelError> {
    let (lo, hi) = refined_min_max(&|t, u, v| k.exponent(t, u, v), grid_per_axis, refine_rounds)?;
    Ok(KernelBounds {
        omega: libm::exp(lo),
        big_omega: libm::exp(hi),
        grid_per_axis,
        refine_rounds,
    })
}

/// Same search applied to the kernel values directly rather than the
/// exponent; works for any [`KernelFn`].
pub fn kernel_value_bounds(
    k: &dyn KernelFn,
    grid_per_axis: usize,
    refine_rounds: usize,
) -> Result<KernelBounds, KernelError> {
    let (lo, hi) = refined_min_max(&|t, u, v| k.eval(t, u, v), grid_per_axis, refine_rounds)?;
    Ok(KernelBounds {
        omega: lo,
        big_omega: hi,
        grid_per_axis,
        refine_rounds,
    })
}

pub fn uniqueness_check(bounds: &KernelBounds) -> UniquenessCheck {
    let ratio = bounds.ratio();
    let c_max = c_max();
    UniquenessCheck {
        satisfied: ratio < c_max,
        ratio,
        c_max,
    }
}

type Objective<'a> = &'a dyn Fn(f64, f64, f64) -> Result<f64, KernelError>;

struct Extremum {
    arg: [f64; 3],
    value: f64,
}

fn refined_min_max(
    f: Objective<'_>,
    grid_per_axis: usize,
    refine_rounds: usize,
) -> Result<(f64, f64), KernelError> {
    if grid_per_axis < 4 {
        return Err(KernelError::BoundGrid(grid_per_axis));
    }
    let (mut min, mut max) = search_box(f, [0.0; 3], [1.0; 3], grid_per_axis)?;
    let mut width = 1.0;
    for _ in 0..refine_rounds {
        width /= 4.0;
        let (m, _) = search_box(
            f,
            clamp_lo(min.arg, width),
            clamp_hi(min.arg, width),
            grid_per_axis,
        )?;
        if m.value < min.value {
            min = m;
        }
        let (_, x) = search_box(
            f,
            clamp_lo(max.arg, width),
            clamp_hi(max.arg, width),
            grid_per_axis,
        )?;
        if x.value > max.value {
            max = x;
        }
    }
    Ok((min.value, max.value))
}

fn clamp_lo(center: [f64; 3], half_width: f64) -> [f64; 3] {
    [
        (center[0] - half_width).max(0.0),
        (center[1] - half_width).max(0.0),
        (center[2] - half_width).max(0.0),
    ]
}

fn clamp_hi(center: [f64; 3], half_width: f64) -> [f64; 3] {
    [
        (center[0] + half_width).min(1.0),
        (center[1] + half_width).min(1.0),
        (center[2] + half_width).min(1.0),
    ]
}

fn search_box(
    f: Objective<'_>,
    lo: [f64; 3],
    hi: [f64; 3],
    grid_per_axis: usize,
) -> Result<(Extremum, Extremum), KernelError> {
    let g = grid_per_axis;
    let step = |axis: usize, i: usize| lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (g - 1) as f64;
    let mut min = Extremum {
        arg: lo,
        value: f64::INFINITY,
    };
    let mut max = Extremum {
        arg: lo,
        value: f64::NEG_INFINITY,
    };
    for it in 0..g {
        let t = step(0, it);
        for iu in 0..g {
            let u = step(1, iu);
            for iv in 0..g {
                let v = step(2, iv);
                let val = f(t, u, v)?;
                if val < min.value {
                    min = Extremum {
                        arg: [t, u, v],
                        value: val,
                    };
                }
                if val > max.value {
                    max = Extremum {
                        arg: [t, u, v],
                        value: val,
                    };
                }
            }
        }
    }
    Ok((min, max))
}
