//! Fixed points of the quadratic Lyapunov integral operator
//! `Lf(t) = ∫∫ K(t,u,v) f(u) f(v) du dv` and its normalized companion
//! `Hf = Lf / (Lf)(0)`, for kernels of the exponential form built from a
//! four-interaction Hamiltonian on a rooted Cayley tree.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration and the CLI
//! live in the companion `lyapunov-cli` crate.
//!
//! Module map:
//! - [`expr`]: closed-form interaction functions parsed from text
//! - [`quadrature`]: Gauss–Legendre rules on `[0,1]` and tensor integration
//! - [`kernel`]: the kernel `K(t,u,v)`, certified grid bounds and the
//!   uniqueness condition `Ω/ω < c_max`
//! - [`operators`]: Nyström discretization of `L` and `H` on grid functions
//! - [`solver`]: damped Picard iteration with Newton polish, eigenpair
//!   scaling, and multi-start fixed-point counting
//! - [`gibbs`]: finite-volume Gibbs distributions on the rooted tree and
//!   the compatibility / consistency residuals

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod expr;
pub mod gibbs;
pub mod kernel;
pub mod operators;
pub mod quadrature;
pub mod solver;

pub use expr::Expression;
pub use kernel::{Kernel, KernelBounds, KernelFn, ModelParams};
pub use operators::{GridFunction, NystromOperator};
pub use quadrature::QuadratureRule;
pub use solver::{FixedPointReport, SolverConfig};
