//! Numerical laboratory for shrinking solitons of Yang-Mills flow on ℝⁿ.
//!
//! The crate is organised bottom-up: [`tensor_core`] is a finite-difference
//! gauge calculus that serves as the oracle for the closed forms in
//! [`equivariant`]; [`functionals`] and [`variation`] integrate those closed
//! forms against Gaussian kernels; [`flow`] evolves the reduced radial PDE.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod equivariant;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod optimize;
pub mod quad;
pub mod tensor_core;
pub mod variation;

pub use equivariant::{
    BBranch, BumpProfile, EquivariantConnection, GastelParams, GastelProfile, RadialProfile,
    SampledProfile, SumProfile, ZeroProfile,
};
pub use error::{Error, Result};
pub use functionals::{Basepoint, KernelKind, NormalizationConvention, QuadratureSpec};
pub use tensor_core::{ConnectionField, FdScheme, FormEnd, Mat, OneFormEnd, TwoFormEnd};

/// Area of the unit sphere Sⁿ⁻¹ ⊂ ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}
