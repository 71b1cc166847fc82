//! Geometry, kernels and function-space quasi-norms attached to homogeneous
//! Kolmogorov operators `K = ½Σ∂²_{x_i} − Y`, `Y = ⟨Bx, ∇⟩ + ∂_t`.

pub mod error;
pub mod field;
pub mod fit;
pub mod grid;
pub mod kernel;
pub mod lorentz;
pub mod norms;
pub mod quadrature;
pub mod structure;
pub mod taylor;

pub use error::{Error, Result};
pub use field::{AnalyticField, Direction, FieldRef, FieldSpec, Profile, TestFunction};
pub use fit::ExponentFit;
pub use grid::{BoxDomain, GridFunction, GridSpec};
pub use kernel::{CovariancePolynomial, KernelValue};

pub use structure::{BlockStructure, Geometry, GroupPoint, MultiIndex};
