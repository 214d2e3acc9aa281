//! Normal curves on sub-Finsler Carnot groups and numerical checks of their
//! escape rate.
//!
//! The crate is organised bottom-up: [`algebra`] (structure constants),
//! [`group`] (exponential coordinates, BCH product, dilations, adjoint
//! action), [`control`] (norms, sub-differentials, normal controls),
//! [`integrator`] (normal curves and the end-point map) and [`escape`]
//! (experiments), with [`config`] and [`cli`] driving the `escapelab` binary.

pub mod algebra;
mod bch;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod escape;
pub mod group;
pub mod integrator;

pub use algebra::{AlgebraVector, StratifiedAlgebra, ValidationReport};
pub use control::{rescale_covector, ControlValue, NormSpec, PolyhedralNorm};
pub use error::{Error, Result};
pub use group::{covector_norm, CarnotGroup, Covector, GroupElement};
pub use integrator::{
    end_point, end_point_directional, integrate_normal, pmp_identity_residual, ControlSignal, GeodesicTrace,
};

pub use bch::goldberg_coefficients;
