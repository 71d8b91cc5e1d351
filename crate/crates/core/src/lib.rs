//! Optical flow on moving parametrized surfaces.
//!
//! The image domain is a two-dimensional surface embedded in R^3 and evolving
//! in time, given by a family of parametrizations `f(t, x1, x2)` over a fixed
//! rectangular chart (with optional periodic identifications). The flow field
//! minimizes a quadratic energy combining a brightness-constancy data term
//! with a spatio-temporal H^1 regularizer built from the product metric
//! `diag(alpha^2, g(t))`, where `g(t)` is the pullback metric of the embedding.
//! The optimality system is discretized with second-order finite differences
//! and solved with restarted GMRES.
//!
//! Pipeline: [`surfaces`] / [`io`] provide the surface, [`imaging`] the image
//! sequence, [`geometry`] all metric quantities, [`assembly`] the sparse
//! space-time system, [`solver`] the GMRES solve and [`flowfield`] the
//! solution views, energies and comparison metrics.

pub mod assembly;
pub mod color;
pub mod error;
pub mod flowfield;
pub mod geometry;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod linalg;
pub mod solver;
pub mod sparse;
pub mod surfaces;

pub use error::{Error, Result};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Scalar type for all field computations; implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal (stencil weights, tolerances).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }

    /// Widening conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar not representable as f64")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type SurfaceGrid64 = geometry::SurfaceGrid<f64>;
pub type GeometryField64 = geometry::GeometryField<f64>;
pub type FrameField64 = geometry::FrameField<f64>;
pub type ImageSequence64 = imaging::ImageSequence<f64>;
pub type CoefficientFields64 = assembly::CoefficientFields<f64>;
pub type LinearSystem64 = assembly::LinearSystem<f64>;
pub type FlowField64 = flowfield::FlowField<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
