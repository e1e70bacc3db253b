//! Sparse-view cone-beam CT reconstruction toolkit.
//!
//! The crate covers the full desk-scale pipeline: acquisition geometry and
//! view planning, analytic ellipsoid phantoms, a ray-marching projector with
//! a matched adjoint and a quantum-noise model, FDK and SART baselines, a
//! small reverse-mode autodiff engine, the codebook-based reconstruction
//! network, its three training stages, and PSNR/SSIM evaluation.
//!
//! All numeric kernels are generic over the scalar type (see [`Scalar`]);
//! `f32` is the working precision and `f64` is used for verification.

pub mod geometry;
pub mod phantom;
pub mod volume;
pub mod io;
pub mod projector;
pub mod fdk;
pub mod sart;
pub mod nn;
pub mod dice;
pub mod train;
pub mod metrics;
pub mod slices;

mod parallel;

use std::fmt;

/// Scalar type the numeric kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Bit width, used as the dtype tag in checkpoint files.
    const BITS: u32;

    fn of_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;

    fn of_f32(x: f32) -> Self {
        Self::of_f64(x as f64)
    }
    fn as_f32(self) -> f32 {
        self.as_f64() as f32
    }
}

impl Scalar for f32 {
    const BITS: u32 = 32;
    fn of_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BITS: u32 = 64;
    fn of_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Working precision of the standard pipeline.
pub type Real = f32;

/// Volume container at working precision.
pub type Volume32 = volume::Volume<f32>;
/// Volume container at verification precision.
pub type Volume64 = volume::Volume<f64>;
/// Projection container at working precision.
pub type ProjectionSet32 = volume::ProjectionSet<f32>;
/// Projection container at verification precision.
pub type ProjectionSet64 = volume::ProjectionSet<f64>;

pub use geometry::{ScanGeometry, ViewAngleSet, ViewPlan};
pub use phantom::EllipsoidPhantomSpec;
pub use volume::{ProjectionSet, Volume};
