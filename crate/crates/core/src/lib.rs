//! Functorial Gaussian field theory on circles and cylinders: mode measures,
//! half-density kernels, Dirichlet-to-Neumann gluing, determinant gluing,
//! Wick reordering and sewing checks.

pub mod determinants;
pub mod error;
pub mod geometry;
pub mod halfdensity;
pub mod interacting;
pub mod lattice;
pub mod linalg;
pub mod modes;
pub mod sewing;
pub mod special;
pub mod wick;
pub mod zeta;

pub use error::{Error, Result};
pub use geometry::{BlockOperator, CylinderGeometry, DtNBlock};
pub use halfdensity::{GaussianHD, KernelHD};
pub use modes::{CircleField, ModeMeasure, Truncation, Verdict, ZeroMode};
pub use determinants::{Regime, SpectrumSpec, SurfaceKind};
pub use interacting::{MCConfig, MCReport, WickScheme};
pub use sewing::{Amplitude, ClosedPartition};
pub use wick::{FieldGrid, SpectralCutoff, TorusParams, WickPolynomial};
