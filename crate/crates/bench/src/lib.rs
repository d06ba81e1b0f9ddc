//! Benchmark fixtures shared by the criterion targets.

use segal_core::{Amplitude, BlockOperator, CylinderGeometry, GaussianHD, KernelHD, MCConfig, Regime, Truncation};
use segal_core::sewing::amplitude_free;

pub const M: f64 = 1.0;
pub const R: f64 = 1.0;

pub fn cylinder(length: f64) -> CylinderGeometry {
    CylinderGeometry::new(R, length).expect("valid geometry")
}

pub fn block(length: f64, n_max: usize) -> BlockOperator {
    BlockOperator::cylinder(&cylinder(length), M, Truncation::new(n_max).unwrap()).unwrap()
}

pub fn amplitude(length: f64, n_max: usize, regime: Regime) -> Amplitude {
    amplitude_free(&cylinder(length), M, Truncation::new(n_max).unwrap(), regime).unwrap()
}

/// Square kernel on `d` variables with a standard density.
pub fn kernel(d: usize) -> KernelHD {
    KernelHD::new(d, d, GaussianHD::standard(2 * d)).unwrap()
}

pub fn mc_config(cutoff: usize, samples: usize) -> MCConfig {
    MCConfig::quartic(M, R, 2.0 * std::f64::consts::PI, 0.1, cutoff, samples, 0)
}
