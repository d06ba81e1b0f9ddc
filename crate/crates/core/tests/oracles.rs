//! Cross-checks between independently computed quantities.

use nalgebra::SymmetricEigen;
use segal_core::determinants::{SpectrumSpec, SurfaceKind};
use segal_core::geometry::{bvp_richardson, dirichlet_green_series, dtn_block, mode_weight};
use segal_core::lattice::LatticeMode;
use segal_core::sewing::{amplitude_free, boundary_variance};
use segal_core::zeta;
use segal_core::{CylinderGeometry, Regime, Truncation};

#[test]
fn finite_difference_spectrum_approaches_exact() {
    let (m, r, l) = (0.8, 1.3, 1.0);
    let h = 1.0 / 256.0;
    let exact = SpectrumSpec { kind: SurfaceKind::DirichletCylinder, m, radius: r, length: l }
        .eigenvalues(2, 3)
        .unwrap();
    let mut fd = Vec::new();
    for n in 0..=2 {
        let lm = LatticeMode::new(r, m, n, h).unwrap();
        let k = lm.dirichlet_precision(256) / (lm.weight * h);
        let mut ev: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        // modes ±n share the axial ladder
        for _ in 0..if n == 0 { 1 } else { 2 } {
            fd.extend_from_slice(&ev[..3]);
        }
    }
    fd.sort_by(f64::total_cmp);
    for (a, b) in fd.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-3 * b, "{a} {b}");
    }
}

#[test]
fn regularized_log_sum_obeys_power_rule() {
    // ln det_ζ(D²) = 2 ln det_ζ(D) for D = diag(ωₙ); check through the counterterm route.
    let (m, r): (f64, f64) = (0.9, 1.4);
    let n_max = 400;
    let mut raw = (m * m).ln();
    for n in 1..=n_max {
        let w2 = m * m + (n as f64 / r).powi(2);
        raw += 2.0 * w2.ln();
    }
    let reg = raw - 2.0 * zeta::counterterm_log(m, r, n_max);
    assert!((reg - 2.0 * zeta::log_omega_sum(m, r).unwrap()).abs() < 1e-8, "{reg}");
}

#[test]
fn boundary_value_problem_recovers_block() {
    for (w, l) in [(0.5, 1.0), (2.0, 0.75)] {
        let b = dtn_block(w, l);
        let (x, y) = bvp_richardson(w, l, 1.0, 0.0, 1.0 / 512.0).unwrap();
        assert!((x - b.a).abs() < 1e-8 && (y - b.b).abs() < 1e-8, "{x} {y} {b:?}");
    }
}

#[test]
fn truncated_marginal_is_lattice_green_function() {
    // Z₁² marginal on one boundary circle: the doubled chain's Green's function at a node.
    let h = 1.0 / 32.0;
    let g = CylinderGeometry::new(1.0, 1.0).unwrap();
    let a = amplitude_free(&g, 1.0, Truncation::new(3).unwrap(), Regime::Truncated { h }).unwrap();
    for n in 0..=3 {
        let lm = LatticeMode::new(1.0, 1.0, n, h).unwrap();
        let k = lm.cyclic_precision(64);
        let cov = k.try_inverse().unwrap();
        assert!((boundary_variance(&a, n).unwrap() - cov[(0, 0)]).abs() < 1e-12 * cov[(0, 0)]);
    }
}

#[test]
fn dirichlet_green_series_matches_lattice() {
    let (w, l) = (1.2, 1.0);
    let h = 1.0 / 512.0;
    let lm = LatticeMode::unit(w, h);
    let cov = lm.dirichlet_precision(512).try_inverse().unwrap();
    let g = dirichlet_green_series(w, l, 0.25, 200_000);
    // node 128 sits at s = 0.25; lattice Green's function converges at O(h²)
    assert!((cov[(127, 127)] - g).abs() < 1e-5, "{} {g}", cov[(127, 127)]);
    assert!(mode_weight(1.0, 0) > mode_weight(1.0, 1));
}
