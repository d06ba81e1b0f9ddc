//! Free amplitudes of cylinders as per-mode half-density kernels, their
//! sewing, traces, and the finite-grid disintegration identities that pin the
//! weight conventions.
//!
//! The amplitude of a cylinder is `exp(log_prefactor) · Π_n Z₁ₙ`, where `Z₁ₙ²`
//! is the mode-`n` boundary marginal of the free field on the doubled cylinder
//! (precision `2wD`, mass one) and the prefactor is `−¼ ln det` of the double.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::determinants::Regime;
use crate::error::{invalid, Error, Result};
use crate::geometry::{check_radius, dtn_cylinder, mode_multiplicity, mode_weight, omega, CylinderGeometry, DtNBlock};
use crate::halfdensity::{compose, kernel_trace, GaussianHD, KernelHD};
use crate::lattice::{steps, FarEnd, LatticeMode};
use crate::linalg::{cholesky, spd_logdet};
use crate::modes::Truncation;
use crate::zeta;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    pub geometry: CylinderGeometry,
    pub m: f64,
    pub regime: Regime,
    pub trunc: Truncation,
    /// Mode-`n` kernel on `[out; in]`, shared by the cosine and sine coordinates.
    pub modes: Vec<KernelHD>,
    pub log_prefactor: f64,
}

/// JSON view of an amplitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSummary {
    pub radius: f64,
    pub length: f64,
    pub m: f64,
    pub regime: Regime,
    pub n_max: usize,
    /// `[out-out, out-in, in-in]` precision entries per mode.
    pub precisions: Vec<[f64; 3]>,
    pub log_prefactor: f64,
}

impl Amplitude {
    pub fn summary(&self) -> AmplitudeSummary {
        AmplitudeSummary {
            radius: self.geometry.radius,
            length: self.geometry.length,
            m: self.m,
            regime: self.regime,
            n_max: self.trunc.n_max(),
            precisions: self
                .modes
                .iter()
                .map(|k| {
                    let q = k.density().precision();
                    [q[(0, 0)], q[(0, 1)], q[(1, 1)]]
                })
                .collect(),
            log_prefactor: self.log_prefactor,
        }
    }

    /// The amplitude of the reversed cylinder.
    pub fn reversed(&self) -> Self {
        Self {
            geometry: self.geometry.reversed(),
            modes: self.modes.iter().map(KernelHD::adjoint).collect(),
            ..self.clone()
        }
    }

    /// `ln` of the amplitude at boundary mode values (one real coordinate per mode).
    pub fn log_value(&self, out: &[f64], inp: &[f64]) -> Result<f64> {
        let n = self.modes.len();
        if out.len() != n || inp.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: out.len().min(inp.len()) });
        }
        Ok(self.log_prefactor
            + self
                .modes
                .iter()
                .zip(out.iter().zip(inp))
                .map(|(k, (o, i))| k.log_value(&DVector::from_element(1, *o), &DVector::from_element(1, *i)))
                .sum::<f64>())
    }
}

/// Closed-surface partition function `Z = exp(log_value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedPartition {
    pub log_value: f64,
    pub regime: Regime,
    pub n_max: usize,
}

impl ClosedPartition {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(invalid("mass", format!("free amplitudes need m > 0, got {m}")));
    }
    Ok(())
}

/// Weighted boundary block of mode `n` in the given regime.
fn regime_block(geom: &CylinderGeometry, m: f64, n: usize, regime: Regime) -> Result<DtNBlock> {
    match regime {
        Regime::Truncated { h } => Ok(LatticeMode::new(geom.radius, m, n, h)?.block(steps(geom.length, h)?)),
        Regime::Zeta => Ok(dtn_cylinder(geom, m, n)?.scaled(mode_weight(geom.radius, n))),
    }
}

/// Kernel on `[out; in]` with precision `2·[[d, b], [b, a]]` and unit mass.
fn mode_kernel(block: &DtNBlock) -> Result<KernelHD> {
    let q = DMatrix::from_row_slice(2, 2, &[2.0 * block.d, 2.0 * block.b, 2.0 * block.b, 2.0 * block.a]);
    KernelHD::new(1, 1, GaussianHD::new(q, DVector::zeros(2), 0.0)?)
}

/// `ln det` of the doubled cylinder, over modes `≤ n_max` (truncated) or
/// ζ-regularized.
fn double_logdet(geom: &CylinderGeometry, m: f64, trunc: Truncation, regime: Regime) -> Result<f64> {
    match regime {
        Regime::Truncated { h } => {
            let n_steps = steps(geom.length, h)?;
            let mut s = 0.0;
            for n in 0..=trunc.n_max() {
                let lm = LatticeMode::new(geom.radius, m, n, h)?;
                s += mode_multiplicity(n) as f64 * lm.torus_logdet(2 * n_steps)?;
            }
            Ok(s)
        }
        Regime::Zeta => zeta::zeta_logdet_torus(m, geom.radius, 2.0 * geom.length),
    }
}

pub fn amplitude_free(geom: &CylinderGeometry, m: f64, trunc: Truncation, regime: Regime) -> Result<Amplitude> {
    check_mass(m)?;
    if regime == Regime::Zeta {
        zeta::require_validated()?;
    }
    let modes = (0..=trunc.n_max())
        .map(|n| mode_kernel(&regime_block(geom, m, n, regime)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Amplitude {
        geometry: geom.clone(),
        m,
        regime,
        trunc,
        modes,
        log_prefactor: -0.25 * double_logdet(geom, m, trunc, regime)?,
    })
}

/// `a2 ∘ a1`: `a1`'s out-circle is sewn to `a2`'s in-circle. The mass produced
/// by each mode composition moves into the prefactor.
pub fn sew(a2: &Amplitude, a1: &Amplitude) -> Result<Amplitude> {
    check_radius(a1.geometry.radius, a2.geometry.radius)?;
    if a1.trunc != a2.trunc {
        return Err(Error::TruncationMismatch(a1.trunc.n_max(), a2.trunc.n_max()));
    }
    if a1.regime != a2.regime {
        return Err(invalid("regime", format!("cannot sew {:?} to {:?}", a2.regime, a1.regime)));
    }
    if a1.m != a2.m {
        return Err(invalid("mass", format!("cannot sew m = {} to m = {}", a2.m, a1.m)));
    }
    let mut log_prefactor = a1.log_prefactor + a2.log_prefactor;
    let mut modes = Vec::with_capacity(a1.modes.len());
    for (n, (k2, k1)) in a2.modes.iter().zip(&a1.modes).enumerate() {
        let k = compose(k2, k1)?;
        let lm = k.density().log_mass();
        log_prefactor += 0.5 * mode_multiplicity(n) as f64 * lm;
        modes.push(KernelHD::new(1, 1, k.into_density().scaled(-lm))?);
    }
    Ok(Amplitude {
        geometry: a1.geometry.then(&a2.geometry)?,
        m: a1.m,
        regime: a1.regime,
        trunc: a1.trunc,
        modes,
        log_prefactor,
    })
}

/// `ln tr Z(Σ)` for a cylinder whose two ends are identified.
pub fn trace_amplitude(a: &Amplitude) -> Result<ClosedPartition> {
    let mut s = a.log_prefactor;
    for (n, k) in a.modes.iter().enumerate() {
        s += mode_multiplicity(n) as f64 * kernel_trace(k)?;
    }
    Ok(ClosedPartition { log_value: s, regime: a.regime, n_max: a.trunc.n_max() })
}

/// Torus partition `det(m² + Δ)^{−1/2}` from the spectrum: circulant
/// eigenvalues of the axial grid, or the ζ-determinant.
pub fn torus_partition(m: f64, radius: f64, circumference: f64, trunc: Truncation, regime: Regime) -> Result<ClosedPartition> {
    check_mass(m)?;
    let logdet = match regime {
        Regime::Truncated { h } => {
            let nodes = steps(circumference, h)?;
            (0..=trunc.n_max())
                .map(|n| Ok(mode_multiplicity(n) as f64 * LatticeMode::new(radius, m, n, h)?.torus_logdet_eigen(nodes)))
                .sum::<Result<f64>>()?
        }
        Regime::Zeta => zeta::zeta_logdet_torus(m, radius, circumference)?,
    };
    Ok(ClosedPartition { log_value: -0.5 * logdet, regime, n_max: trunc.n_max() })
}

/// Largest relative difference of the mode precisions, and the absolute
/// difference of the prefactors.
pub fn amplitude_residuals(a: &Amplitude, b: &Amplitude) -> Result<(f64, f64)> {
    if a.modes.len() != b.modes.len() {
        return Err(Error::TruncationMismatch(a.trunc.n_max(), b.trunc.n_max()));
    }
    let mut kern: f64 = 0.0;
    for (x, y) in a.modes.iter().zip(&b.modes) {
        let (qx, qy) = (x.density().precision(), y.density().precision());
        let scale = qx.abs().max().max(qy.abs().max());
        kern = kern.max((qx - qy).abs().max() / scale);
        kern = kern.max((x.density().log_mass() - y.density().log_mass()).abs());
    }
    Ok((kern, (a.log_prefactor - b.log_prefactor).abs()))
}

/// One row of the short-cylinder limit study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityLimitRow {
    pub length: f64,
    /// Largest change of a mode precision of `a` after sewing on the short cylinder.
    pub kernel_change: f64,
    pub prefactor_change: f64,
}

/// Sew cylinders of the given short lengths onto `a` and report how far the
/// result moves. No target is asserted.
pub fn identity_limit_study(a: &Amplitude, lengths: &[f64]) -> Result<Vec<IdentityLimitRow>> {
    lengths
        .iter()
        .map(|&l| {
            let short = amplitude_free(&CylinderGeometry::new(a.geometry.radius, l)?, a.m, a.trunc, a.regime)?;
            let sewn = sew(&short, a)?;
            let mut kernel_change: f64 = 0.0;
            for (x, y) in sewn.modes.iter().zip(&a.modes) {
                let (qx, qy) = (x.density().precision(), y.density().precision());
                kernel_change = kernel_change.max((qx - qy).abs().max() / qy.abs().max());
            }
            Ok(IdentityLimitRow {
                length: l,
                kernel_change,
                prefactor_change: sewn.log_prefactor - a.log_prefactor,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisintegrationReport {
    pub n_max: usize,
    pub intervals: usize,
    /// Conditional mean against the discrete Helmholtz extension.
    pub mean_residual: f64,
    /// Conditional covariance against the Dirichlet Green's matrix.
    pub covariance_residual: f64,
    /// Boundary marginal precision against the amplitude kernel.
    pub marginal_residual: f64,
    pub max_residual: f64,
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(f64::MIN_POSITIVE)
}

fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(cholesky(m, what)?.inverse())
}

/// Split the doubled-cylinder Gaussian on a grid of `intervals` steps per
/// half into boundary values and bulk, and compare each piece with its
/// closed form.
pub fn disintegration_check(geom: &CylinderGeometry, m: f64, trunc: Truncation, intervals: usize, seed: u64) -> Result<DisintegrationReport> {
    check_mass(m)?;
    if intervals < 2 {
        return Err(invalid("intervals", "need at least two grid steps"));
    }
    let h = geom.length / intervals as f64;
    let amp = amplitude_free(geom, m, trunc, Regime::Truncated { h })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_n = intervals;
    let (mut r_mean, mut r_cov, mut r_marg) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..=trunc.n_max() {
        let lm = LatticeMode::new(geom.radius, m, n, h)?;
        let k = lm.cyclic_precision(2 * big_n);
        // Bulk of the first half: nodes 1..N-1; boundary nodes 0 and N.
        let bulk: Vec<usize> = (1..big_n).collect();
        let kii = k.select_rows(&bulk).select_columns(&bulk);
        let kib = k.select_rows(&bulk).select_columns(&[0, big_n]);
        let cov = inverse(&kii, "bulk precision")?;

        let kap = lm.kappa();
        let (sk, skn) = (kap.sinh(), (kap * big_n as f64).sinh());
        let green = DMatrix::from_fn(big_n - 1, big_n - 1, |r, c| {
            let (i, j) = ((r.min(c) + 1) as f64, (r.max(c) + 1) as f64);
            h / lm.weight * (kap * i).sinh() * (kap * (big_n as f64 - j)).sinh() / (sk * skn)
        });
        r_cov = r_cov.max(max_rel(&cov, &green));

        for _ in 0..4 {
            let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let mean = -(&cov * (&kib * DVector::from_column_slice(&[a, b])));
            let closed = DVector::from_fn(big_n - 1, |r, _| {
                let j = (r + 1) as f64;
                ((kap * (big_n as f64 - j)).sinh() * a + (kap * j).sinh() * b) / skn
            });
            r_mean = r_mean.max((&mean - &closed).abs().max() / closed.abs().max().max(f64::MIN_POSITIVE));
        }

        // Boundary marginal of the whole torus chain on nodes (N, 0) = (out, in).
        let full = inverse(&k, "doubled chain")?;
        let sub = full.select_rows(&[big_n, 0]).select_columns(&[big_n, 0]);
        let marginal = inverse(&sub, "boundary covariance")?;
        r_marg = r_marg.max(max_rel(&marginal, amp.modes[n].density().precision()));
    }
    Ok(DisintegrationReport {
        n_max: trunc.n_max(),
        intervals,
        mean_residual: r_mean,
        covariance_residual: r_cov,
        marginal_residual: r_marg,
        max_residual: r_mean.max(r_cov).max(r_marg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierReport {
    pub n_max: usize,
    pub covectors: usize,
    /// Largest `|ln LHS − ln RHS| / max(1, |ln RHS|)` over modes and covectors.
    pub max_residual: f64,
}

/// Characteristic functional of the free field on the double of
/// `Σ₃ = Σ₂ ∘ Σ₁` (`Σ₁` capped with a free end) at covectors on the circles
/// `(S₁, S₂, S₁*)`: once glued from the pieces' boundary operators and
/// interior determinants, once from the dense precision of the whole double.
pub fn fourier_identity(
    g1: &CylinderGeometry,
    g2: &CylinderGeometry,
    m: f64,
    trunc: Truncation,
    h: f64,
    covectors: usize,
    seed: u64,
) -> Result<FourierReport> {
    check_mass(m)?;
    check_radius(g1.radius, g2.radius)?;
    let (n1, n2) = (steps(g1.length, h)?, steps(g2.length, h)?);
    let total = 2 * (n1 + n2);
    let s_nodes = [n1, n1 + n2, n1 + 2 * n2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs: Vec<[f64; 3]> = (0..covectors)
        .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
        .collect();
    let mut worst: f64 = 0.0;
    for n in 0..=trunc.n_max() {
        let lm = LatticeMode::new(g1.radius, m, n, h)?;
        let cap = lm.capped_block(n1, FarEnd::Free);
        let b2 = lm.block(n2);
        let mm = DMatrix::from_row_slice(
            3,
            3,
            &[cap + b2.a, b2.b, 0.0, b2.b, b2.d + b2.a, b2.b, 0.0, b2.b, b2.d + cap],
        );
        let interior = 2.0 * lm.capped_logdet(n1, FarEnd::Free)? + 2.0 * lm.dirichlet_logdet(n2)?;
        let mm_inv = inverse(&mm, "glued boundary operator")?;
        let lhs_const = -0.5 * interior + 1.5 * LN_2PI - 0.5 * spd_logdet(&mm, "glued boundary operator")?;

        let k = lm.chain_precision(total);
        let rhs_const = -0.5 * spd_logdet(&(&k / (2.0 * std::f64::consts::PI)), "doubled chain")?;
        let k_inv = inverse(&k, "doubled chain")?;
        let c_ss = k_inv.select_rows(&s_nodes).select_columns(&s_nodes);

        for f in &fs {
            let f = DVector::from_column_slice(f);
            let lhs = lhs_const - 0.5 * f.dot(&(&mm_inv * &f));
            let rhs = rhs_const - 0.5 * f.dot(&(&c_ss * &f));
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    Ok(FourierReport { n_max: trunc.n_max(), covectors, max_residual: worst })
}

/// Per-mode marginal variance of one boundary coordinate under `Z₁ₙ²`.
pub fn boundary_variance(a: &Amplitude, n: usize) -> Result<f64> {
    let k = a.modes.get(n).ok_or_else(|| invalid("mode", format!("{n} exceeds the truncation")))?;
    Ok(inverse(k.density().precision(), "mode kernel")?[(0, 0)])
}

/// Continuum frequency of mode `n`, for callers comparing with series oracles.
pub fn mode_omega(a: &Amplitude, n: usize) -> Result<f64> {
    omega(a.m, a.geometry.radius, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::torus_green_series;

    fn cyl(l: f64) -> CylinderGeometry {
        CylinderGeometry::new(1.0, l).unwrap()
    }

    const H: Regime = Regime::Truncated { h: 1.0 / 16.0 };

    #[test]
    fn sewing_matches_direct_amplitude() {
        let t = Truncation::new(6).unwrap();
        let a1 = amplitude_free(&cyl(0.75), 1.3, t, H).unwrap();
        let a2 = amplitude_free(&cyl(1.25), 1.3, t, H).unwrap();
        let a3 = amplitude_free(&cyl(2.0), 1.3, t, H).unwrap();
        let (k, p) = amplitude_residuals(&sew(&a2, &a1).unwrap(), &a3).unwrap();
        assert!(k < 1e-10 && p < 1e-9, "{k} {p}");
    }

    #[test]
    fn trace_matches_torus_spectrum() {
        let t = Truncation::new(5).unwrap();
        let a = amplitude_free(&cyl(1.5), 0.8, t, H).unwrap();
        let tr = trace_amplitude(&a).unwrap();
        let z = torus_partition(0.8, 1.0, 1.5, t, H).unwrap();
        assert!((tr.log_value - z.log_value).abs() < 1e-9, "{} {}", tr.log_value, z.log_value);
    }

    #[test]
    fn reflection_swaps_blocks() {
        let t = Truncation::new(3).unwrap();
        let a = amplitude_free(&cyl(1.0), 1.0, t, H).unwrap();
        let r = a.reversed();
        assert_eq!(r.reversed(), a);
        let (k, p) = amplitude_residuals(&r, &a).unwrap();
        assert!(k < 1e-15 && p == 0.0);
    }

    #[test]
    fn sewing_rejects_mismatch() {
        let a = amplitude_free(&cyl(1.0), 1.0, Truncation::new(3).unwrap(), H).unwrap();
        let b = amplitude_free(&cyl(1.0), 1.0, Truncation::new(4).unwrap(), H).unwrap();
        assert!(matches!(sew(&a, &b), Err(Error::TruncationMismatch(_, _))));
        let c = amplitude_free(&CylinderGeometry::new(2.0, 1.0).unwrap(), 1.0, Truncation::new(3).unwrap(), H).unwrap();
        assert!(matches!(sew(&a, &c), Err(Error::RadiusMismatch(_, _))));
        assert!(amplitude_free(&cyl(1.0), 0.0, Truncation::new(3).unwrap(), H).is_err());
    }

    #[test]
    fn zeta_marginal_variance_is_doubled_torus_green() {
        zeta::validate_oracle().unwrap();
        let t = Truncation::new(4).unwrap();
        let a = amplitude_free(&cyl(0.9), 1.1, t, Regime::Zeta).unwrap();
        for n in 0..=4 {
            let w = mode_weight(1.0, n);
            let g = torus_green_series(mode_omega(&a, n).unwrap(), 1.8, 0.0, 20000) / w;
            assert!((boundary_variance(&a, n).unwrap() - g).abs() < 1e-9 * g);
        }
    }

    #[test]
    fn disintegration_small_grid() {
        let r = disintegration_check(&cyl(1.0), 1.0, Truncation::new(3).unwrap(), 16, 7).unwrap();
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn fourier_side_small_grid() {
        let r = fourier_identity(&cyl(0.5), &cyl(0.75), 1.0, Truncation::new(3).unwrap(), 0.125, 5, 3).unwrap();
        assert!(r.max_residual < 1e-9, "{r:?}");
    }

    #[test]
    fn zeta_regime_sewing_and_trace() {
        zeta::validate_oracle().unwrap();
        let t = Truncation::new(16).unwrap();
        let a1 = amplitude_free(&cyl(1.0), 1.0, t, Regime::Zeta).unwrap();
        let a3 = amplitude_free(&cyl(2.0), 1.0, t, Regime::Zeta).unwrap();
        let (k, p) = amplitude_residuals(&sew(&a1, &a1).unwrap(), &a3).unwrap();
        assert!(k < 1e-10 && p < 1e-5, "{k} {p}");
        let tr = trace_amplitude(&a1).unwrap();
        let z = torus_partition(1.0, 1.0, 1.0, t, Regime::Zeta).unwrap();
        assert!((tr.log_value - z.log_value).abs() < 1e-5, "{} {}", tr.log_value, z.log_value);
    }

    #[test]
    fn sewing_is_associative() {
        let t = Truncation::new(4).unwrap();
        let [a, b, c] = [0.5, 0.25, 0.75].map(|l| amplitude_free(&cyl(l), 0.9, t, H).unwrap());
        let left = sew(&sew(&c, &b).unwrap(), &a).unwrap();
        let right = sew(&c, &sew(&b, &a).unwrap()).unwrap();
        let (k, p) = amplitude_residuals(&left, &right).unwrap();
        assert!(k < 1e-10 && p < 1e-10);
        let half = amplitude_free(&cyl(0.75), 0.9, t, H).unwrap();
        let whole = amplitude_free(&cyl(1.5), 0.9, t, H).unwrap();
        let d = trace_amplitude(&sew(&half, &half).unwrap()).unwrap().log_value - trace_amplitude(&whole).unwrap().log_value;
        assert!(d.abs() < 1e-9);
    }
}
