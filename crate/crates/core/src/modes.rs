//! Fourier-mode representation of circle fields and mode-diagonal Gaussian
//! measures.
//!
//! A real field on `S¹_R` is written `φ = φ₀ + Σₙ (φₙ e^{inθ} + c.c.)`. The
//! measure of mass `M` is the product of a zero-mode Gaussian and, for each
//! `n ≥ 1`, the complex Gaussian `(sₙ/2π) exp(−½ sₙ |φₙ|²) dλ(φₙ)` with
//! `sₙ = ((MR)² + n²)^{1/2}`. Real and imaginary parts of `φₙ` are therefore
//! independent with variance `1/sₙ` each.

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Mode cutoff: modes `|n| ≤ n_max` are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    n_max: usize,
}

impl Truncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Real dimension of the truncated field space, `2·n_max + 1`.
    pub fn real_dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Mode indices `0..=n_max` paired with the number of real coordinates
    /// each carries (1 for the zero mode, 2 otherwise).
    pub fn modes_with_multiplicity(&self) -> impl Iterator<Item = (usize, f64)> {
        (0..=self.n_max).map(|n| (n, if n == 0 { 1.0 } else { 2.0 }))
    }
}

/// Truncated real field on a circle in the complex Fourier convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleField {
    pub phi0: f64,
    /// `modes[k]` holds `φ_{k+1}`.
    pub modes: Vec<Complex<f64>>,
}

impl CircleField {
    pub fn zero(trunc: Truncation) -> Self {
        Self {
            phi0: 0.0,
            modes: vec![Complex::new(0.0, 0.0); trunc.n_max()],
        }
    }

    /// Field with a single unit coefficient in mode `n` (`n = 0` is the zero mode).
    pub fn unit_mode(trunc: Truncation, n: usize) -> Self {
        let mut f = Self::zero(trunc);
        if n == 0 {
            f.phi0 = 1.0;
        } else {
            f.modes[n - 1] = Complex::new(1.0, 0.0);
        }
        f
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        let mut v = self.phi0;
        for (k, c) in self.modes.iter().enumerate() {
            let n = (k + 1) as f64;
            v += 2.0 * (c * Complex::from_polar(1.0, n * theta)).re;
        }
        v
    }

    /// Pairing `(f, φ) = f₀φ₀ + 2 Σ Re(conj(fₙ) φₙ)`, i.e. `(1/2π)∫ f φ dθ`.
    pub fn pairing(&self, other: &CircleField) -> f64 {
        let mut s = self.phi0 * other.phi0;
        for (a, b) in self.modes.iter().zip(&other.modes) {
            s += 2.0 * (a.conj() * b).re;
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.phi0.is_finite() && self.modes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Zero-mode factor of a mode measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZeroMode {
    Variance(f64),
    /// `M = 0`: the zero mode carries flat Lebesgue measure.
    Lebesgue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMeasure {
    pub mass: f64,
    pub radius: f64,
    /// `variance[k]` is the variance of `Re φ_{k+1}` (and of `Im φ_{k+1}`).
    pub variance: Vec<f64>,
    pub zero_mode: ZeroMode,
}

/// Per-mode precision `((MR)² + n²)^{1/2}` of the complex coordinate.
pub fn mode_precision(mass_radius: f64, n: u64) -> f64 {
    let n = n as f64;
    (mass_radius * mass_radius + n * n).sqrt()
}

/// The truncated product measure of mass `mass` on the circle of radius `radius`.
pub fn mode_measure(mass: f64, radius: f64, trunc: Truncation) -> Result<ModeMeasure> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(invalid("mass", format!("must be non-negative, got {mass}")));
    }
    let mr = mass * radius;
    let variance = (1..=trunc.n_max() as u64)
        .map(|n| 1.0 / mode_precision(mr, n))
        .collect();
    // The zero-mode precision follows the dilation rule and depends on MR only.
    let zero_mode = if mass == 0.0 {
        ZeroMode::Lebesgue
    } else {
        ZeroMode::Variance(1.0 / (mr * mr))
    };
    Ok(ModeMeasure {
        mass,
        radius,
        variance,
        zero_mode,
    })
}

impl ModeMeasure {
    pub fn truncation(&self) -> Truncation {
        Truncation {
            n_max: self.variance.len(),
        }
    }

    pub fn mass_radius(&self) -> f64 {
        self.mass * self.radius
    }

    fn zero_variance(&self) -> Result<f64> {
        match self.zero_mode {
            ZeroMode::Variance(v) => Ok(v),
            ZeroMode::Lebesgue => Err(Error::LebesgueZeroMode),
        }
    }

    /// Draw one field; deterministic for a fixed seed.
    pub fn sample(&self, seed: u64) -> Result<CircleField> {
        let v0 = self.zero_variance()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with(&mut rng, v0))
    }

    fn sample_with<R: rand::Rng>(&self, rng: &mut R, v0: f64) -> CircleField {
        let mut draw = || -> f64 { StandardNormal.sample(rng) };
        let phi0 = v0.sqrt() * draw();
        let modes = self
            .variance
            .iter()
            .map(|v| {
                let s = v.sqrt();
                Complex::new(s * draw(), s * draw())
            })
            .collect();
        CircleField { phi0, modes }
    }

    /// `n` fields from one stream seeded by `seed`.
    pub fn sample_many(&self, seed: u64, n: usize) -> Result<Vec<CircleField>> {
        let v0 = self.zero_variance()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.sample_with(&mut rng, v0)).collect())
    }

    /// `∫ exp(−i(f, φ)) dμ(φ) = exp(−½ Var((f, φ)))`, computed mode by mode.
    pub fn characteristic_functional(&self, f: &CircleField) -> Result<f64> {
        let v0 = self.zero_variance()?;
        if f.modes.len() != self.variance.len() {
            return Err(Error::DimensionMismatch {
                expected: self.variance.len(),
                found: f.modes.len(),
            });
        }
        let mut var = f.phi0 * f.phi0 * v0;
        for (c, v) in f.modes.iter().zip(&self.variance) {
            var += 4.0 * c.norm_sqr() * v;
        }
        Ok((-0.5 * var).exp())
    }
}

/// `1 − 2√(s₁s₂)/(s₁+s₂)` for the mode-`n` precisions of two `MR` values,
/// without cancellation.
pub fn mode_defect(mr1: f64, mr2: f64, n: u64) -> f64 {
    let (s1, s2) = (mode_precision(mr1, n), mode_precision(mr2, n));
    let ds = (mr1 - mr2) * (mr1 + mr2) / (s1 + s2);
    let d = ds / (s1.sqrt() + s2.sqrt());
    d * d / (s1 + s2)
}

/// Per-mode Hellinger affinities of two circle measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HellingerReport {
    /// Affinity of the `n`-th complex mode, `n = 1..=n_terms`.
    pub factors: Vec<f64>,
    /// Logarithm of the cumulative product after each factor.
    pub log_partial: Vec<f64>,
    /// Product extrapolated with the `C/n⁴` tail.
    pub limit_estimate: f64,
}

/// Hellinger affinities `∫ (dμ₁ dμ₂)^{1/2}` of the complex modes `n ≥ 1`.
///
/// The zero mode is excluded. Each factor is `2√(s₁s₂)/(s₁+s₂)` where `sᵢ` is
/// the mode precision; the measures' own truncations are ignored and modes are
/// generated from their `MR` products up to `n_terms`.
pub fn hellinger_affinity(mu1: &ModeMeasure, mu2: &ModeMeasure, n_terms: usize) -> Result<HellingerReport> {
    if n_terms < 1 {
        return Err(invalid("n_terms", "must be at least 1"));
    }
    let (a, b) = (mu1.mass_radius(), mu2.mass_radius());
    let mut factors = Vec::with_capacity(n_terms);
    let mut log_partial = Vec::with_capacity(n_terms);
    let mut acc = 0.0;
    let mut last_defect = 0.0;
    for n in 1..=n_terms as u64 {
        let defect = mode_defect(a, b, n);
        acc += (-defect).ln_1p();
        factors.push(1.0 - defect);
        log_partial.push(acc);
        last_defect = defect;
    }
    let n = n_terms as f64;
    let c = last_defect * n.powi(4);
    let tail = -c / (3.0 * (n + 0.5).powi(3));
    Ok(HellingerReport {
        factors,
        log_partial,
        limit_estimate: (acc + tail).exp(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Equivalent,
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KakutaniReport {
    pub verdict: Verdict,
    /// Fitted exponent `p` in `−ln(factorₙ) ≈ C n^{−p}`.
    pub tail_exponent_n: f64,
    /// Fitted exponent `q` in `−ln(factorₙ) ≈ C' λₙ^{−q}`.
    pub tail_exponent_lambda: f64,
    /// Log of the partial product over `n ≤ n_sum`.
    pub log_partial: f64,
    pub n_sum: u64,
    /// Tail-corrected log of the infinite product (`−∞` when divergent).
    pub log_limit: f64,
    /// Change of the tail-corrected estimate between `n_sum/2` and `n_sum`.
    pub stabilization: f64,
    /// For divergent products, the extrapolated index where the log-product crosses −30.
    pub crossing_index: Option<f64>,
}

/// Model spectrum `λₙ = n^{2/d}` of a second-order operator in dimension `d`.
pub fn model_spectrum(d: u32) -> impl Fn(u64) -> f64 {
    move |n| (n as f64).powf(2.0 / d as f64)
}

/// Per-real-coordinate affinity of `N(0, 1/(M²+λ))` and `N(0, 1/(m²+λ))`, returned as `−ln(factor)`.
fn surface_log_defect(lambda: f64, m: f64, big_m: f64) -> f64 {
    let p = big_m * big_m + lambda;
    let q = m * m + lambda;
    let d = (big_m * big_m - m * m) / (p.sqrt() + q.sqrt());
    -0.5 * (-(d * d) / (p + q)).ln_1p()
}

const DISJOINT_LOG_THRESHOLD: f64 = -30.0;
const SUMMABILITY_MARGIN: f64 = 0.1;

/// Decide equivalence of the product Gaussians with masses `m` and `big_m`
/// over a spectrum `λₙ` of dimension `d`.
///
/// The affinity product converges to a positive limit exactly when the
/// defects `−ln(factorₙ)` are summable. The defect exponent is fitted on a
/// geometric ladder of indices; products with exponent at most
/// `1 + SUMMABILITY_MARGIN` are declared disjoint and the index where the
/// log-product crosses −30 is extrapolated.
pub fn kakutani_verdict(spectrum: &dyn Fn(u64) -> f64, m: f64, big_m: f64, d: u32) -> Result<KakutaniReport> {
    if !(1..=5).contains(&d) {
        return Err(invalid("d", format!("dimension must be in 1..=5, got {d}")));
    }
    if !(m >= 0.0 && big_m >= 0.0) {
        return Err(invalid("mass", "masses must be non-negative"));
    }
    let ladder: Vec<u64> = (4..=40).map(|k| 1u64 << k).collect();
    let mut prev = 0.0;
    for (i, &n) in std::iter::once(&1u64).chain(ladder.iter()).enumerate() {
        let l = spectrum(n);
        if !(l > prev) || !l.is_finite() {
            return Err(Error::NonIncreasingSpectrum(if i == 0 { 1 } else { n }));
        }
        prev = l;
    }
    let n_sum: u64 = 1 << 20;
    if m == big_m {
        return Ok(KakutaniReport {
            verdict: Verdict::Equivalent,
            tail_exponent_n: f64::INFINITY,
            tail_exponent_lambda: f64::INFINITY,
            log_partial: 0.0,
            n_sum,
            log_limit: 0.0,
            stabilization: 0.0,
            crossing_index: None,
        });
    }
    let fit_pts: Vec<u64> = (20..=32).map(|k| 1u64 << k).collect();
    let xs: Vec<f64> = fit_pts.iter().map(|&n| n as f64).collect();
    let lams: Vec<f64> = fit_pts.iter().map(|&n| spectrum(n)).collect();
    let ys: Vec<f64> = lams.iter().map(|&l| surface_log_defect(l, m, big_m)).collect();
    let p = -fit_loglog_slope(&xs, &ys);
    let q = -fit_loglog_slope(&lams, &ys);

    let mut acc = 0.0;
    let mut half = 0.0;
    for n in 1..=n_sum {
        acc -= surface_log_defect(spectrum(n), m, big_m);
        if n == n_sum / 2 {
            half = acc;
        }
    }
    let defect_at = |n: u64| surface_log_defect(spectrum(n), m, big_m);
    // C from the last term; tail Σ_{k>N} C k^{-p} ≈ C (N+½)^{1-p}/(p-1).
    let tail = |n: u64| -> f64 {
        let c = defect_at(n) * (n as f64).powf(p);
        -c * (n as f64 + 0.5).powf(1.0 - p) / (p - 1.0)
    };
    if p > 1.0 + SUMMABILITY_MARGIN {
        let est = acc + tail(n_sum);
        let est_half = half + tail(n_sum / 2);
        Ok(KakutaniReport {
            verdict: Verdict::Equivalent,
            tail_exponent_n: p,
            tail_exponent_lambda: q,
            log_partial: acc,
            n_sum,
            log_limit: est,
            stabilization: (est - est_half).abs(),
            crossing_index: None,
        })
    } else {
        // Extrapolate Σ_{N<k≤K} C k^{-p} until the product reaches the threshold.
        let nf = n_sum as f64;
        let c = defect_at(n_sum) * nf.powf(p);
        let need = acc - DISJOINT_LOG_THRESHOLD;
        let crossing = if (1.0 - p).abs() < 1e-9 {
            nf * (need / c).exp()
        } else if p < 1.0 {
            (need * (1.0 - p) / c + nf.powf(1.0 - p)).powf(1.0 / (1.0 - p))
        } else {
            // 1 < p ≤ 1 + margin: treated as divergent; report the crossing of the
            // power-law continuation when it exists.
            let room = c * nf.powf(1.0 - p) / (p - 1.0);
            if room > need {
                (nf.powf(1.0 - p) - need * (p - 1.0) / c).powf(1.0 / (1.0 - p))
            } else {
                f64::INFINITY
            }
        };
        Ok(KakutaniReport {
            verdict: Verdict::Disjoint,
            tail_exponent_n: p,
            tail_exponent_lambda: q,
            log_partial: acc,
            n_sum,
            log_limit: f64::NEG_INFINITY,
            stabilization: (acc - half).abs(),
            crossing_index: Some(crossing),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: usize) -> Truncation {
        Truncation::new(n).unwrap()
    }

    #[test]
    fn truncation_dimension() {
        assert_eq!(t(5).real_dim(), 11);
        assert!(Truncation::new(0).is_err());
    }

    #[test]
    fn unit_mass_first_variance() {
        let mu = mode_measure(1.0, 1.0, t(3)).unwrap();
        assert!((mu.variance[0] - 0.707_106_781_2).abs() < 1e-10);
        assert_eq!(mu.zero_mode, ZeroMode::Variance(1.0));
    }

    #[test]
    fn massless_measure_is_radius_free_and_flagged() {
        for r in [0.5, 1.0, 3.0] {
            let mu = mode_measure(0.0, r, t(6)).unwrap();
            assert_eq!(mu.zero_mode, ZeroMode::Lebesgue);
            for (k, v) in mu.variance.iter().enumerate() {
                assert_eq!(*v, 1.0 / (k + 1) as f64);
            }
            assert_eq!(mu.sample(1), Err(Error::LebesgueZeroMode));
        }
    }

    #[test]
    fn dilation_identity() {
        let a = mode_measure(2.0, 3.0, t(10)).unwrap();
        let b = mode_measure(6.0, 1.0, t(10)).unwrap();
        assert_eq!(a.variance, b.variance);
        assert_eq!(a.zero_mode, b.zero_mode);
        for rho in [0.5, 2.0, 7.3] {
            let a = mode_measure(1.3, rho * 0.8, t(20)).unwrap();
            let b = mode_measure(rho * 1.3, 0.8, t(20)).unwrap();
            for (x, y) in a.variance.iter().zip(&b.variance) {
                assert!((x - y).abs() <= 4.0 * f64::EPSILON * x);
            }
        }
    }

    #[test]
    fn variances_strictly_decrease() {
        let mu = mode_measure(0.7, 1.9, t(50)).unwrap();
        assert!(mu.variance.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(mode_measure(1.0, 0.0, t(2)).is_err());
        assert!(mode_measure(1.0, -1.0, t(2)).is_err());
        assert!(mode_measure(-1.0, 1.0, t(2)).is_err());
    }

    #[test]
    fn first_affinity_closed_form() {
        let a = mode_measure(0.0, 1.0, t(1)).unwrap();
        let b = mode_measure(1.0, 1.0, t(1)).unwrap();
        let rep = hellinger_affinity(&a, &b, 1).unwrap();
        let expect = 2.0 * 2f64.powf(0.25) / (1.0 + 2f64.sqrt());
        assert!((rep.factors[0] - expect).abs() < 1e-15);
        assert!((rep.factors[0] - 0.985_171).abs() < 1e-6);
    }

    #[test]
    fn identical_measures_have_unit_affinity() {
        let a = mode_measure(1.5, 2.0, t(4)).unwrap();
        let rep = hellinger_affinity(&a, &a, 100).unwrap();
        assert!(rep.factors.iter().all(|&f| f == 1.0));
        assert_eq!(rep.limit_estimate, 1.0);
        assert!(hellinger_affinity(&a, &a, 0).is_err());
    }

    #[test]
    fn affinity_limit_is_stable_under_doubling() {
        let a = mode_measure(1.0, 1.0, t(1)).unwrap();
        let b = mode_measure(2.0, 1.0, t(1)).unwrap();
        let r1 = hellinger_affinity(&a, &b, 10_000).unwrap();
        let r2 = hellinger_affinity(&a, &b, 20_000).unwrap();
        assert!(r1.limit_estimate > 0.0);
        assert!((r1.limit_estimate - r2.limit_estimate).abs() < 1e-8);
        assert!(r1.factors.iter().all(|&f| f > 0.0 && f <= 1.0));
    }

    #[test]
    fn circle_tail_law() {
        let a = mode_measure(1.0, 1.0, t(1)).unwrap();
        let b = mode_measure(2.0, 1.0, t(1)).unwrap();
        let rep = hellinger_affinity(&a, &b, 10_000).unwrap();
        let idx: Vec<usize> = (0..12).map(|k| 100 * (1 << k) / 4).filter(|&i| i < 10_000).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| (i + 1) as f64).collect();
        let ys: Vec<f64> = idx
            .iter()
            .map(|&i| mode_defect(1.0, 2.0, i as u64 + 1))
            .collect();
        let slope = fit_loglog_slope(&xs, &ys);
        assert!((slope + 4.0).abs() < 0.2, "slope {slope}");
        assert!(rep.factors[9_999] <= 1.0 && mode_defect(1.0, 2.0, 10_000) > 0.0);
    }

    #[test]
    fn dimension_dichotomy() {
        for d in 1..=5u32 {
            let lam = model_spectrum(d);
            let rep = kakutani_verdict(&lam, 0.0, 1.0, d).unwrap();
            let expect = if d < 4 { Verdict::Equivalent } else { Verdict::Disjoint };
            assert_eq!(rep.verdict, expect, "d = {d}: {rep:?}");
            assert!((rep.tail_exponent_lambda - 2.0).abs() < 0.2);
        }
        let lam = model_spectrum(2);
        assert_eq!(kakutani_verdict(&lam, 1.0, 2.0, 2).unwrap().verdict, Verdict::Equivalent);
        assert_eq!(kakutani_verdict(&lam, 1.0, 1.0, 4).unwrap().verdict, Verdict::Equivalent);
    }

    #[test]
    fn non_increasing_spectrum_is_rejected() {
        let flat = |_n: u64| 1.0;
        assert!(matches!(
            kakutani_verdict(&flat, 0.0, 1.0, 2),
            Err(Error::NonIncreasingSpectrum(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let mu = mode_measure(1.0, 1.0, t(8)).unwrap();
        assert_eq!(mu.sample(42).unwrap(), mu.sample(42).unwrap());
        assert_ne!(mu.sample(42).unwrap(), mu.sample(43).unwrap());
    }

    #[test]
    fn characteristic_functional_single_mode() {
        let mu = mode_measure(1.0, 1.0, t(4)).unwrap();
        assert_eq!(mu.characteristic_functional(&CircleField::zero(t(4))).unwrap(), 1.0);
        let f = CircleField::unit_mode(t(4), 2);
        let v = mu.characteristic_functional(&f).unwrap();
        // One-dimensional Gaussian integral with pairing weight 4 for a complex mode.
        assert!((v - (-0.5 * mu.variance[1] * 4.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn field_evaluation_is_real_series() {
        let mut f = CircleField::zero(t(2));
        f.phi0 = 0.5;
        f.modes[1] = Complex::new(0.25, -0.5);
        let th = 0.3f64;
        let expect = 0.5 + 2.0 * (0.25 * (2.0 * th).cos() + 0.5 * (2.0 * th).sin());
        assert!((f.evaluate(th) - expect).abs() < 1e-15);
    }
}
