//! Wick ordering: Hermite polynomials for a Gaussian of variance `c`, changes
//! of ordering constant, and the split of the cutoff covariance into its
//! logarithmic short-distance part and a smooth remainder.
//!
//! Coefficient tables are exact: `:xⁿ:_c = Σⱼ (−1)ʲ T(n,j) cʲ x^{n−2j}` with
//! the integer `T(n,j) = n!/((n−2j)! j! 2ʲ)`, and changing the ordering
//! constant from `c` to `c + s` maps `:xⁿ:_c ↦ Σⱼ T(n,j) sʲ :x^{n−2j}:_{c+s}`.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{bessel_k, gauss_legendre, CATALAN, EULER_GAMMA};

/// Largest degree with a precomputed table.
pub const MAX_DEGREE: usize = 12;

fn pairing_table() -> &'static Vec<Vec<BigInt>> {
    static TABLE: OnceLock<Vec<Vec<BigInt>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let fact = |k: usize| -> BigInt { (1..=k).fold(BigInt::one(), |a, i| a * BigInt::from(i)) };
        (0..=MAX_DEGREE)
            .map(|n| {
                (0..=n / 2)
                    .map(|j| fact(n) / (fact(n - 2 * j) * fact(j) * BigInt::from(2u32).pow(j as u32)))
                    .collect()
            })
            .collect()
    })
}

/// `T(n, j)`, the number of ways to pick `j` disjoint pairs from `n` points.
pub fn pairing_count(n: usize, j: usize) -> Result<BigInt> {
    if n > MAX_DEGREE {
        return Err(invalid("degree", format!("at most {MAX_DEGREE}, got {n}")));
    }
    Ok(pairing_table()[n].get(j).cloned().unwrap_or_else(BigInt::zero))
}

fn pow(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |a, _| a * x)
}

/// Monomial coefficients (index = power) of `:xⁿ:_c`, exactly.
pub fn hermite_wick_exact(n: usize, c: &BigRational) -> Result<Vec<BigRational>> {
    if c.is_negative() {
        return Err(invalid("c", "ordering variance must be non-negative"));
    }
    let mut out = vec![BigRational::zero(); n + 1];
    for j in 0..=n / 2 {
        let t = BigRational::from_integer(pairing_count(n, j)?);
        let sign = if j % 2 == 0 { BigRational::one() } else { -BigRational::one() };
        out[n - 2 * j] = sign * t * pow(c, j);
    }
    Ok(out)
}

/// Monomial coefficients of `:xⁿ:_c` in floating point.
pub fn hermite_wick(n: usize, c: f64) -> Result<Vec<f64>> {
    if !(c >= 0.0) {
        return Err(invalid("c", "ordering variance must be non-negative"));
    }
    let mut out = vec![0.0; n + 1];
    for j in 0..=n / 2 {
        let t = pairing_count(n, j)?.to_f64().expect("table entries are small");
        out[n - 2 * j] = if j % 2 == 0 { 1.0 } else { -1.0 } * t * c.powi(j as i32);
    }
    Ok(out)
}

/// Re-express `Σ aₖ :xᵏ:_c` as `Σ bₖ :xᵏ:_{c+shift}`, exactly.
pub fn wick_reorder_exact(coeffs: &[BigRational], shift: &BigRational) -> Result<Vec<BigRational>> {
    let mut out = vec![BigRational::zero(); coeffs.len()];
    for (n, a) in coeffs.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for j in 0..=n / 2 {
            let t = BigRational::from_integer(pairing_count(n, j)?);
            out[n - 2 * j] += a * t * pow(shift, j);
        }
    }
    Ok(out)
}

/// `E[xᵏ]` under `N(0, c)`: `(k−1)!! c^{k/2}` for even `k`, else zero.
pub fn gaussian_moment_exact(k: usize, c: &BigRational) -> BigRational {
    if k % 2 == 1 {
        return BigRational::zero();
    }
    let dfact = (1..k).step_by(2).fold(BigInt::one(), |a, i| a * BigInt::from(i));
    BigRational::from_integer(dfact) * pow(c, k / 2)
}

/// `E[p(x)]` under `N(0, c)` for monomial coefficients `p`.
pub fn gaussian_expectation_exact(p: &[BigRational], c: &BigRational) -> BigRational {
    p.iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (k, a)| acc + a * gaussian_moment_exact(k, c))
}

/// Product of two monomial coefficient vectors.
pub fn poly_mul_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `P = Σ aₖ :xᵏ:_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WickPolynomial {
    pub coeffs: Vec<f64>,
    pub ordering: f64,
}

impl WickPolynomial {
    pub fn new(coeffs: Vec<f64>, ordering: f64) -> Result<Self> {
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(invalid("degree", format!("at most {MAX_DEGREE}")));
        }
        if !(ordering >= 0.0) {
            return Err(invalid("ordering", "must be non-negative"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coeffs", "must be finite"));
        }
        Ok(Self { coeffs, ordering })
    }

    /// `λ :x⁴:_c`.
    pub fn quartic(lambda: f64, ordering: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, 0.0, 0.0, lambda], ordering)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    /// Even degree with positive leading coefficient (or constant).
    pub fn is_bounded_below(&self) -> bool {
        let d = self.degree();
        d == 0 || (d % 2 == 0 && self.coeffs[d] > 0.0)
    }

    pub fn require_bounded_below(&self) -> Result<()> {
        if self.is_bounded_below() {
            Ok(())
        } else {
            Err(Error::UnboundedInteraction)
        }
    }

    /// `Σ aₖ Heₖ(x; c)` by the three-term recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let c = self.ordering;
        let (mut h0, mut h1) = (1.0, x);
        let mut s = self.coeffs.first().copied().unwrap_or(0.0);
        if self.coeffs.len() > 1 {
            s += self.coeffs[1] * h1;
        }
        for k in 1..self.coeffs.len().saturating_sub(1) {
            let h2 = x * h1 - k as f64 * c * h0;
            s += self.coeffs[k + 1] * h2;
            h0 = h1;
            h1 = h2;
        }
        s
    }

    /// The same function ordered with respect to `new_ordering`.
    pub fn reorder(&self, new_ordering: f64) -> Result<Self> {
        let shift = new_ordering - self.ordering;
        let mut out = vec![0.0; self.coeffs.len()];
        for (n, a) in self.coeffs.iter().enumerate() {
            for j in 0..=n / 2 {
                let t = pairing_count(n, j)?.to_f64().expect("table entries are small");
                out[n - 2 * j] += a * t * shift.powi(j as i32);
            }
        }
        Self::new(out, new_ordering)
    }
}

/// Mode set `|n| ≤ n_theta`, `|j| ≤ n_t` of the torus, `k = (n/R, 2πj/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralCutoff {
    pub n_theta: usize,
    pub n_t: usize,
}

impl SpectralCutoff {
    pub fn square(n: usize) -> Self {
        Self { n_theta: n, n_t: n }
    }

    pub fn tag(&self) -> String {
        format!("modes(|n|<={}, |j|<={})", self.n_theta, self.n_t)
    }
}

/// Flat torus `S¹_R × S¹_T` with mass `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusParams {
    pub m: f64,
    pub radius: f64,
    pub length: f64,
}

impl TorusParams {
    pub fn new(m: f64, radius: f64, length: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(invalid("mass", "covariance split needs m > 0"));
        }
        if !(radius > 0.0 && length > 0.0) {
            return Err(invalid("geometry", "radius and length must be positive"));
        }
        Ok(Self { m, radius, length })
    }

    pub fn area(&self) -> f64 {
        2.0 * PI * self.radius * self.length
    }
}

/// `c_N = φ(x)` variance at cutoff, the effective short-distance scale `ε_N`
/// and the smooth remainder `C_f(x,x) = c_N + (1/2π) ln(m ε_N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceSplit {
    pub cutoff: SpectralCutoff,
    pub c_n: f64,
    pub eps_n: f64,
    pub c_f: f64,
    /// `C_f` from the same construction at the doubled cutoff.
    pub c_f_doubled: f64,
    /// Change of `C_f` under doubling, reported as the fit residual.
    pub fit_residual: f64,
}

/// `Σ_{modes} 1/(m² + |k|²) / Area`.
pub fn cutoff_variance(p: &TorusParams, cut: SpectralCutoff) -> f64 {
    let m2 = p.m * p.m;
    let mut rows = Vec::with_capacity(2 * cut.n_theta + 1);
    for n in -(cut.n_theta as i64)..=cut.n_theta as i64 {
        let k1 = n as f64 / p.radius;
        let mut s = 0.0;
        for j in -(cut.n_t as i64)..=cut.n_t as i64 {
            let k2 = 2.0 * PI * j as f64 / p.length;
            s += 1.0 / (m2 + k1 * k1 + k2 * k2);
        }
        rows.push(s);
    }
    rows.iter().sum::<f64>() / p.area()
}

/// `ε = 2e^{−γ} exp(−⟨ln r(θ)⟩)` for the rectangle `|k₁| ≤ Λ₁`, `|k₂| ≤ Λ₂`,
/// with the boundary at the half-integer mode positions.
pub fn cutoff_scale(p: &TorusParams, cut: SpectralCutoff) -> f64 {
    let l1 = (cut.n_theta as f64 + 0.5) / p.radius;
    let l2 = 2.0 * PI * (cut.n_t as f64 + 0.5) / p.length;
    let theta_star = (l2 / l1).atan();
    let (x, w) = gauss_legendre(48);
    let integrate = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
    };
    let part1 = integrate(0.0, theta_star, &|t: f64| (l1 / t.cos()).ln());
    let part2 = integrate(theta_star, 0.5 * PI, &|t: f64| (l2 / t.sin()).ln());
    let mean_log_r = (part1 + part2) / (0.5 * PI);
    2.0 * (-EULER_GAMMA).exp() * (-mean_log_r).exp()
}

/// `ε_N` of a square cutoff in closed form, `e^{−γ + 2G/π}/Λ`.
pub fn square_cutoff_scale(lambda: f64) -> f64 {
    (-EULER_GAMMA + 2.0 * CATALAN / PI).exp() / lambda
}

fn smooth_part(p: &TorusParams, cut: SpectralCutoff) -> (f64, f64, f64) {
    let c_n = cutoff_variance(p, cut);
    let eps = cutoff_scale(p, cut);
    (c_n, eps, c_n + (p.m * eps).ln() / (2.0 * PI))
}

pub fn covariance_split(p: &TorusParams, cut: SpectralCutoff) -> Result<CovarianceSplit> {
    if cut.n_theta < 2 || cut.n_t < 2 {
        return Err(invalid("cutoff", "need at least two modes per direction"));
    }
    let (c_n, eps_n, c_f) = smooth_part(p, cut);
    let doubled = SpectralCutoff { n_theta: 2 * cut.n_theta, n_t: 2 * cut.n_t };
    let (_, _, c_f2) = smooth_part(p, doubled);
    let fit_residual = (c_f2 - c_f).abs();
    if fit_residual > 0.05 {
        return Err(Error::UnstableFit(format!(
            "C_f moves by {fit_residual:.3e} when the cutoff doubles from {}",
            cut.tag()
        )));
    }
    Ok(CovarianceSplit { cutoff: cut, c_n, eps_n, c_f, c_f_doubled: c_f2, fit_residual })
}

/// Method-of-images value of `C_f(x,x)` with `C₀ = −(1/2π) ln(m d)`:
/// `(ln 2 − γ)/(2π) + Σ_{images ≠ 0} K₀(m |image|)/(2π)`.
pub fn smooth_covariance_images(p: &TorusParams) -> f64 {
    let (a1, a2) = (2.0 * PI * p.radius, p.length);
    let reach = 45.0 / p.m;
    let (na, nb) = ((reach / a1).ceil() as i64, (reach / a2).ceil() as i64);
    let mut s = 0.0;
    for a in -na..=na {
        for b in -nb..=nb {
            if a == 0 && b == 0 {
                continue;
            }
            let d = ((a as f64 * a1).powi(2) + (b as f64 * a2).powi(2)).sqrt();
            if p.m * d < 700.0 {
                s += bessel_k(0.0, p.m * d);
            }
        }
    }
    (2f64.ln() - EULER_GAMMA) / (2.0 * PI) + s / (2.0 * PI)
}

/// Real field sampled on a `rows × cols` grid (rows along the axis), with a
/// uniform cell area.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub cell_area: f64,
}

impl FieldGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, cell_area: f64) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::GridMismatch(format!("{} values for a {rows}×{cols} grid", values.len())));
        }
        Ok(Self { rows, cols, values, cell_area })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), ..self.clone() }
    }
}

/// Per-row sums `Σ_θ :P:(φ) dA`.
fn row_integrals<'a>(sample: &'a FieldGrid, p: &'a WickPolynomial, rows: Range<usize>) -> impl Iterator<Item = f64> + 'a {
    rows.map(move |r| sample.row(r).iter().map(|&v| p.eval(v)).sum::<f64>() * sample.cell_area)
}

/// `∫ :P: dA` over the grid rows `rows`.
pub fn wick_interaction_rows(sample: &FieldGrid, p: &WickPolynomial, rows: Range<usize>) -> Result<f64> {
    if rows.end > sample.rows || rows.start > rows.end {
        return Err(Error::GridMismatch(format!("rows {rows:?} outside a grid of {} rows", sample.rows)));
    }
    Ok(row_integrals(sample, p, rows).sum())
}

/// `∫ :P: dA` over the whole surface.
pub fn wick_interaction(sample: &FieldGrid, p: &WickPolynomial) -> Result<f64> {
    wick_interaction_rows(sample, p, 0..sample.rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn quartic_table() {
        let c = q(3, 7);
        let h = hermite_wick_exact(4, &c).unwrap();
        assert_eq!(h, vec![q(3, 1) * &c * &c, q(0, 1), q(-6, 1) * &c, q(0, 1), q(1, 1)]);
        let f = hermite_wick(2, 1.0).unwrap();
        assert_eq!(f[0] + f[2] * 4.0, 3.0);
        assert_eq!(hermite_wick(5, 0.0).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn reorder_quartic_matches_closed_form() {
        let s = q(2, 5);
        let out = wick_reorder_exact(&[q(0, 1), q(0, 1), q(0, 1), q(0, 1), q(1, 1)], &s).unwrap();
        assert_eq!(out, vec![q(3, 1) * &s * &s, q(0, 1), q(6, 1) * &s, q(0, 1), q(1, 1)]);
    }

    #[test]
    fn reorder_is_a_group_action() {
        let a: Vec<BigRational> = (0..9).map(|k| q(k as i64 - 3, k as i64 + 1)).collect();
        let (s1, s2) = (q(1, 3), q(-5, 4));
        let two = wick_reorder_exact(&wick_reorder_exact(&a, &s1).unwrap(), &s2).unwrap();
        let one = wick_reorder_exact(&a, &(&s1 + &s2)).unwrap();
        assert_eq!(two, one);
        assert_eq!(wick_reorder_exact(&a, &q(0, 1)).unwrap(), a);
    }

    #[test]
    fn wick_powers_have_zero_mean() {
        let c = q(5, 3);
        for n in 1..=8 {
            assert!(gaussian_expectation_exact(&hermite_wick_exact(n, &c).unwrap(), &c).is_zero());
        }
    }

    #[test]
    fn float_evaluation_matches_table() {
        let p = WickPolynomial::new(vec![0.5, -1.0, 0.25, 0.0, 2.0], 0.7).unwrap();
        let x: f64 = 1.3;
        let mut direct = 0.0;
        for (k, a) in p.coeffs.iter().enumerate() {
            let h = hermite_wick(k, 0.7).unwrap();
            direct += a * h.iter().enumerate().map(|(i, c)| c * x.powi(i as i32)).sum::<f64>();
        }
        assert!((p.eval(x) - direct).abs() < 1e-12);
        let r = p.reorder(1.9).unwrap();
        assert!((r.eval(x) - p.eval(x)).abs() < 1e-12);
    }

    #[test]
    fn boundedness() {
        assert!(WickPolynomial::quartic(0.1, 1.0).unwrap().is_bounded_below());
        assert!(!WickPolynomial::quartic(-0.1, 1.0).unwrap().is_bounded_below());
        assert!(!WickPolynomial::new(vec![0.0, 0.0, 0.0, 1.0], 1.0).unwrap().is_bounded_below());
        assert!(WickPolynomial::new(vec![2.0], 1.0).unwrap().is_bounded_below());
    }

    #[test]
    fn square_scale_matches_angular_integral() {
        let p = TorusParams::new(1.0, 1.0, 2.0 * PI).unwrap();
        let cut = SpectralCutoff::square(10);
        assert!((cutoff_scale(&p, cut) - square_cutoff_scale(10.5)).abs() < 1e-12);
    }

    #[test]
    fn constant_interaction_is_area() {
        let g = FieldGrid::new(4, 6, vec![0.3; 24], 0.25).unwrap();
        let p = WickPolynomial::new(vec![2.0], 1.0).unwrap();
        assert!((wick_interaction(&g, &p).unwrap() - 2.0 * 6.0).abs() < 1e-14);
        assert!(FieldGrid::new(4, 6, vec![0.0; 23], 1.0).is_err());
    }
}
