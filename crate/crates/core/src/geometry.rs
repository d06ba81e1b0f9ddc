//! Flat cylinders, per-mode Dirichlet-to-Neumann blocks and their
//! Schur-complement composition.
//!
//! For the Fourier mode `n` of a field on a cylinder of radius `R` and height
//! `L`, Helmholtz solutions are combinations of `e^{±ωₙt}` with
//! `ωₙ = (m² + n²/R²)^{1/2}`. The DtN block maps boundary values
//! `(value on the in-circle, value on the out-circle)` to outward normal
//! derivatives; it is also the Hessian of the Dirichlet energy of the
//! extension, which is the form used throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::modes::Truncation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderGeometry {
    pub radius: f64,
    pub length: f64,
    pub in_label: String,
    pub out_label: String,
}

impl CylinderGeometry {
    pub fn new(radius: f64, length: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid("length", format!("must be positive, got {length}")));
        }
        Ok(Self {
            radius,
            length,
            in_label: "in".into(),
            out_label: "out".into(),
        })
    }

    /// Orientation reversal: in and out boundaries exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            in_label: self.out_label.clone(),
            out_label: self.in_label.clone(),
            ..self.clone()
        }
    }

    /// Geometry of `self` followed by `next` along the axis.
    pub fn then(&self, next: &CylinderGeometry) -> Result<Self> {
        check_radius(self.radius, next.radius)?;
        Self::new(self.radius, self.length + next.length)
    }
}

pub(crate) fn check_radius(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-14 * a.abs().max(b.abs()) {
        return Err(Error::RadiusMismatch(a, b));
    }
    Ok(())
}

/// `ωₙ = (m² + n²/R²)^{1/2}`.
pub fn omega(m: f64, radius: f64, n: usize) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(invalid("mass", format!("must be non-negative, got {m}")));
    }
    if m == 0.0 && n == 0 {
        return Err(Error::DegenerateMode);
    }
    let k = n as f64 / radius;
    Ok((m * m + k * k).sqrt())
}

/// Weight of the mode-`n` real coordinates in `∫ φψ R dθ`: `2πR` for the zero
/// mode and `πR` for each of the cosine and sine coordinates of `n ≥ 1`.
pub fn mode_weight(radius: f64, n: usize) -> f64 {
    if n == 0 {
        2.0 * std::f64::consts::PI * radius
    } else {
        std::f64::consts::PI * radius
    }
}

/// Number of real coordinates carried by mode `n`.
pub fn mode_multiplicity(n: usize) -> usize {
    if n == 0 {
        1
    } else {
        2
    }
}

/// Symmetric 2×2 block `[[a, b], [b, d]]`; `a` acts on the in-boundary value,
/// `d` on the out-boundary value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtNBlock {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl DtNBlock {
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.det() > 0.0
    }

    /// Block of the reversed cylinder.
    pub fn swapped(&self) -> Self {
        Self { a: self.d, b: self.b, d: self.a }
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self { a: w * self.a, b: w * self.b, d: w * self.d }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.a, self.b, self.b, self.d])
    }

    /// Largest relative entry difference.
    pub fn rel_diff(&self, o: &DtNBlock) -> f64 {
        let scale = self.a.abs().max(self.d.abs()).max(f64::MIN_POSITIVE);
        [(self.a - o.a).abs(), (self.b - o.b).abs(), (self.d - o.d).abs()]
            .into_iter()
            .fold(0.0, f64::max)
            / scale
    }
}

/// Unit-weight block `ω[[coth ωL, −csch ωL], [−csch ωL, coth ωL]]`.
pub fn dtn_block(omega: f64, length: f64) -> DtNBlock {
    let x = omega * length;
    let coth = 1.0 / x.tanh();
    // csch underflows gracefully for large x
    let csch = if x > 700.0 { 0.0 } else { 1.0 / x.sinh() };
    DtNBlock {
        a: omega * coth,
        b: -omega * csch,
        d: omega * coth,
    }
}

pub fn dtn_cylinder(geom: &CylinderGeometry, m: f64, n: usize) -> Result<DtNBlock> {
    Ok(dtn_block(omega(m, geom.radius, n)?, geom.length))
}

/// Per-mode blocks for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOperator {
    pub blocks: Vec<DtNBlock>,
}

impl BlockOperator {
    pub fn cylinder(geom: &CylinderGeometry, m: f64, trunc: Truncation) -> Result<Self> {
        let blocks = (0..=trunc.n_max())
            .map(|n| dtn_cylinder(geom, m, n))
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }
}

/// Composite block of `Σ₂ ∘ Σ₁`: the shared circle (out of `d1`, in of `d2`)
/// is eliminated by a Schur complement with pivot `d1.d + d2.a`.
pub fn schur_compose(d2: &DtNBlock, d1: &DtNBlock) -> Result<DtNBlock> {
    let p = d1.d + d2.a;
    if !(p > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("sewing pivot {p}")));
    }
    Ok(DtNBlock {
        a: d1.a - d1.b * d1.b / p,
        b: -d1.b * d2.b / p,
        d: d2.d - d2.b * d2.b / p,
    })
}

pub fn schur_compose_op(d2: &BlockOperator, d1: &BlockOperator) -> Result<BlockOperator> {
    if d1.blocks.len() != d2.blocks.len() {
        return Err(Error::TruncationMismatch(d1.blocks.len() - 1, d2.blocks.len() - 1));
    }
    let blocks = d2
        .blocks
        .iter()
        .zip(&d1.blocks)
        .map(|(b2, b1)| schur_compose(b2, b1))
        .collect::<Result<_>>()?;
    Ok(BlockOperator { blocks })
}

/// `A − B²/(D_{Σ₁} + D)` for a surface `Σ₁` with one (out) boundary of DtN
/// value `d_sigma1`, sewn into the in-boundary of `d2`.
pub fn schur_compose_cap(d2: &DtNBlock, d_sigma1: f64) -> Result<f64> {
    let p = d_sigma1 + d2.a;
    if !(p > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("sewing pivot {p}")));
    }
    Ok(d2.d - d2.b * d2.b / p)
}

/// Residuals of the two pair relations satisfied by the eliminated value
/// `φ₁ = −Bφ₂/(D_{Σ₁}+D)`: `D_{Σ₃}φ₂ = Aφ₂ + Bφ₁` and `−(Bφ₂ + Dφ₁) = D_{Σ₁}φ₁`.
pub fn lagrangian_residual(d2: &DtNBlock, d_sigma1: f64, phi2: f64) -> Result<(f64, f64)> {
    let d3 = schur_compose_cap(d2, d_sigma1)?;
    let phi1 = -d2.b * phi2 / (d_sigma1 + d2.a);
    let scale = (d2.d.abs() + d2.b.abs()) * phi2.abs().max(f64::MIN_POSITIVE);
    let r1 = (d3 * phi2 - (d2.d * phi2 + d2.b * phi1)).abs() / scale;
    let r2 = (-(d2.b * phi2 + d2.a * phi1) - d_sigma1 * phi1).abs() / scale;
    Ok((r1, r2))
}

/// Energy-form block of the glued cylinder on `(φ₂ outer, φ₁ sewing circle)`
/// with the in-boundary of `Σ₁` held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluedBlock {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

/// Green's function of `−u'' + ω²u` on `[0, ℓ]`, Dirichlet at 0, Neumann at `ℓ`.
fn mixed_green(omega: f64, l: f64, s: f64, t: f64) -> f64 {
    let (lo, hi) = if s < t { (s, t) } else { (t, s) };
    // sinh(ω lo) cosh(ω(ℓ−hi)) / (ω cosh ωℓ), rewritten with decaying exponentials
    let e = |x: f64| (-omega * x).exp();
    0.5 * e(hi - lo) * (1.0 - e(2.0 * lo)) * (1.0 + e(2.0 * (l - hi))) / (omega * (1.0 + e(2.0 * l)))
}

/// The glued block computed independently of the DtN blocks: invert the
/// covariance of the field at `(L₁ + L₂, L₁)` for the chain pinned at 0 and
/// free at the far end.
pub fn glued_dtn(g1: &CylinderGeometry, g2: &CylinderGeometry, m: f64, n: usize) -> Result<GluedBlock> {
    check_radius(g1.radius, g2.radius)?;
    let w = omega(m, g1.radius, n)?;
    let l3 = g1.length + g2.length;
    let s = g1.length;
    let g22 = mixed_green(w, l3, l3, l3);
    let g21 = mixed_green(w, l3, l3, s);
    let g11 = mixed_green(w, l3, s, s);
    let det = g22 * g11 - g21 * g21;
    Ok(GluedBlock {
        alpha: g11 / det,
        beta: -g21 / det,
        delta: g22 / det,
    })
}

/// Second-order finite-difference solution of `u'' = ω²u`, `u(0) = a`,
/// `u(L) = b`, returning `(−u'(0), u'(L))` from one-sided O(h²) stencils.
pub fn bvp_oracle(omega: f64, length: f64, a: f64, b: f64, h: f64) -> Result<(f64, f64)> {
    if !(omega > 0.0) {
        return Err(invalid("omega", "must be positive"));
    }
    if !(h > 0.0 && h < length / 8.0) {
        return Err(invalid("h", format!("need 0 < h < L/8, got h = {h}, L = {length}")));
    }
    let n = (length / h).round() as usize;
    if ((n as f64) * h - length).abs() > 1e-9 * length {
        return Err(Error::GridMismatch(format!("L = {length} is not a multiple of h = {h}")));
    }
    let k = n - 1;
    let diag = vec![-(2.0 + h * h * omega * omega); k];
    let off = vec![1.0; k - 1];
    let mut rhs = vec![0.0; k];
    rhs[0] -= a;
    rhs[k - 1] -= b;
    let inner = solve_tridiagonal(&off, &diag, &off, &rhs).expect("Helmholtz system is diagonally dominant");
    let mut u = Vec::with_capacity(n + 1);
    u.push(a);
    u.extend(inner);
    u.push(b);
    let d0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    let dl = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    Ok((-d0, dl))
}

/// One Richardson step on [`bvp_oracle`] with steps `h` and `h/2`.
pub fn bvp_richardson(omega: f64, length: f64, a: f64, b: f64, h: f64) -> Result<(f64, f64)> {
    let c = bvp_oracle(omega, length, a, b, h)?;
    let f = bvp_oracle(omega, length, a, b, h / 2.0)?;
    Ok(((4.0 * f.0 - c.0) / 3.0, (4.0 * f.1 - c.1) / 3.0))
}

/// `det(2M) − det(2D)·det(2(A − B D⁻¹ Bᵀ))`, relative to `det(2M)`, where `D`
/// is the trailing `k×k` block of the symmetric matrix `M`.
pub fn block_factorization_residual(m: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = m.nrows();
    if k == 0 || k >= n {
        return Err(invalid("k", "trailing block must be proper and nonempty"));
    }
    let j = n - k;
    let a = m.view((0, 0), (j, j));
    let b = m.view((0, j), (j, k));
    let d = m.view((j, j), (k, k)).into_owned();
    let dinv = d
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("trailing block is singular".into()))?;
    let s = a - b * dinv * b.transpose();
    let lhs = (m * 2.0).determinant();
    let rhs = (d * 2.0).determinant() * (s * 2.0).determinant();
    Ok((lhs - rhs).abs() / lhs.abs())
}

/// Per-mode form of [`block_factorization_residual`] with `D` the in-entry.
pub fn verify_block_factorization(op: &BlockOperator) -> Vec<f64> {
    op.blocks
        .iter()
        .map(|blk| {
            let lhs = 4.0 * blk.det();
            let rhs = 2.0 * blk.a * 2.0 * (blk.d - blk.b * blk.b / blk.a);
            (lhs - rhs).abs() / lhs.abs()
        })
        .collect()
}

/// `Σⱼ (2/ℓ) sin²(πjs/ℓ)/(ω² + (πj/ℓ)²)`, the Dirichlet Green's function on
/// `[0, ℓ]` at coincident points, summed to `terms` with the mean tail added.
pub fn dirichlet_green_series(omega: f64, l: f64, s: f64, terms: usize) -> f64 {
    let mut acc = 0.0;
    for j in 1..=terms {
        let k = std::f64::consts::PI * j as f64 / l;
        let sn = (k * s).sin();
        acc += 2.0 / l * sn * sn / (omega * omega + k * k);
    }
    let c = omega * l / std::f64::consts::PI;
    let j = terms as f64 + 0.5;
    acc + l / (std::f64::consts::PI * std::f64::consts::PI) * (1.0 / j - c * c / (3.0 * j * j * j))
}

/// `(1/T) Σₖ cos(2πkt/T)/(ω² + (2πk/T)²)`, the periodic Green's function,
/// summed over `|k| ≤ terms` with the non-oscillating tail added at `t = 0`.
pub fn torus_green_series(omega: f64, period: f64, t: f64, terms: usize) -> f64 {
    let mut acc = 1.0 / (period * omega * omega);
    for k in 1..=terms {
        let q = 2.0 * std::f64::consts::PI * k as f64 / period;
        acc += 2.0 / period * (q * t).cos() / (omega * omega + q * q);
    }
    if t == 0.0 {
        let c = omega * period / (2.0 * std::f64::consts::PI);
        let j = terms as f64 + 0.5;
        acc += period / (2.0 * std::f64::consts::PI * std::f64::consts::PI) * (1.0 / j - c * c / (3.0 * j * j * j));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_block() {
        let b = dtn_block(1.0, 1.0);
        assert_relative_eq!(b.a, 1.313_035_285_5, epsilon = 1e-10);
        assert_relative_eq!(b.b, -0.850_918_128_2, epsilon = 1e-10);
        assert_eq!(b.swapped(), b);
        assert!(b.is_positive_definite());
    }

    #[test]
    fn long_cylinder_decouples() {
        let b = dtn_block(2.0, 10.0);
        assert!((b.a - 2.0).abs() < 2.0 * (-40f64).exp() * 4.0);
        assert!(b.b.abs() <= 2.0 * 2.0 * (-20f64).exp());
    }

    #[test]
    fn degenerate_mode_is_rejected() {
        let g = CylinderGeometry::new(1.0, 1.0).unwrap();
        assert_eq!(dtn_cylinder(&g, 0.0, 0), Err(Error::DegenerateMode));
        assert!(dtn_cylinder(&g, 0.0, 1).is_ok());
        assert!(CylinderGeometry::new(0.0, 1.0).is_err());
    }

    #[test]
    fn unit_heights_compose_to_height_two() {
        let b = dtn_block(1.0, 1.0);
        let c = schur_compose(&b, &b).unwrap();
        assert_relative_eq!(c.a, 1.037_314_720_7, epsilon = 1e-10);
        assert_relative_eq!(c.b, -0.275_720_564_8, epsilon = 1e-10);
        assert!(c.rel_diff(&dtn_block(1.0, 2.0)) < 1e-14);
    }

    #[test]
    fn decoupled_block_passes_through() {
        let d2 = DtNBlock { a: 1.0, b: 0.0, d: 3.0 };
        assert_eq!(schur_compose_cap(&d2, 2.0).unwrap(), 3.0);
    }

    #[test]
    fn richardson_oracle_matches_block() {
        let (w, l) = (1.0, 1.0);
        let (x, y) = bvp_richardson(w, l, 1.0, 0.0, l / 512.0).unwrap();
        let b = dtn_block(w, l);
        assert!((x - b.a).abs() < 1e-9, "{x}");
        assert!((y - b.b).abs() < 1e-9, "{y}");
        let (p, q) = bvp_oracle(1.0, 2.0, 1.0, 1.0, 0.05).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-12);
    }

    #[test]
    fn oracle_error_is_second_order() {
        let exact = dtn_block(1.5, 1.0).a;
        let e1 = (bvp_oracle(1.5, 1.0, 1.0, 0.0, 1.0 / 32.0).unwrap().0 - exact).abs();
        let e2 = (bvp_oracle(1.5, 1.0, 1.0, 0.0, 1.0 / 64.0).unwrap().0 - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn glued_block_matches_schur_data() {
        let g1 = CylinderGeometry::new(1.0, 0.7).unwrap();
        let g2 = CylinderGeometry::new(1.0, 1.3).unwrap();
        for n in 0..6 {
            let gl = glued_dtn(&g1, &g2, 1.0, n).unwrap();
            let b1 = dtn_cylinder(&g1, 1.0, n).unwrap();
            let b2 = dtn_cylinder(&g2, 1.0, n).unwrap();
            assert_relative_eq!(gl.delta, b1.d + b2.a, max_relative = 1e-12);
            assert_relative_eq!(gl.beta, b2.b, max_relative = 1e-12);
            assert_relative_eq!(gl.alpha, b2.d, max_relative = 1e-12);
        }
        let g3 = CylinderGeometry::new(2.0, 1.0).unwrap();
        assert!(matches!(glued_dtn(&g1, &g3, 1.0, 1), Err(Error::RadiusMismatch(..))));
    }

    #[test]
    fn block_factorization_holds() {
        for blk in BlockOperator::cylinder(&CylinderGeometry::new(1.0, 0.5).unwrap(), 1.0, Truncation::new(8).unwrap())
            .unwrap()
            .blocks
        {
            assert!(block_factorization_residual(&blk.matrix(), 1).unwrap() < 1e-12);
        }
    }

    #[test]
    fn green_series_match_closed_forms() {
        let (w, l1, l2) = (1.3, 0.8, 1.1);
        let exact = 1.0 / (dtn_block(w, l1).d + dtn_block(w, l2).a);
        let s = dirichlet_green_series(w, l1 + l2, l1, 2_000_000);
        assert_relative_eq!(s, exact, max_relative = 1e-9);
        let t = torus_green_series(w, 2.0, 0.0, 200_000);
        assert_relative_eq!(t, 1.0 / (w * (w * 1.0).tanh() * 2.0), max_relative = 1e-9);
    }
}
