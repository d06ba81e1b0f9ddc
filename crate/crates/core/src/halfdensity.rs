//! Gaussian half-densities and the composition semigroup of positive kernels.
//!
//! A half-density `ν^{1/2}` is stored through its square `ν`, a Gaussian
//! measure `exp(log_mass)·N(center, Q⁻¹)` on flat coordinates. Kernels are
//! half-densities on a product space with coordinates ordered `[out; in]`.
//! Composition integrates out the shared variable in closed form:
//! `ν₃(φ,ψ) = (∫ ν₁(φ,η)^{1/2} ν₂(η,ψ)^{1/2} dη)²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, cholesky, quad_form, spd_logdet, symmetrize};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Square root of a Gaussian measure `exp(log_mass)·N(center, Q⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHD {
    q: DMatrix<f64>,
    center: DVector<f64>,
    log_mass: f64,
}

impl GaussianHD {
    pub fn new(q: DMatrix<f64>, center: DVector<f64>, log_mass: f64) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: q.ncols() });
        }
        if center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: center.len() });
        }
        let scale = q.abs().max().max(f64::MIN_POSITIVE);
        if asymmetry(&q) > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite("precision is not symmetric".into()));
        }
        if !log_mass.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite parameters".into()));
        }
        let q = symmetrize(&q);
        if d > 0 {
            cholesky(&q, "half-density precision")?;
        }
        Ok(Self { q, center, log_mass })
    }

    /// Standard normal density of dimension `d`, mass one.
    pub fn standard(d: usize) -> Self {
        Self {
            q: DMatrix::identity(d, d),
            center: DVector::zeros(d),
            log_mass: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Precision `Q` of the squared object `ν`.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Quadratic form of the half-density itself, `Q/2`.
    pub fn half_precision(&self) -> DMatrix<f64> {
        &self.q * 0.5
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Same half-density with the squared mass multiplied by `exp(delta)`.
    pub fn scaled(&self, delta: f64) -> Self {
        Self {
            log_mass: self.log_mass + delta,
            ..self.clone()
        }
    }

    /// `ln ν(x)`.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let logdet = if self.dim() == 0 { 0.0 } else { spd_logdet(&self.q, "").unwrap_or(f64::NAN) };
        self.log_mass + 0.5 * logdet - 0.5 * d * LN_2PI - 0.5 * quad_form(&self.q, &(x - &self.center))
    }

    /// `ln ν(x)^{1/2}`.
    pub fn log_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.log_density(x)
    }

    /// Re-express in coordinates `y` with `x = T y`. The half-density picks
    /// up the Jacobian so that pairings are unchanged.
    pub fn pullback(&self, t: &DMatrix<f64>) -> Result<Self> {
        let d = self.dim();
        if t.nrows() != d || t.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: t.nrows() });
        }
        let lu = t.clone().lu();
        let center = lu
            .solve(&self.center)
            .ok_or_else(|| Error::NotPositiveDefinite("coordinate change is singular".into()))?;
        Self::new(symmetrize(&(t.transpose() * &self.q * t)), center, self.log_mass)
    }
}

/// Half-density of a Gaussian measure given by precision, center and log-mass.
pub fn hd_sqrt(q: DMatrix<f64>, center: DVector<f64>, log_mass: f64) -> Result<GaussianHD> {
    GaussianHD::new(q, center, log_mass)
}

/// `ln ∫ ν₁^{1/2} ν₂^{1/2}`, the inner product of two half-densities.
pub fn pairing(a: &GaussianHD, b: &GaussianHD) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let s = Canonical::from_hd(a).scaled(0.5).add(&Canonical::from_hd(b).scaled(0.5));
    s.log_integral("pairing form")
}

/// Log-quadratic function `exp(−½xᵀPx + bᵀx + c)`.
#[derive(Debug, Clone)]
struct Canonical {
    p: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl Canonical {
    fn from_hd(h: &GaussianHD) -> Self {
        let d = h.dim() as f64;
        let logdet = if h.dim() == 0 { 0.0 } else { spd_logdet(&h.q, "").expect("validated at construction") };
        let b = &h.q * &h.center;
        let c = h.log_mass + 0.5 * logdet - 0.5 * d * LN_2PI - 0.5 * h.center.dot(&b);
        Self { p: h.q.clone(), b, c }
    }

    fn to_hd(&self, what: &str) -> Result<GaussianHD> {
        let d = self.b.len();
        if d == 0 {
            return GaussianHD::new(DMatrix::zeros(0, 0), DVector::zeros(0), self.c);
        }
        let p = symmetrize(&self.p);
        let chol = cholesky(&p, what)?;
        let mu = chol.solve(&self.b);
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let log_mass = self.c - 0.5 * logdet + 0.5 * d as f64 * LN_2PI + 0.5 * mu.dot(&self.b);
        GaussianHD::new(p, mu, log_mass)
    }

    fn scaled(mut self, f: f64) -> Self {
        self.p *= f;
        self.b *= f;
        self.c *= f;
        self
    }

    fn add(&self, o: &Canonical) -> Canonical {
        Canonical {
            p: &self.p + &o.p,
            b: &self.b + &o.b,
            c: self.c + o.c,
        }
    }

    /// Place this form on coordinates `idx` of an `n`-dimensional space.
    fn embed(&self, n: usize, idx: &[usize]) -> Canonical {
        let mut p = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (i, &gi) in idx.iter().enumerate() {
            b[gi] = self.b[i];
            for (j, &gj) in idx.iter().enumerate() {
                p[(gi, gj)] = self.p[(i, j)];
            }
        }
        Canonical { p, b, c: self.c }
    }

    fn log_integral(&self, what: &str) -> Result<f64> {
        let d = self.b.len();
        if d == 0 {
            return Ok(self.c);
        }
        let chol = cholesky(&symmetrize(&self.p), what)?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let sol = chol.solve(&self.b);
        Ok(self.c + 0.5 * self.b.dot(&sol) + 0.5 * d as f64 * LN_2PI - 0.5 * logdet)
    }

    /// Integrate out the trailing `k` coordinates.
    fn integrate_tail(&self, k: usize, what: &str) -> Result<Canonical> {
        let n = self.b.len();
        let m = n - k;
        if k == 0 {
            return Ok(self.clone());
        }
        let pyy = self.p.view((0, 0), (m, m));
        let pye = self.p.view((0, m), (m, k));
        let pee = symmetrize(&self.p.view((m, m), (k, k)).into_owned());
        let by = self.b.rows(0, m);
        let be = self.b.rows(m, k).into_owned();
        let chol = cholesky(&pee, what)?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let x = chol.solve(&pye.transpose());
        let sb = chol.solve(&be);
        let p = symmetrize(&(pyy - pye * &x));
        let b = by - pye * &sb;
        let c = self.c + 0.5 * be.dot(&sb) + 0.5 * k as f64 * LN_2PI - 0.5 * logdet;
        Ok(Canonical { p, b, c })
    }
}

/// Half-density kernel on `[out; in]` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelHD {
    d_out: usize,
    d_in: usize,
    density: GaussianHD,
}

impl KernelHD {
    pub fn new(d_out: usize, d_in: usize, density: GaussianHD) -> Result<Self> {
        if density.dim() != d_out + d_in {
            return Err(Error::DimensionMismatch { expected: d_out + d_in, found: density.dim() });
        }
        Ok(Self { d_out, d_in, density })
    }

    /// A state viewed as a kernel with no input.
    pub fn from_state(v: GaussianHD) -> Self {
        Self { d_out: v.dim(), d_in: 0, density: v }
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn density(&self) -> &GaussianHD {
        &self.density
    }

    pub fn into_density(self) -> GaussianHD {
        self.density
    }

    /// Kernel with the in and out blocks exchanged.
    pub fn adjoint(&self) -> KernelHD {
        let (o, i) = (self.d_out, self.d_in);
        let perm: Vec<usize> = (o..o + i).chain(0..o).collect();
        let n = o + i;
        let q = DMatrix::from_fn(n, n, |r, c| self.density.q[(perm[r], perm[c])]);
        let center = DVector::from_fn(n, |r, _| self.density.center[perm[r]]);
        KernelHD {
            d_out: i,
            d_in: o,
            density: GaussianHD { q, center, log_mass: self.density.log_mass },
        }
    }

    /// `ln ν(out, in)^{1/2}`.
    pub fn log_value(&self, out: &DVector<f64>, inp: &DVector<f64>) -> f64 {
        let x = DVector::from_iterator(self.d_out + self.d_in, out.iter().chain(inp.iter()).copied());
        self.density.log_value(&x)
    }
}

/// Operator product `k1 ∘ k2`; requires `d_in(k1) = d_out(k2)`.
pub fn compose(k1: &KernelHD, k2: &KernelHD) -> Result<KernelHD> {
    if k1.d_in != k2.d_out {
        return Err(Error::DimensionMismatch { expected: k1.d_in, found: k2.d_out });
    }
    let (a, k, c) = (k1.d_out, k1.d_in, k2.d_in);
    let n = a + c + k;
    // Working coordinates: [φ (a); ψ (c); η (k)].
    let idx1: Vec<usize> = (0..a).chain(a + c..n).collect();
    let idx2: Vec<usize> = (a + c..n).chain(a..a + c).collect();
    let s1 = Canonical::from_hd(&k1.density).scaled(0.5).embed(n, &idx1);
    let s2 = Canonical::from_hd(&k2.density).scaled(0.5).embed(n, &idx2);
    let inner = s1.add(&s2).integrate_tail(k, "shared-variable form")?;
    let density = inner.scaled(2.0).to_hd("composed precision")?;
    Ok(KernelHD { d_out: a, d_in: c, density })
}

/// Half-density operator action `∫ k(φ, η) v(η) dη`.
pub fn apply(k: &KernelHD, v: &GaussianHD) -> Result<GaussianHD> {
    Ok(compose(k, &KernelHD::from_state(v.clone()))?.density)
}

/// `ln ∫ ν(x, x)^{1/2} dx`.
pub fn kernel_trace(k: &KernelHD) -> Result<f64> {
    if k.d_in != k.d_out {
        return Err(Error::DimensionMismatch { expected: k.d_out, found: k.d_in });
    }
    let d = k.d_in;
    let s = Canonical::from_hd(&k.density).scaled(0.5);
    let p = DMatrix::from_fn(d, d, |i, j| {
        s.p[(i, j)] + s.p[(i + d, j)] + s.p[(i, j + d)] + s.p[(i + d, j + d)]
    });
    let b = DVector::from_fn(d, |i, _| s.b[i] + s.b[i + d]);
    let diag = Canonical { p, b, c: s.c };
    diag.log_integral("diagonal form").map_err(|_| Error::Divergent("kernel diagonal is not integrable".into()))
}

/// Tensor trapezoid grid for the shared variable, one axis per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis (odd, so the grid nests under refinement).
    pub points: usize,
}

impl QuadGrid {
    pub fn symmetric(dim: usize, half_width: f64, points: usize) -> Self {
        Self {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
            points,
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Returns `(ln integral, edge ratio)` for a trapezoid rule with `points` per axis.
fn trapezoid_log(f: &dyn Fn(&DVector<f64>) -> f64, grid: &QuadGrid, points: usize) -> (f64, f64) {
    let k = grid.lo.len();
    let hs: Vec<f64> = (0..k).map(|a| (grid.hi[a] - grid.lo[a]) / (points - 1) as f64).collect();
    let total = points.pow(k as u32);
    let mut terms = Vec::with_capacity(total);
    let mut edge = f64::NEG_INFINITY;
    let mut idx = vec![0usize; k];
    for _ in 0..total {
        let x = DVector::from_fn(k, |a, _| grid.lo[a] + hs[a] * idx[a] as f64);
        let v = f(&x);
        let mut w = 0.0;
        let mut on_edge = false;
        for &i in &idx {
            if i == 0 || i == points - 1 {
                w += 0.5f64.ln();
                on_edge = true;
            }
        }
        if on_edge {
            edge = edge.max(v);
        }
        terms.push(v + w);
        for a in 0..k {
            idx[a] += 1;
            if idx[a] < points {
                break;
            }
            idx[a] = 0;
        }
    }
    let log_h: f64 = hs.iter().map(|h| h.ln()).sum();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (log_sum_exp(&terms) + log_h, (edge - peak).exp())
}

/// Quadrature oracle for [`compose`]: `ln ν₃(φ, ψ)` at each requested point,
/// integrating the shared variable on a trapezoid grid. Only point
/// evaluations of the two kernels are used.
pub fn compose_numeric(
    k1: &KernelHD,
    k2: &KernelHD,
    points: &[(DVector<f64>, DVector<f64>)],
    grid: &QuadGrid,
) -> Result<Vec<f64>> {
    if k1.d_in != k2.d_out {
        return Err(Error::DimensionMismatch { expected: k1.d_in, found: k2.d_out });
    }
    let k = k1.d_in;
    if k == 0 || k > 2 {
        return Err(crate::error::invalid("grid", "quadrature supports 1 or 2 shared dimensions"));
    }
    if grid.lo.len() != k || grid.hi.len() != k || grid.points < 5 || grid.points % 2 == 0 {
        return Err(Error::GridMismatch("grid must match the shared dimension with an odd point count ≥ 5".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    for (phi, psi) in points {
        let f = |eta: &DVector<f64>| k1.log_value(phi, eta) + k2.log_value(eta, psi);
        let (fine, edge) = trapezoid_log(&f, grid, grid.points);
        let (coarse, _) = trapezoid_log(&f, grid, grid.points / 2 + 1);
        if edge > 1e-13 {
            return Err(Error::GridTooCoarse(format!("integrand at grid edge is {edge:.3e} of its peak")));
        }
        let rel = (fine - coarse).abs();
        if rel > 1e-10 {
            return Err(Error::GridTooCoarse(format!("halving the step changes the integral by {rel:.3e} (relative)")));
        }
        out.push(2.0 * fine);
    }
    Ok(out)
}

/// Self-pairing mass `(2π)^{d/2} det(Q)^{−1/2}` of the unnormalized `exp(−½xᵀQx)`.
pub fn gaussian_integral(q: &DMatrix<f64>) -> Result<f64> {
    let d = q.nrows() as f64;
    Ok((0.5 * d * (2.0 * PI).ln() - 0.5 * spd_logdet(q, "gaussian integral")?).exp())
}
