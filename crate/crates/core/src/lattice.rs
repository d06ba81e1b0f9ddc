//! Finite-difference discretization of a single Fourier mode along the
//! cylinder axis.
//!
//! A mode coordinate with weight `w` and frequency `ω` on a chain of nodes with
//! spacing `h` has energy `½ w Σ_edges [(u_{i+1} − u_i)²/h + hω²(u_i² + u_{i+1}²)/2]`.
//! Energies of adjacent chains add at a shared node, so Schur complements,
//! Gaussian marginals and determinants glue exactly on the grid.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::geometry::{mode_weight, omega, DtNBlock};
use crate::linalg::{solve_tridiagonal, tridiagonal_spd_logdet};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Number of grid intervals in `length`; errors unless `length` is a multiple of `h`.
pub fn steps(length: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(invalid("h", "grid spacing must be positive"));
    }
    let n = (length / h).round();
    if n < 1.0 || (n * h - length).abs() > 1e-9 * length.max(h) {
        return Err(Error::GridMismatch(format!("length {length} is not a positive multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// Far end of a one-boundary chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarEnd {
    Dirichlet,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeMode {
    pub weight: f64,
    pub omega: f64,
    pub h: f64,
}

impl LatticeMode {
    pub fn new(radius: f64, m: f64, n: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h", "grid spacing must be positive"));
        }
        Ok(Self {
            weight: mode_weight(radius, n),
            omega: omega(m, radius, n)?,
            h,
        })
    }

    /// Unit weight, for checks independent of the mode bookkeeping.
    pub fn unit(omega: f64, h: f64) -> Self {
        Self { weight: 1.0, omega, h }
    }

    /// `κ` with `cosh κ = 1 + h²ω²/2`.
    pub fn kappa(&self) -> f64 {
        2.0 * (0.5 * self.h * self.omega).asinh()
    }

    fn edge(&self) -> (f64, f64) {
        // (off-diagonal coupling, per-endpoint diagonal contribution)
        let k = self.weight / self.h;
        (-k, k + 0.5 * self.weight * self.h * self.omega * self.omega)
    }

    fn interior_diag(&self) -> f64 {
        2.0 * self.edge().1
    }

    /// Precision of the open chain on nodes `0..=intervals`, ends free.
    pub fn chain_precision(&self, intervals: usize) -> DMatrix<f64> {
        let (off, end) = self.edge();
        let n = intervals + 1;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..intervals {
            k[(i, i)] += end;
            k[(i + 1, i + 1)] += end;
            k[(i, i + 1)] += off;
            k[(i + 1, i)] += off;
        }
        k
    }

    /// Precision of the cyclic chain with `nodes` nodes.
    pub fn cyclic_precision(&self, nodes: usize) -> DMatrix<f64> {
        let (off, end) = self.edge();
        let mut k = DMatrix::zeros(nodes, nodes);
        for i in 0..nodes {
            let j = (i + 1) % nodes;
            k[(i, i)] += end;
            k[(j, j)] += end;
            k[(i, j)] += off;
            k[(j, i)] += off;
        }
        k
    }

    /// Interior block of the chain with both ends pinned.
    pub fn dirichlet_precision(&self, intervals: usize) -> DMatrix<f64> {
        let n = intervals + 1;
        self.chain_precision(intervals).view((1, 1), (n - 2, n - 2)).into_owned()
    }

    /// `ln det(K_D/2π)` for the pinned chain of `intervals` intervals.
    pub fn dirichlet_logdet(&self, intervals: usize) -> Result<f64> {
        if intervals < 2 {
            return Ok(0.0);
        }
        let k = intervals - 1;
        let (off, _) = self.edge();
        let diag = vec![self.interior_diag() / (2.0 * std::f64::consts::PI); k];
        let offs = vec![off / (2.0 * std::f64::consts::PI); k - 1];
        tridiagonal_spd_logdet(&diag, &offs)
    }

    /// `ln det(K_T/2π)` for the cyclic chain, by eliminating node 0 last.
    pub fn torus_logdet(&self, nodes: usize) -> Result<f64> {
        if nodes < 2 {
            return Err(invalid("nodes", "a cyclic chain needs at least two nodes"));
        }
        let (off, _) = self.edge();
        let d = self.interior_diag();
        if nodes == 2 {
            // both edges join the same pair of nodes
            let m = DMatrix::from_row_slice(2, 2, &[d, 2.0 * off, 2.0 * off, d]) / (2.0 * std::f64::consts::PI);
            return crate::linalg::spd_logdet(&m, "two-node cyclic chain");
        }
        let k = nodes - 1;
        let diag = vec![d; k];
        let offs = vec![off; k - 1];
        let chain = tridiagonal_spd_logdet(&diag, &offs)? - k as f64 * LN_2PI;
        let mut v = vec![0.0; k];
        v[0] += off;
        v[k - 1] += off;
        let x = solve_tridiagonal(&offs, &diag, &offs, &v).ok_or_else(|| Error::NotPositiveDefinite("cyclic chain".into()))?;
        let pivot = d - v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite("cyclic chain pivot".into()));
        }
        Ok(chain + (pivot / (2.0 * std::f64::consts::PI)).ln())
    }

    /// Energy Hessian on the two end values after minimizing over the interior.
    pub fn block(&self, intervals: usize) -> DtNBlock {
        let (off, end) = self.edge();
        if intervals == 1 {
            return DtNBlock { a: end, b: off, d: end };
        }
        let k = intervals - 1;
        let diag = vec![self.interior_diag(); k];
        let offs = vec![off; k - 1];
        let mut e0 = vec![0.0; k];
        e0[0] = -off;
        let u = solve_tridiagonal(&offs, &diag, &offs, &e0).expect("pinned chain is positive definite");
        // Extension of (1, 0): interior values u; Hessian entries from the end rows.
        let a = end + off * u[0];
        let b = off * u[k - 1];
        DtNBlock { a, b, d: a }
    }

    /// Closed form `(w/h) sinh κ [[coth Nκ, −csch Nκ], [−csch Nκ, coth Nκ]]`.
    pub fn block_closed_form(&self, intervals: usize) -> DtNBlock {
        let kap = self.kappa();
        let x = intervals as f64 * kap;
        let s = self.weight / self.h * kap.sinh();
        DtNBlock {
            a: s / x.tanh(),
            b: -s / x.sinh(),
            d: s / x.tanh(),
        }
    }

    /// Energy Hessian at the near end of a one-boundary chain.
    pub fn capped_block(&self, intervals: usize, far: FarEnd) -> f64 {
        let blk = self.block(intervals);
        match far {
            FarEnd::Dirichlet => blk.d,
            FarEnd::Free => blk.d - blk.b * blk.b / blk.a,
        }
    }

    /// `ln det(K/2π)` of the one-boundary chain with its near end pinned.
    pub fn capped_logdet(&self, intervals: usize, far: FarEnd) -> Result<f64> {
        match far {
            FarEnd::Dirichlet => self.dirichlet_logdet(intervals),
            FarEnd::Free => {
                let (off, end) = self.edge();
                let two_pi = 2.0 * std::f64::consts::PI;
                let mut diag = vec![self.interior_diag() / two_pi; intervals];
                diag[0] = end / two_pi;
                let offs = vec![off / two_pi; intervals - 1];
                tridiagonal_spd_logdet(&diag, &offs)
            }
        }
    }

    /// Closed-form `ln det(K_T/2π)` from the circulant eigenvalues.
    pub fn torus_logdet_eigen(&self, nodes: usize) -> f64 {
        (0..nodes)
            .map(|j| {
                let s = (std::f64::consts::PI * j as f64 / nodes as f64).sin();
                (self.weight * (4.0 / self.h * s * s + self.h * self.omega * self.omega) / (2.0 * std::f64::consts::PI)).ln()
            })
            .sum()
    }

    /// Closed-form `ln det(K_D/2π)` from the sine-transform eigenvalues.
    pub fn dirichlet_logdet_eigen(&self, intervals: usize) -> f64 {
        (1..intervals)
            .map(|j| {
                let s = (std::f64::consts::PI * j as f64 / (2.0 * intervals as f64)).sin();
                (self.weight * (4.0 / self.h * s * s + self.h * self.omega * self.omega) / (2.0 * std::f64::consts::PI)).ln()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steps_require_alignment() {
        assert_eq!(steps(1.0, 0.125).unwrap(), 8);
        assert!(matches!(steps(1.0, 0.3), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn schur_block_matches_closed_form() {
        let lm = LatticeMode { weight: 2.5, omega: 1.7, h: 0.05 };
        for n in [1, 2, 3, 20, 200] {
            let (x, y) = (lm.block(n), lm.block_closed_form(n));
            assert!(x.rel_diff(&y) < 1e-12, "{n}: {x:?} {y:?}");
        }
    }

    #[test]
    fn lattice_block_approaches_continuum() {
        let lm = LatticeMode::unit(1.0, 1.0 / 256.0);
        let b = lm.block(256);
        assert!((b.a - 1.313_035_285_5).abs() < 1e-4);
    }

    #[test]
    fn logdets_match_eigenvalue_formulas() {
        let lm = LatticeMode { weight: 3.0, omega: 0.8, h: 0.1 };
        for n in [2usize, 3, 7, 40] {
            assert_relative_eq!(lm.torus_logdet(n).unwrap(), lm.torus_logdet_eigen(n), epsilon = 1e-10);
            let dense = crate::linalg::spd_logdet(&(lm.cyclic_precision(n) / (2.0 * std::f64::consts::PI)), "").unwrap();
            assert_relative_eq!(dense, lm.torus_logdet_eigen(n), epsilon = 1e-10);
        }
        for n in [2usize, 5, 33] {
            assert_relative_eq!(lm.dirichlet_logdet(n).unwrap(), lm.dirichlet_logdet_eigen(n), epsilon = 1e-10);
        }
    }

    #[test]
    fn free_cap_logdet_matches_dense() {
        let lm = LatticeMode { weight: 1.5, omega: 0.9, h: 0.1 };
        let k = lm.chain_precision(12);
        let dense = crate::linalg::spd_logdet(&(k.view((0, 0), (12, 12)).into_owned() / (2.0 * std::f64::consts::PI)), "").unwrap();
        assert_relative_eq!(lm.capped_logdet(12, FarEnd::Free).unwrap(), dense, epsilon = 1e-11);
    }

    #[test]
    fn free_cap_matches_continuum_limit() {
        let lm = LatticeMode::unit(1.2, 1.0 / 512.0);
        let d = lm.capped_block(512, FarEnd::Free);
        assert!((d - 1.2 * (1.2f64).tanh()).abs() < 1e-4);
    }
}
