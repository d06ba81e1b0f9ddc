//! Monte Carlo for the Wick-ordered interacting field on the flat torus at a
//! spectral cutoff.
//!
//! Samples are drawn mode by mode from the free field and evaluated on the
//! grid with one point per retained mode, so the pointwise variance is exactly
//! `c_N` and Wick powers ordered with `c_N` have mean zero sample by sample in
//! expectation.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::determinants::{SpectrumSpec, SurfaceKind};
use crate::error::{invalid, Error, Result};
use crate::wick::{covariance_split, cutoff_variance, wick_interaction, wick_interaction_rows, FieldGrid, SpectralCutoff, TorusParams, WickPolynomial};
use crate::zeta;

/// Which covariance the interaction polynomial is Wick-ordered against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WickScheme {
    /// The full cutoff covariance `C`, variance `c_N`.
    Full,
    /// The short-distance part `C₀`, variance `c_N − C_f`.
    ShortDistance,
}

/// How the free torus partition multiplying the weight average is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefactorRegime {
    /// `−½ Σ ln λ_k` over the retained modes.
    Spectral,
    Zeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub m: f64,
    pub radius: f64,
    pub length: f64,
    /// Modes kept by the sampler.
    pub cutoff: SpectralCutoff,
    /// Cutoff at which the ordering constant is computed; must equal `cutoff`.
    pub counterterm_cutoff: SpectralCutoff,
    /// Coefficients of `P` in the Wick basis of `scheme`.
    pub coeffs: Vec<f64>,
    pub scheme: WickScheme,
    /// Independent antithetic pairs, over all chains.
    pub samples: usize,
    pub seed: u64,
    pub chains: usize,
    pub prefactor: PrefactorRegime,
}

impl MCConfig {
    /// `λ :φ⁴:` on the torus with a square mode cutoff `n`.
    pub fn quartic(m: f64, radius: f64, length: f64, lambda: f64, n: usize, samples: usize, seed: u64) -> Self {
        Self {
            m,
            radius,
            length,
            cutoff: SpectralCutoff::square(n),
            counterterm_cutoff: SpectralCutoff::square(n),
            coeffs: vec![0.0, 0.0, 0.0, 0.0, lambda],
            scheme: WickScheme::Full,
            samples,
            seed,
            chains: 4,
            prefactor: PrefactorRegime::Spectral,
        }
    }

    /// Same physics with the sampling and counterterm cutoffs doubled.
    pub fn doubled(&self) -> Self {
        let c = SpectralCutoff { n_theta: 2 * self.cutoff.n_theta, n_t: 2 * self.cutoff.n_t };
        Self { cutoff: c, counterterm_cutoff: c, ..self.clone() }
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        Self { coeffs, ..self.clone() }
    }

    pub fn torus(&self) -> Result<TorusParams> {
        TorusParams::new(self.m, self.radius, self.length)
    }

    pub fn validate(&self) -> Result<()> {
        self.torus()?;
        if self.cutoff != self.counterterm_cutoff {
            return Err(Error::CutoffMismatch {
                counterterm: self.counterterm_cutoff.tag(),
                sampling: self.cutoff.tag(),
            });
        }
        if self.chains == 0 || self.samples < self.chains {
            return Err(invalid("samples", "need at least one sample per chain"));
        }
        self.polynomial_unordered()?.require_bounded_below()
    }

    fn polynomial_unordered(&self) -> Result<WickPolynomial> {
        WickPolynomial::new(self.coeffs.clone(), 0.0)
    }
}

/// Ordering constants at the sampling cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ordering {
    pub c_n: f64,
    pub c_f: f64,
    /// Variance actually used to order `P`.
    pub constant: f64,
}

pub fn ordering(cfg: &MCConfig) -> Result<Ordering> {
    cfg.validate()?;
    let p = cfg.torus()?;
    let (c_n, c_f) = match cfg.scheme {
        WickScheme::Full => (cutoff_variance(&p, cfg.cutoff), 0.0),
        WickScheme::ShortDistance => {
            let s = covariance_split(&p, cfg.counterterm_cutoff)?;
            (s.c_n, s.c_f)
        }
    };
    Ok(Ordering { c_n, c_f, constant: c_n - c_f })
}

/// The interaction of `cfg` as a Wick polynomial ordered at its own cutoff.
pub fn interaction(cfg: &MCConfig) -> Result<WickPolynomial> {
    WickPolynomial::new(cfg.coeffs.clone(), ordering(cfg)?.constant)
}

/// Precomputed mode amplitudes and trigonometric tables for one cutoff.
#[derive(Debug, Clone)]
pub struct TorusSampler {
    cutoff: SpectralCutoff,
    rows: usize,
    cols: usize,
    cell_area: f64,
    zero_sd: f64,
    /// `sd[n][j + n_t]` for `n ≥ 1`, and `n = 0` with `j > 0`.
    sd: Vec<Vec<f64>>,
    /// `e^{iβ_j t_b}` indexed `[j + n_t][b]`.
    t_phase: Vec<Vec<Complex<f64>>>,
    /// `e^{inθ_a}` indexed `[n][a]`.
    theta_phase: Vec<Vec<Complex<f64>>>,
}

impl TorusSampler {
    pub fn new(cfg: &MCConfig) -> Result<Self> {
        let p = cfg.torus()?;
        let c = cfg.cutoff;
        let (cols, rows) = (2 * c.n_theta + 1, 2 * c.n_t + 1);
        let area = p.area();
        let lambda = |n: i64, j: i64| {
            let k1 = n as f64 / p.radius;
            let k2 = 2.0 * PI * j as f64 / p.length;
            p.m * p.m + k1 * k1 + k2 * k2
        };
        let sd = (0..=c.n_theta as i64)
            .map(|n| {
                (-(c.n_t as i64)..=c.n_t as i64)
                    .map(|j| if n == 0 && j <= 0 { 0.0 } else { (2.0 / (area * lambda(n, j))).sqrt() })
                    .collect()
            })
            .collect();
        let t_phase = (-(c.n_t as i64)..=c.n_t as i64)
            .map(|j| {
                (0..rows)
                    .map(|b| Complex::from_polar(1.0, 2.0 * PI * (j * b as i64) as f64 / rows as f64))
                    .collect()
            })
            .collect();
        let theta_phase = (0..=c.n_theta)
            .map(|n| {
                (0..cols)
                    .map(|a| Complex::from_polar(1.0, 2.0 * PI * (n * a) as f64 / cols as f64))
                    .collect()
            })
            .collect();
        Ok(Self {
            cutoff: c,
            rows,
            cols,
            cell_area: area / (rows * cols) as f64,
            zero_sd: (1.0 / (area * lambda(0, 0))).sqrt(),
            sd,
            t_phase,
            theta_phase,
        })
    }

    pub fn cutoff(&self) -> SpectralCutoff {
        self.cutoff
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> FieldGrid {
        let nt = 2 * self.cutoff.n_t + 1;
        let mut values = vec![self.zero_sd * rng.sample::<f64, _>(StandardNormal); self.rows * self.cols];
        let mut g = vec![Complex::new(0.0, 0.0); self.rows];
        for (n, sd_n) in self.sd.iter().enumerate() {
            g.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            for (j, &s) in sd_n.iter().enumerate().take(nt) {
                if s == 0.0 {
                    continue;
                }
                let c = Complex::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal));
                for (gb, ph) in g.iter_mut().zip(&self.t_phase[j]) {
                    *gb += c * ph;
                }
            }
            for (b, gb) in g.iter().enumerate() {
                let row = &mut values[b * self.cols..(b + 1) * self.cols];
                for (v, ph) in row.iter_mut().zip(&self.theta_phase[n]) {
                    *v += (gb * ph).re;
                }
            }
        }
        FieldGrid { rows: self.rows, cols: self.cols, values, cell_area: self.cell_area }
    }
}

/// Per-chain generator: the stream index is the chain index.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// One free-field sample on the mode grid of `cfg`.
pub fn sample_gff_torus(cfg: &MCConfig, chain_seed: u64) -> Result<FieldGrid> {
    cfg.torus()?;
    Ok(TorusSampler::new(cfg)?.sample(&mut ChaCha8Rng::seed_from_u64(chain_seed)))
}

/// `−∫ :P: dA`.
pub fn fk_log_weight(sample: &FieldGrid, p: &WickPolynomial) -> Result<f64> {
    p.require_bounded_below()?;
    Ok(-wick_interaction(sample, p)?)
}

/// `exp(−∫ :P: dA)`.
pub fn fk_weight(sample: &FieldGrid, p: &WickPolynomial) -> Result<f64> {
    let lw = fk_log_weight(sample, p)?;
    if lw > 700.0 {
        return Err(invalid("weight", format!("log-weight {lw} overflows")));
    }
    Ok(lw.exp())
}

/// Mean and standard error of a set of independent values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }

    /// `|mean − target| ≤ k σ`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    /// `E[exp(−∫:P:)]` under the free field.
    pub weight: Estimate,
    /// `ln Z = ln E[w] + ln Z_free`.
    pub log_partition: f64,
    pub log_free_partition: f64,
    pub prefactor: PrefactorRegime,
    /// `(Σw)² / Σw²` over the antithetic pairs.
    pub effective_samples: f64,
    pub chain_means: Vec<f64>,
    /// Chains whose mean sits more than 4σ from the pooled mean.
    pub flagged_chains: Vec<usize>,
    /// Spatial averages of `:φ²:_{c_N}` and `:φ⁴:_{c_N}`.
    pub wick2: Estimate,
    pub wick4: Estimate,
    pub ordering: Ordering,
    pub cutoff_tag: String,
    pub counterterm_tag: String,
    pub seed: u64,
    pub samples: usize,
}

/// Free torus partition at the sampling cutoff.
pub fn free_partition(cfg: &MCConfig) -> Result<f64> {
    match cfg.prefactor {
        PrefactorRegime::Spectral => {
            let s = SpectrumSpec { kind: SurfaceKind::Torus, m: cfg.m, radius: cfg.radius, length: cfg.length };
            Ok(-0.5 * s.logdet_truncated(cfg.cutoff.n_theta, cfg.cutoff.n_t)?)
        }
        PrefactorRegime::Zeta => {
            zeta::require_validated()?;
            Ok(-0.5 * zeta::zeta_logdet_torus(cfg.m, cfg.radius, cfg.length)?)
        }
    }
}

struct ChainOut {
    weights: Vec<f64>,
    wick2: Vec<f64>,
    wick4: Vec<f64>,
}

fn run_chain(cfg: &MCConfig, sampler: &TorusSampler, p: &WickPolynomial, c_n: f64, chain: usize, pairs: usize) -> Result<ChainOut> {
    let mut rng = chain_rng(cfg.seed, chain);
    let w2 = WickPolynomial::new(vec![0.0, 0.0, 1.0], c_n)?;
    let w4 = WickPolynomial::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], c_n)?;
    let area = cfg.torus()?.area();
    let mut out = ChainOut { weights: Vec::with_capacity(pairs), wick2: Vec::with_capacity(pairs), wick4: Vec::with_capacity(pairs) };
    for _ in 0..pairs {
        let phi = sampler.sample(&mut rng);
        let anti = phi.negated();
        let w = 0.5 * (fk_weight(&phi, p)? + fk_weight(&anti, p)?);
        out.weights.push(w);
        out.wick2.push(wick_interaction(&phi, &w2)? / area);
        out.wick4.push(wick_interaction(&phi, &w4)? / area);
    }
    Ok(out)
}

/// Estimate `Z = E[e^{−∫:P:}] · Z_free` with antithetic pairs `(φ, −φ)` over
/// `cfg.chains` independent streams.
pub fn mc_partition(cfg: &MCConfig) -> Result<MCReport> {
    let ord = ordering(cfg)?;
    let p = WickPolynomial::new(cfg.coeffs.clone(), ord.constant)?;
    let sampler = TorusSampler::new(cfg)?;
    let mut all_w = Vec::with_capacity(cfg.samples);
    let (mut all2, mut all4) = (Vec::new(), Vec::new());
    let mut chain_est = Vec::with_capacity(cfg.chains);
    for chain in 0..cfg.chains {
        let pairs = cfg.samples / cfg.chains + usize::from(chain < cfg.samples % cfg.chains);
        let out = run_chain(cfg, &sampler, &p, ord.c_n, chain, pairs)?;
        chain_est.push(Estimate::from_values(&out.weights));
        all_w.extend(out.weights);
        all2.extend(out.wick2);
        all4.extend(out.wick4);
    }
    let weight = Estimate::from_values(&all_w);
    let flagged_chains = chain_est
        .iter()
        .enumerate()
        .filter(|(_, e)| (e.mean - weight.mean).abs() > 4.0 * e.std_error.max(f64::MIN_POSITIVE) && e.std_error > 0.0)
        .map(|(i, _)| i)
        .collect();
    let s1: f64 = all_w.iter().sum();
    let s2: f64 = all_w.iter().map(|w| w * w).sum();
    let log_free = free_partition(cfg)?;
    Ok(MCReport {
        weight,
        log_partition: weight.mean.ln() + log_free,
        log_free_partition: log_free,
        prefactor: cfg.prefactor,
        effective_samples: s1 * s1 / s2,
        chain_means: chain_est.iter().map(|e| e.mean).collect(),
        flagged_chains,
        wick2: Estimate::from_values(&all2),
        wick4: Estimate::from_values(&all4),
        ordering: ord,
        cutoff_tag: cfg.cutoff.tag(),
        counterterm_tag: cfg.counterterm_cutoff.tag(),
        seed: cfg.seed,
        samples: all_w.len(),
    })
}

/// Central difference `−sinh(λI)/λ` of the weight in the coupling, averaged
/// over samples; its expectation is `dZ/dλ / Z_free` at zero up to `O(λ²)`.
pub fn coupling_slope(cfg: &MCConfig, lambda: f64) -> Result<Estimate> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "finite-difference step must be positive"));
    }
    let ord = ordering(cfg)?;
    let p = WickPolynomial::new(cfg.coeffs.clone(), ord.constant)?;
    let sampler = TorusSampler::new(cfg)?;
    let mut v = Vec::with_capacity(cfg.samples);
    for chain in 0..cfg.chains {
        let mut rng = chain_rng(cfg.seed, chain);
        let pairs = cfg.samples / cfg.chains + usize::from(chain < cfg.samples % cfg.chains);
        for _ in 0..pairs {
            let i = wick_interaction(&sampler.sample(&mut rng), &p)?;
            v.push(-(lambda * i).sinh() / lambda);
        }
    }
    Ok(Estimate::from_values(&v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityReport {
    pub pieces: usize,
    pub whole: f64,
    pub sum_of_pieces: f64,
    pub residual: f64,
    /// `8 ε Σ|terms|`, the accumulation bound the residual is held to.
    pub ulp_bound: f64,
}

/// Split the torus at the circles `t = cuts` into cylinders and compare the
/// interaction of the whole with the sum over pieces.
pub fn locality_check(sample: &FieldGrid, p: &WickPolynomial, length: f64, cuts: &[f64]) -> Result<LocalityReport> {
    let rows = sample.rows;
    let dt = length / rows as f64;
    let mut idx = Vec::with_capacity(cuts.len());
    for &c in cuts {
        let k = (c / dt).round();
        if !(0.0..rows as f64).contains(&k) || (k * dt - c).abs() > 1e-9 * length {
            return Err(Error::GridMismatch(format!("cut at t = {c} is not a grid circle (dt = {dt})")));
        }
        idx.push(k as usize);
    }
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Err(invalid("cuts", "need at least one cut circle"));
    }
    let mut ranges: Vec<Range<usize>> = idx.windows(2).map(|w| w[0]..w[1]).collect();
    // The last piece wraps through t = 0.
    let (first, last) = (idx[0], idx[idx.len() - 1]);
    ranges.push(last..rows);
    ranges.push(0..first);
    let mut sum = 0.0;
    for r in &ranges {
        sum += wick_interaction_rows(sample, p, r.clone())?;
    }
    let whole = wick_interaction(sample, p)?;
    let abs_total: f64 = sample.values.iter().map(|&v| p.eval(v).abs()).sum::<f64>() * sample.cell_area;
    Ok(LocalityReport {
        pieces: idx.len(),
        whole,
        sum_of_pieces: sum,
        residual: (whole - sum).abs(),
        ulp_bound: 8.0 * f64::EPSILON * abs_total.max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(samples: usize) -> MCConfig {
        MCConfig::quartic(1.0, 1.0, 1.0, 0.1, 4, samples, 11)
    }

    #[test]
    fn mismatched_cutoffs_are_rejected() {
        let mut c = cfg(1000);
        c.counterterm_cutoff = SpectralCutoff::square(5);
        assert!(matches!(mc_partition(&c), Err(Error::CutoffMismatch { .. })));
        let neg = cfg(1000).with_coeffs(vec![0.0, 0.0, 0.0, 0.0, -0.1]);
        assert!(matches!(neg.validate(), Err(Error::UnboundedInteraction)));
        assert!(MCConfig { m: 0.0, ..cfg(1000) }.validate().is_err());
    }

    #[test]
    fn pointwise_variance_is_cutoff_variance() {
        let c = cfg(1000);
        let s = TorusSampler::new(&c).unwrap();
        let mut rng = chain_rng(3, 0);
        let mut v = Vec::new();
        for _ in 0..4000 {
            let f = s.sample(&mut rng);
            v.push(f.values[7] * f.values[7]);
        }
        let e = Estimate::from_values(&v);
        let target = cutoff_variance(&c.torus().unwrap(), c.cutoff);
        assert!(e.within(target, 4.0), "{e:?} {target}");
    }

    #[test]
    fn zero_interaction_has_unit_weight() {
        let c = cfg(1000).with_coeffs(vec![0.0]);
        let r = mc_partition(&c).unwrap();
        assert_eq!(r.weight.mean, 1.0);
        assert_eq!(r.log_partition, r.log_free_partition);
    }

    #[test]
    fn fixed_seed_reproduces() {
        let a = sample_gff_torus(&cfg(1000), 5).unwrap();
        let b = sample_gff_torus(&cfg(1000), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn locality_is_additive() {
        let c = cfg(1000);
        let f = sample_gff_torus(&c, 9).unwrap();
        let p = interaction(&c).unwrap();
        let dt = 1.0 / f.rows as f64;
        for cuts in [vec![0.0, 4.0 * dt], vec![dt, 3.0 * dt, 6.0 * dt]] {
            let r = locality_check(&f, &p, 1.0, &cuts).unwrap();
            assert!(r.residual <= r.ulp_bound, "{r:?}");
        }
        assert!(matches!(locality_check(&f, &p, 1.0, &[0.5 * dt]), Err(Error::GridMismatch(_))));
    }
}
