use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use segal_core::determinants::{anomaly, bfk_composition_identity, bfk_double_identity};
use segal_core::geometry::{bvp_richardson, dtn_block, dtn_cylinder, glued_dtn, lagrangian_residual, omega, schur_compose, schur_compose_cap};
use segal_core::interacting::{interaction, locality_check, mc_partition, sample_gff_torus};
use segal_core::modes::{kakutani_verdict, model_spectrum, Verdict};
use segal_core::sewing::{amplitude_free, amplitude_residuals, disintegration_check, fourier_identity, sew, torus_partition, trace_amplitude};
use segal_core::wick::{covariance_split, gaussian_expectation_exact, hermite_wick_exact, poly_mul_exact, smooth_covariance_images, wick_reorder_exact};
use segal_core::{zeta, CylinderGeometry, MCConfig, Regime, Result, SpectralCutoff, TorusParams, Truncation};

use crate::report::Check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Truncated,
    Zeta,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub n_max: usize,
    pub m: f64,
    pub big_m: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub h: f64,
    pub seed: u64,
    pub regime: RegimeArg,
    pub samples: usize,
    pub lambda: f64,
    pub mc_cutoff: usize,
}

impl Settings {
    fn trunc(&self) -> Result<Truncation> {
        Truncation::new(self.n_max)
    }

    fn regime(&self) -> Result<Regime> {
        match self.regime {
            RegimeArg::Truncated => Ok(Regime::Truncated { h: self.h }),
            RegimeArg::Zeta => {
                zeta::validate_oracle()?;
                Ok(Regime::Zeta)
            }
        }
    }

    fn cyl(&self, l: f64) -> Result<CylinderGeometry> {
        CylinderGeometry::new(self.radius, l)
    }

    fn label(&self) -> &'static str {
        match self.regime {
            RegimeArg::Truncated => "truncated",
            RegimeArg::Zeta => "zeta",
        }
    }

    /// Prefactor tolerance of the selected regime.
    fn regime_tolerance(&self) -> f64 {
        match self.regime {
            RegimeArg::Truncated => 1e-9,
            RegimeArg::Zeta => 1e-5,
        }
    }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

pub fn zeta_oracle(_s: &Settings) -> Result<Vec<Check>> {
    let worst = zeta::validate_oracle()?;
    Ok(vec![Check::new("zeta_oracle", "Bessel series against Abel-Plana integral", worst, 1e-9, "zeta")])
}

pub fn kakutani(s: &Settings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in 1..=5u32 {
        let rep = kakutani_verdict(&model_spectrum(d), s.m, s.big_m, d)?;
        let expect = if d <= 3 || s.m == s.big_m { Verdict::Equivalent } else { Verdict::Disjoint };
        let wrong = if rep.verdict == expect { 0.0 } else { 1.0 };
        out.push(
            Check::new("kakutani_verdict", "dimension dichotomy of mass-shifted measures", wrong, 0.0, "exact")
                .param("d", d)
                .param("verdict", format!("{:?}", rep.verdict))
                .param("m", s.m)
                .param("M", s.big_m),
        );
        if s.m != s.big_m {
            out.push(
                Check::new("kakutani_tail_exponent", "Hellinger defect decay in the eigenvalue", (rep.tail_exponent_lambda - 2.0).abs(), 0.2, "exact")
                    .param("d", d)
                    .param("exponent", rep.tail_exponent_lambda),
            );
        }
    }
    Ok(out)
}

pub fn dtn_verify(s: &Settings) -> Result<Vec<Check>> {
    let (mut semi, mut bvp, mut glue, mut lag) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (g1, g2) = (s.cyl(s.l1)?, s.cyl(s.l2)?);
    for n in 0..=s.n_max {
        let w = omega(s.m, s.radius, n)?;
        let c = schur_compose(&dtn_block(w, s.l2), &dtn_block(w, s.l1))?;
        semi = semi.max(c.rel_diff(&dtn_block(w, s.l1 + s.l2)));
        if n <= 4 {
            let b = dtn_block(w, s.length);
            let (x, y) = bvp_richardson(w, s.length, 1.0, 0.0, s.length / 1024.0)?;
            bvp = bvp.max((x - b.a).abs().max((y - b.b).abs()) / b.a);
        }
        let gl = glued_dtn(&g1, &g2, s.m, n)?;
        let (b1, b2) = (dtn_cylinder(&g1, s.m, n)?, dtn_cylinder(&g2, s.m, n)?);
        glue = glue.max(rel(gl.beta, b2.b)).max(rel(gl.delta, b1.d + b2.a)).max(rel(gl.alpha, b2.d));
        let (r1, r2) = lagrangian_residual(&b2, b1.d, 1.0)?;
        lag = lag.max(r1).max(r2);
        let _ = schur_compose_cap(&b2, b1.d)?;
    }
    let p = |c: Check| c.param("n_max", s.n_max).param("m", s.m).param("R", s.radius);
    Ok(vec![
        p(Check::new("dtn_semigroup", "cylinder semigroup of boundary operators", semi, 1e-10, "exact").param("L1", s.l1).param("L2", s.l2)),
        p(Check::new("dtn_bvp", "boundary operator from a finite-difference solve", bvp, 1e-8, "exact").param("L", s.length)),
        p(Check::new("dtn_jump_blocks", "jump operator blocks from the mixed Green's function", glue, 1e-9, "exact").param("L1", s.l1).param("L2", s.l2)),
        p(Check::new("dtn_lagrangian", "pair relations of the eliminated boundary value", lag, 1e-12, "exact")),
    ])
}

pub fn det_glue(s: &Settings) -> Result<Vec<Check>> {
    let t = s.trunc()?;
    let d = bfk_double_identity(&s.cyl(s.length)?, s.m, t, s.h)?;
    let c = bfk_composition_identity(&s.cyl(s.l1)?, &s.cyl(s.l2)?, s.m, t, s.h)?;
    let p = |ch: Check| ch.param("n_max", s.n_max).param("m", s.m).param("R", s.radius).param("h", s.h);
    let mut out = vec![
        p(Check::new("det_double", "determinant of the double against the boundary operator", d.max_residual, 1e-9, "truncated").param("L", s.length)),
        p(Check::new("det_composition", "determinant gluing along one circle", c.composition, 1e-9, "truncated").param("L1", s.l1).param("L2", s.l2)),
        p(Check::new("det_block_factorization", "block factorization of the glued operator", c.block_factorization, 1e-9, "truncated")),
        p(Check::new("det_prefactor_chain", "prefactor identity of the composite", c.prefactor_chain, 1e-9, "truncated")),
    ];
    if s.regime == RegimeArg::Zeta {
        zeta::validate_oracle()?;
        let lhs = zeta::zeta_logdet_torus(s.m, s.radius, 2.0 * s.length)?;
        let rhs = 2.0 * zeta::zeta_logdet_dirichlet_cylinder(s.m, s.radius, s.length)? + zeta::zeta_logdet_double_dtn(s.m, s.radius)?;
        out.push(p(Check::new("det_double_zeta", "regularized determinant of the double", (lhs - rhs).abs(), 1e-9, "zeta")));
        let route = zeta::torus_logdet_counterterm(s.m, s.radius, s.length, 128)?;
        let closed = zeta::zeta_logdet_torus(s.m, s.radius, s.length)?;
        out.push(p(Check::new("det_counterterm_route", "counterterm-subtracted sum against the closed form", (route - closed).abs(), 1e-6, "zeta")));
    }
    Ok(out)
}

pub fn anomaly_check(s: &Settings) -> Result<Vec<Check>> {
    let (g1, g2) = (s.cyl(s.length)?, s.cyl(2.0 * s.length)?);
    let cutoffs: Vec<usize> = [8, 4, 2, 1].iter().map(|k| (s.n_max / k).max(1)).collect();
    let vals = cutoffs
        .iter()
        .map(|&n| Ok(anomaly(&g1, &g2, s.m, Truncation::new(n)?)?.log_f.abs()))
        .collect::<Result<Vec<f64>>>()?;
    let rising = vals.windows(2).filter(|w| w[1] >= w[0] && w[0] > 0.0).count();
    let top = anomaly(&g1, &g2, s.m, s.trunc()?)?;
    let p = |ch: Check| ch.param("n_max", s.n_max).param("m", s.m).param("R", s.radius).param("L1", s.length).param("L2", 2.0 * s.length);
    Ok(vec![
        p(Check::new("anomaly_size", "multiplicative anomaly of the boundary operators", top.log_f.abs(), 1e-6, "zeta")),
        p(Check::new("anomaly_monotone", "anomaly decreases with the cutoff", rising as f64, 0.0, "zeta").param("cutoffs", cutoffs.clone())),
        p(Check::new("anomaly_direct", "anomaly from regularized determinants", (top.log_f - top.log_f_direct).abs(), 1e-8, "zeta")),
    ])
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn wick_test(s: &Settings) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut mismatches = 0usize;
    for deg in 0..=8usize {
        for _ in 0..4 {
            let a: Vec<BigRational> = (0..=deg).map(|_| q(rng.random_range(-9..10), rng.random_range(1..7))).collect();
            let c_old = q(rng.random_range(0..12), rng.random_range(1..5));
            let c_new = q(rng.random_range(0..12), rng.random_range(1..5));
            let mut mono = vec![BigRational::zero(); deg + 1];
            for (k, ak) in a.iter().enumerate() {
                for (i, h) in hermite_wick_exact(k, &c_old)?.iter().enumerate() {
                    mono[i] += ak * h;
                }
            }
            let mut brute = vec![BigRational::zero(); deg + 1];
            for k in (0..=deg).rev() {
                let lead = mono[k].clone();
                for (i, h) in hermite_wick_exact(k, &c_new)?.iter().enumerate() {
                    mono[i] -= &lead * h;
                }
                brute[k] = lead;
            }
            mismatches += usize::from(brute != wick_reorder_exact(&a, &(&c_new - &c_old))?);
        }
    }
    let c = q(5, 4);
    let mut ortho = 0usize;
    for i in 0..=8usize {
        for j in 0..=8usize {
            let e = gaussian_expectation_exact(&poly_mul_exact(&hermite_wick_exact(i, &c)?, &hermite_wick_exact(j, &c)?), &c);
            let expect = if i == j {
                let f = (1..=i).fold(BigInt::one(), |a, k| a * BigInt::from(k));
                BigRational::from_integer(f) * (0..i).fold(BigRational::one(), |a, _| a * &c)
            } else {
                BigRational::zero()
            };
            ortho += usize::from(e != expect);
        }
    }
    let tp = TorusParams::new(s.m, s.radius, s.length)?;
    let cut = SpectralCutoff::square(s.n_max.max(32));
    let split = covariance_split(&tp, cut)?;
    let images = smooth_covariance_images(&tp);
    Ok(vec![
        Check::new("wick_reorder", "change of Wick ordering constant", mismatches as f64, 0.0, "exact").param("max_degree", 8),
        Check::new("wick_orthogonality", "orthogonality of Wick powers", ortho as f64, 0.0, "exact").param("max_degree", 8),
        Check::new("covariance_split", "smooth part of the covariance against images", (split.c_f - images).abs(), 1e-4, "truncated")
            .param("cutoff", cut.tag())
            .param("c_N", split.c_n)
            .param("eps_N", split.eps_n)
            .param("C_f", split.c_f),
    ])
}

pub fn sew_free(s: &Settings) -> Result<Vec<Check>> {
    let (t, reg) = (s.trunc()?, s.regime()?);
    let a1 = amplitude_free(&s.cyl(s.l1)?, s.m, t, reg)?;
    let a2 = amplitude_free(&s.cyl(s.l2)?, s.m, t, reg)?;
    let a3 = amplitude_free(&s.cyl(s.l1 + s.l2)?, s.m, t, reg)?;
    let (k, p) = amplitude_residuals(&sew(&a2, &a1)?, &a3)?;
    let pm = |ch: Check| ch.param("n_max", s.n_max).param("m", s.m).param("R", s.radius).param("L1", s.l1).param("L2", s.l2);
    Ok(vec![
        pm(Check::new("sew_kernel", "free sewing of cylinder amplitudes", k, 1e-10, s.label())),
        pm(Check::new("sew_prefactor", "free sewing of determinant prefactors", p / a3.log_prefactor.abs().max(1.0), s.regime_tolerance(), s.label())),
    ])
}

pub fn trace_check(s: &Settings) -> Result<Vec<Check>> {
    let (t, reg) = (s.trunc()?, s.regime()?);
    let a = amplitude_free(&s.cyl(s.length)?, s.m, t, reg)?;
    let lhs = trace_amplitude(&a)?.log_value;
    let rhs = torus_partition(s.m, s.radius, s.length, t, reg)?.log_value;
    Ok(vec![Check::new("trace_identity", "trace of a cylinder amplitude is the torus partition", (lhs - rhs).abs() / rhs.abs().max(1.0), s.regime_tolerance(), s.label())
        .param("n_max", s.n_max)
        .param("m", s.m)
        .param("R", s.radius)
        .param("L", s.length)
        .param("log_trace", lhs)
        .param("log_torus", rhs)])
}

pub fn disintegrate(s: &Settings) -> Result<Vec<Check>> {
    let t = s.trunc()?;
    let intervals = segal_core::lattice::steps(s.length, s.h)?;
    let d = disintegration_check(&s.cyl(s.length)?, s.m, t, intervals, s.seed)?;
    let f = fourier_identity(&s.cyl(s.l1)?, &s.cyl(s.l2)?, s.m, t, s.h, 20, s.seed)?;
    let p = |ch: Check| ch.param("n_max", s.n_max).param("m", s.m).param("R", s.radius).param("h", s.h);
    Ok(vec![
        p(Check::new("conditional_mean", "conditional mean is the Helmholtz extension", d.mean_residual, 1e-10, "truncated")),
        p(Check::new("conditional_covariance", "conditional covariance is the Dirichlet Green's matrix", d.covariance_residual, 1e-10, "truncated")),
        p(Check::new("boundary_marginal", "boundary marginal precision is the doubled boundary operator", d.marginal_residual, 1e-10, "truncated")),
        p(Check::new("fourier_side", "characteristic functional of the glued double", f.max_residual, 1e-9, "truncated").param("covectors", 20)),
    ])
}

pub fn mc_torus(s: &Settings) -> Result<Vec<Check>> {
    let mut cfg = MCConfig::quartic(s.m, s.radius, s.length, s.lambda, s.mc_cutoff, s.samples, s.seed);
    if s.regime == RegimeArg::Zeta {
        zeta::validate_oracle()?;
        cfg.prefactor = segal_core::interacting::PrefactorRegime::Zeta;
    }
    let r1 = mc_partition(&cfg)?;
    let r2 = mc_partition(&cfg.doubled())?;
    let f = sample_gff_torus(&cfg, s.seed)?;
    let p = interaction(&cfg)?;
    let dt = s.length / f.rows as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
    let mut loc: f64 = 0.0;
    for pieces in [2usize, 3] {
        let cuts: Vec<f64> = (0..pieces).map(|_| rng.random_range(0..f.rows) as f64 * dt).collect();
        let l = locality_check(&f, &p, s.length, &cuts)?;
        loc = loc.max(l.residual / l.ulp_bound);
    }
    let z = |e: segal_core::interacting::Estimate| (e.mean / e.std_error).abs();
    let joint = r1.weight.std_error.hypot(r2.weight.std_error);
    let pm = |ch: Check| {
        ch.param("m", s.m)
            .param("R", s.radius)
            .param("L", s.length)
            .param("lambda", s.lambda)
            .param("samples", s.samples)
            .param("seed", s.seed)
            .param("cutoff", r1.cutoff_tag.clone())
    };
    let label = match cfg.prefactor {
        segal_core::interacting::PrefactorRegime::Spectral => "truncated",
        segal_core::interacting::PrefactorRegime::Zeta => "zeta",
    };
    Ok(vec![
        pm(Check::new("mc_wick2_mean", "Wick square has mean zero (in standard errors)", z(r1.wick2), 3.0, label)),
        pm(Check::new("mc_wick4_mean", "Wick quartic has mean zero (in standard errors)", z(r1.wick4), 3.0, label)),
        pm(Check::new("mc_jensen", "weight average is at least one (in standard errors)", ((1.0 - r1.weight.mean) / r1.weight.std_error).max(0.0), 3.0, label)
            .param("weight", r1.weight.mean)
            .param("std_error", r1.weight.std_error)
            .param("log_partition", r1.log_partition)),
        pm(Check::new("mc_cutoff_stability", "weight average under cutoff doubling (in standard errors)", (r1.weight.mean - r2.weight.mean).abs() / joint, 3.0, label)
            .param("weight_doubled", r2.weight.mean)
            .param("cutoff_doubled", r2.cutoff_tag.clone())),
        pm(Check::new("mc_chain_mixing", "chains agree with the pooled mean", (r1.flagged_chains.len() + r2.flagged_chains.len()) as f64, 0.0, label)),
        pm(Check::new("mc_locality", "interaction is additive over cylinders (in accumulation bounds)", loc, 1.0, label)),
    ])
}

pub fn suite(s: &Settings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for f in [zeta_oracle, kakutani, dtn_verify, det_glue, anomaly_check, wick_test, sew_free, trace_check, disintegrate, mc_torus] {
        out.extend(f(s)?);
    }
    Ok(out)
}
