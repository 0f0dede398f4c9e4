//! Gaussian mean estimation: `Z_i ~ N(mu, sigma^2)`, `W` the sample mean,
//! squared loss. Closed forms, the column-conditioned mixture, and Monte
//! Carlo evaluation of the ICIMI and strengthened CMI/CIMI bounds.

use std::f64::consts::{LN_2, LOG2_E, PI};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundName, BoundReport, EvalMethod, Flags, Variant};
use crate::cgf::{inverse_fenchel, subgaussian_inverse_conjugate, CgfCurve, CgfKind, DEFAULT_TOL};
use crate::error::{domain, Error, Result};
use crate::info::{mixed_gaussian_mi, DEFAULT_QUAD_TOL};
use crate::model::{monte_carlo, GaussianProblem, McEstimate};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCaseConfig {
    pub sigma2: f64,
    pub mu: f64,
    pub n: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub quad_tol: f64,
}

impl GaussianCaseConfig {
    /// Defaults: `mu = 0`, 100000 draws, seed 0, quadrature tolerance 1e-10.
    pub fn new(sigma2: f64, n: usize) -> Result<Self> {
        let cfg = Self {
            sigma2,
            mu: 0.0,
            n,
            mc_samples: 100_000,
            seed: 0,
            quad_tol: DEFAULT_QUAD_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mc(mut self, mc_samples: usize, seed: u64) -> Self {
        self.mc_samples = mc_samples;
        self.seed = seed;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return domain(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !self.mu.is_finite() {
            return domain("mu must be finite");
        }
        if self.n == 0 {
            return domain("n must be at least 1");
        }
        if !(self.quad_tol > 0.0) {
            return domain("quadrature tolerance must be positive");
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn problem(&self) -> Result<GaussianProblem> {
        GaussianProblem::new(self.mu, self.sigma2, self.n)
    }

    fn require_n2(&self) -> Result<()> {
        self.validate()?;
        if self.n < 2 {
            return domain("this quantity needs n >= 2");
        }
        Ok(())
    }
}

/// Law of `W` given `Z_i^+- = (z_minus, z_plus)`: an equal mixture of two
/// Gaussians, one per value of `R_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMixture {
    /// Component means for `R_i = +1` and `R_i = -1`.
    pub means: (f64, f64),
    pub variance: f64,
    pub weights: (f64, f64),
}

impl ConditionalMixture {
    pub fn for_column(z_minus: f64, z_plus: f64, cfg: &GaussianCaseConfig) -> Result<Self> {
        cfg.require_n2()?;
        let n = cfg.n as f64;
        let shift = (n - 1.0) * cfg.mu / n;
        Ok(Self {
            means: (z_plus / n + shift, z_minus / n + shift),
            variance: (n - 1.0) * cfg.sigma2 / (n * n),
            weights: (0.5, 0.5),
        })
    }
}

/// `(I(W; Z_i), sub-Gaussian IMI bound)`. The information term is
/// `0.5 ln(n / (n - 1))`; the bound uses that `-l(W~, Z~)` is sub-Gaussian
/// with variance `2 c^2`, `c = sigma^2 (n + 1) / n`.
pub fn imi_gaussian(cfg: &GaussianCaseConfig) -> Result<(f64, f64)> {
    cfg.require_n2()?;
    let n = cfg.n as f64;
    let info = 0.5 * (n / (n - 1.0)).ln();
    let c = cfg.sigma2 * (n + 1.0) / n;
    Ok((info, subgaussian_inverse_conjugate(2.0 * c * c, info)?))
}

/// `I_{Z_i^+-}(W; R_i)` at `Z_i^+- = (z_minus, z_plus)`.
pub fn icimi_info_term(z_minus: f64, z_plus: f64, cfg: &GaussianCaseConfig) -> Result<f64> {
    let mix = ConditionalMixture::for_column(z_minus, z_plus, cfg)?;
    let nu = 0.5 * (mix.means.0 - mix.means.1);
    mixed_gaussian_mi(nu, mix.variance, cfg.quad_tol)
}

/// Analytic upper bound on `Psi*^-1_{G~_i | Z_i^+- = z}(eta)` for `mu = 0`.
pub fn lemma_conjugate_bound(z_minus: f64, z_plus: f64, n: usize, sigma2: f64, eta: f64) -> Result<f64> {
    if eta.is_nan() || eta < 0.0 {
        return domain(format!("information argument must be nonnegative, got {eta}"));
    }
    if n == 0 || !(sigma2 > 0.0) {
        return domain("need n >= 1 and sigma2 > 0");
    }
    let nf = n as f64;
    let m = z_plus.powi(2).max(z_minus.powi(2));
    let tail = 4.0 * m / nf;
    if z_plus == z_minus {
        return Ok(tail);
    }
    if z_plus.abs() == z_minus.abs() {
        return Ok(4.0 * sigma2.sqrt() * (2.0 * eta / nf).sqrt() * z_plus.abs() + tail);
    }
    let d = (z_plus.powi(2) - z_minus.powi(2)).abs();
    let root = (2.0 * eta).sqrt();
    Ok(d * root + 2.0 * sigma2 * (z_plus - z_minus).powi(2) * root / (nf * d) + tail)
}

/// Exact CGF of `G~_i = R~ (l(W~, z_minus) - l(W~, z_plus))` given the column:
/// a four-component Gaussian mixture.
pub fn icimi_column_cgf(z_minus: f64, z_plus: f64, cfg: &GaussianCaseConfig) -> Result<CgfCurve> {
    let mix = ConditionalMixture::for_column(z_minus, z_plus, cfg)?;
    let a = z_minus * z_minus - z_plus * z_plus;
    let b = 2.0 * (z_plus - z_minus);
    let mut means = Vec::with_capacity(4);
    for m in [mix.means.0, mix.means.1] {
        let g = a + b * m;
        means.push(g);
        means.push(-g);
    }
    CgfCurve::gaussian_mixture(&[0.25; 4], &means, &[b * b * mix.variance; 4])
}

/// `min(B, exact inversion)` for one column, with `eta` the sample-conditioned
/// information of that column.
pub fn icimi_column_value(z_minus: f64, z_plus: f64, cfg: &GaussianCaseConfig) -> Result<f64> {
    let eta = icimi_info_term(z_minus, z_plus, cfg)?;
    let exact = inverse_fenchel(&icimi_column_cgf(z_minus, z_plus, cfg)?, eta, DEFAULT_TOL)?.value;
    let lemma = lemma_conjugate_bound(z_minus - cfg.mu, z_plus - cfg.mu, cfg.n, cfg.sigma2, eta)?;
    Ok(exact.min(lemma))
}

/// Monte Carlo ICIMI bound: `E[min(B, exact inversion)]` over `Z_i^+-`. All
/// indices contribute the same term, so one column suffices.
pub fn icimi_gaussian(cfg: &GaussianCaseConfig) -> Result<BoundReport> {
    cfg.require_n2()?;
    let normal = Normal::new(cfg.mu, cfg.sigma()).map_err(|e| Error::Domain(e.to_string()))?;
    let est = monte_carlo(cfg.seed, cfg.mc_samples, |rng, count| {
        let mut sum = 0.0;
        for _ in 0..count {
            let zm = normal.sample(rng);
            let zp = normal.sample(rng);
            sum += icimi_column_value(zm, zp, cfg)?;
        }
        Ok(sum)
    })?;
    let n = cfg.n as f64;
    let info = 0.5 / (n - 1.0) * 0.5;
    Ok(BoundReport {
        name: BoundName::Icimi,
        variant: Variant::SampleConditioned,
        value: est.mean,
        info_terms: vec![info; cfg.n],
        conjugate_kind: CgfKind::GaussianMixture,
        method: EvalMethod::MonteCarlo,
        std_error: est.std_error,
        n: cfg.n,
        flags: Flags::default(),
        note: Some("info_terms hold the leading-order mean of I_{Z_i}(W; R_i)".into()),
    })
}

/// `sigma^2 / (pi sqrt(log2 e))`.
pub fn strengthened_floor(sigma2: f64) -> f64 {
    sigma2 / (PI * LOG2_E.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrengthenedCheck {
    pub cmi: McEstimate,
    pub cimi: McEstimate,
    pub floor: f64,
}

/// The `2^n` candidate hypotheses `W(r)` of a table, indexed like selector
/// codes (bit `n - 1 - i` set when `R_i = +1`).
pub fn subset_averages(table: &[[f64; 2]]) -> Vec<f64> {
    let n = table.len();
    (0..1usize << n)
        .map(|r| {
            table
                .iter()
                .enumerate()
                .map(|(i, col)| col[(r >> (n - 1 - i)) & 1])
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn all_distinct(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] != w[1])
}

fn draw_table(rng: &mut StreamRng, normal: &Normal<f64>, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [normal.sample(rng), normal.sample(rng)]).collect()
}

/// Strengthened CMI and CIMI values for one table, with the information terms
/// `n ln 2` and `ln 2` (the selectors are recoverable from `W` and the table).
pub fn strengthened_table_values(table: &[[f64; 2]], tol: f64) -> Result<(f64, f64)> {
    let n = table.len();
    if n == 1 {
        let d = (table[0][0] - table[0][1]).powi(2);
        let v = inverse_fenchel(&CgfCurve::ln_cosh(d)?, LN_2, tol)?.value;
        return Ok((v, v));
    }
    let ws = subset_averages(table);
    if !all_distinct(&ws) {
        return Err(Error::Invariant("two selector patterns give the same hypothesis".into()));
    }
    let loss = GaussianProblem::loss;
    let diffs: Vec<Vec<f64>> = ws
        .iter()
        .map(|&w| table.iter().map(|c| loss(w, c[0]) - loss(w, c[1])).collect())
        .collect();
    let weights = vec![1.0; ws.len()];
    let nf = n as f64;
    let scaled: Vec<Vec<f64>> = diffs.iter().map(|d| d.iter().map(|x| x / nf).collect()).collect();
    let cmi = inverse_fenchel(&CgfCurve::rademacher_mixture(&weights, scaled)?, nf * LN_2, tol)?.value;
    let mut cimi = 0.0;
    for i in 0..n {
        let single: Vec<Vec<f64>> = diffs.iter().map(|d| vec![d[i]]).collect();
        cimi += inverse_fenchel(&CgfCurve::rademacher_mixture(&weights, single)?, LN_2, tol)?.value;
    }
    Ok((cmi, cimi / nf))
}

/// Monte Carlo estimates of the strengthened CMI and CIMI bounds and the
/// constant they cannot go below.
pub fn strengthened_lower_check(cfg: &GaussianCaseConfig) -> Result<StrengthenedCheck> {
    cfg.validate()?;
    if cfg.n > 20 {
        return domain("the strengthened bounds enumerate 2^n hypotheses; n <= 20 required");
    }
    let normal = Normal::new(cfg.mu, cfg.sigma()).map_err(|e| Error::Domain(e.to_string()))?;
    // one pass per estimate keeps the two on the same tables
    let run = |pick: usize| {
        monte_carlo(cfg.seed, cfg.mc_samples, |rng, count| {
            let mut sum = 0.0;
            for _ in 0..count {
                let table = draw_table(rng, &normal, cfg.n);
                let (cmi, cimi) = strengthened_table_values(&table, DEFAULT_TOL)?;
                sum += if pick == 0 { cmi } else { cimi };
            }
            Ok(sum)
        })
    };
    let cmi = run(0)?;
    let cimi = if cfg.n == 1 { cmi } else { run(1)? };
    Ok(StrengthenedCheck {
        cmi,
        cimi,
        floor: strengthened_floor(cfg.sigma2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInfoConstants {
    /// `I(W; R_[n] | Z^+-_[n])` in nats.
    pub full: f64,
    /// `I_{Z^+-_[n]}(W; R_i)` in nats.
    pub per_i: f64,
    pub tables_checked: usize,
}

/// Certifies on `tables` sampled supersamples that the `2^n` candidate
/// hypotheses are pairwise distinct, so that `R_[n]` is a function of
/// `(W, Z^+-)` and the information terms equal `n ln 2` and `ln 2`.
pub fn gaussian_info_constants(cfg: &GaussianCaseConfig, tables: usize) -> Result<GaussianInfoConstants> {
    cfg.validate()?;
    if cfg.n > 20 {
        return domain("distinctness check limited to n <= 20");
    }
    let normal = Normal::new(cfg.mu, cfg.sigma()).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = crate::rng::master(cfg.seed);
    for k in 0..tables {
        let table = draw_table(&mut rng, &normal, cfg.n);
        if !all_distinct(&subset_averages(&table)) {
            return Err(Error::Invariant(format!(
                "table {k} (seed {}) has two selector patterns with equal averages",
                cfg.seed
            )));
        }
    }
    Ok(GaussianInfoConstants {
        full: cfg.n as f64 * LN_2,
        per_i: LN_2,
        tables_checked: tables,
    })
}

/// Monte Carlo estimate of `I(W; Z_1)` as the mean log density ratio
/// `ln p(W | Z_1) - ln p(W)`.
pub fn imi_info_monte_carlo(cfg: &GaussianCaseConfig) -> Result<McEstimate> {
    cfg.require_n2()?;
    let n = cfg.n as f64;
    let normal = Normal::new(cfg.mu, cfg.sigma()).map_err(|e| Error::Domain(e.to_string()))?;
    let var_w = cfg.sigma2 / n;
    let var_cond = (n - 1.0) * cfg.sigma2 / (n * n);
    let log_density = |x: f64, mean: f64, var: f64| -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var);
    monte_carlo(cfg.seed, cfg.mc_samples, |rng, count| {
        let mut sum = 0.0;
        let mut z = vec![0.0; cfg.n];
        for _ in 0..count {
            for zi in z.iter_mut() {
                *zi = normal.sample(rng);
            }
            let w = GaussianProblem::learner(&z);
            let cond_mean = z[0] / n + (n - 1.0) * cfg.mu / n;
            sum += log_density(w, cond_mean, var_cond) - log_density(w, cfg.mu, var_w);
        }
        Ok(sum)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn imi_examples() {
        let (info, _) = imi_gaussian(&GaussianCaseConfig::new(1.0, 2).unwrap()).unwrap();
        assert!((info - 0.346_574).abs() < 1e-6);
        let (big, _) = imi_gaussian(&GaussianCaseConfig::new(1.0, 1_000_000).unwrap()).unwrap();
        assert!((big * 999_999.0 - 0.5).abs() < 1e-6);
        let (_, b) = imi_gaussian(&GaussianCaseConfig::new(1.0, 100).unwrap()).unwrap();
        let closed = (2.0 * (101.0f64 / 100.0).powi(2) * (100.0f64 / 99.0).ln()).sqrt();
        assert!((b - closed).abs() < 1e-14);
        assert!(imi_gaussian(&GaussianCaseConfig::new(1.0, 1).unwrap()).is_err());
    }

    #[test]
    fn icimi_info_examples() {
        let cfg = GaussianCaseConfig::new(1.0, 10_000).unwrap();
        assert_eq!(icimi_info_term(0.7, 0.7, &cfg).unwrap(), 0.0);
        let v = icimi_info_term(-1.0, 1.0, &cfg).unwrap();
        let lead = 4.0 / (8.0 * 9999.0);
        assert!((v / lead - 1.0).abs() < 0.05, "{v} vs {lead}");
        let mut r = rng::master(31);
        let small = GaussianCaseConfig::new(0.3, 2).unwrap();
        for _ in 0..50 {
            let (a, b) = (r.random_range(-20.0..20.0), r.random_range(-20.0..20.0));
            assert!(icimi_info_term(a, b, &small).unwrap() <= LN_2 + 1e-12);
        }
    }

    #[test]
    fn icimi_info_decreases_with_n() {
        let mut prev = f64::INFINITY;
        for n in [2, 3, 5, 10, 30, 100, 1000, 10_000] {
            let v = icimi_info_term(-0.4, 1.3, &GaussianCaseConfig::new(1.0, n).unwrap()).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn lemma_bound_examples() {
        assert_eq!(lemma_conjugate_bound(1.0, 2.0, 5, 1.0, 0.0).unwrap(), 4.0 * 4.0 / 5.0);
        assert_eq!(lemma_conjugate_bound(1.5, 1.5, 5, 1.0, 0.3).unwrap(), 4.0 * 2.25 / 5.0);
        let sym = lemma_conjugate_bound(-1.0, 1.0, 4, 4.0, 0.5).unwrap();
        assert!((sym - (4.0 * 2.0 * (1.0f64 / 4.0).sqrt() + 1.0)).abs() < 1e-15);
        assert!(lemma_conjugate_bound(1.0, 2.0, 5, 1.0, -0.1).is_err());
    }

    #[test]
    fn column_cgf_matches_sampled_law() {
        let cfg = GaussianCaseConfig::new(1.3, 4).unwrap();
        let (zm, zp) = (-0.8, 1.1);
        let curve = icimi_column_cgf(zm, zp, &cfg).unwrap();
        let mix = ConditionalMixture::for_column(zm, zp, &cfg).unwrap();
        let mut r = rng::master(32);
        let m = 400_000;
        let draws: Vec<f64> = (0..m)
            .map(|_| {
                let comp = if r.random::<bool>() { mix.means.0 } else { mix.means.1 };
                let w = comp + mix.variance.sqrt() * { let s: f64 = StandardNormal.sample(&mut r); s };
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                sign * (GaussianProblem::loss(w, zm) - GaussianProblem::loss(w, zp))
            })
            .collect();
        let emp = CgfCurve::empirical(&draws).unwrap();
        for lambda in [0.1, 0.3, 0.6] {
            assert!((emp.eval(lambda) - curve.eval(lambda)).abs() < 0.02 * curve.eval(lambda).max(0.01));
        }
    }

    #[test]
    fn lemma_bound_dominates_exact_inversion() {
        let mut r = rng::master(33);
        for _ in 0..300 {
            let n = r.random_range(2..200);
            let sigma2 = r.random_range(0.2..3.0);
            let cfg = GaussianCaseConfig::new(sigma2, n).unwrap();
            let zm: f64 = r.random_range(-3.0..3.0);
            let zp: f64 = r.random_range(-3.0..3.0);
            let eta = r.random_range(0.0..0.7);
            let exact = inverse_fenchel(&icimi_column_cgf(zm, zp, &cfg).unwrap(), eta, 1e-11).unwrap().value;
            let b = lemma_conjugate_bound(zm, zp, n, sigma2, eta).unwrap();
            assert!(exact <= b + 1e-9, "n {n} z ({zm}, {zp}) eta {eta}: {exact} > {b}");
        }
    }

    #[test]
    fn sum_difference_moment() {
        // E[(Z1 - Z2)^2 |Z1 + Z2|] = 4 sigma^3 / sqrt(pi)
        let sigma: f64 = 1.5;
        let mut r = rng::master(34);
        let m = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..m {
            let a: f64 = sigma * { let s: f64 = StandardNormal.sample(&mut r); s };
            let b: f64 = sigma * { let s: f64 = StandardNormal.sample(&mut r); s };
            acc += (a - b).powi(2) * (a + b).abs();
        }
        let target = 4.0 * sigma.powi(3) / PI.sqrt();
        assert!((acc / m as f64 / target - 1.0).abs() < 0.01);
    }

    #[test]
    fn icimi_is_sound_and_translation_invariant() {
        let cfg = GaussianCaseConfig::new(1.0, 100).unwrap().with_mc(4_000, 5);
        let rep = icimi_gaussian(&cfg).unwrap();
        assert!(rep.value.is_finite() && rep.value >= 0.02);
        let shifted = icimi_gaussian(&cfg.with_mu(3.0)).unwrap();
        assert!((rep.value - shifted.value).abs() < 1e-6 * rep.value, "{} vs {}", rep.value, shifted.value);
    }

    #[test]
    fn strengthened_single_sample_branch() {
        let cfg = GaussianCaseConfig::new(1.0, 1).unwrap().with_mc(20_000, 6);
        let c = strengthened_lower_check(&cfg).unwrap();
        assert!((c.cmi.mean - 2.0).abs() < 4.0 * c.cmi.std_error + 1e-3);
        assert!(c.cmi.mean >= 1.0);
        assert!((strengthened_floor(1.0) - 0.265_01).abs() < 1e-5);
        let table = [[0.3, -1.2]];
        let (v, _) = strengthened_table_values(&table, 1e-11).unwrap();
        assert!((v - 1.5f64.powi(2)).abs() < 1e-10);
    }

    #[test]
    fn info_constants() {
        let c = gaussian_info_constants(&GaussianCaseConfig::new(1.0, 3).unwrap(), 100).unwrap();
        assert_eq!(c.full, 3.0 * LN_2);
        assert_eq!(c.per_i, LN_2);
        let duplicate = [[1.0, 1.0], [0.5, 2.0]];
        assert!(!all_distinct(&subset_averages(&duplicate)));
        assert!(matches!(strengthened_table_values(&duplicate, 1e-10), Err(Error::Invariant(_))));
    }
}
