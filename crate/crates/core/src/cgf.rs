//! Cumulant generating functions and the inverse of their Fenchel conjugate.
//!
//! A [`CgfCurve`] is always centered: `psi(0) = psi'(0) = 0`. The inverse
//! conjugate `inf_{lambda > 0} (eta + psi(lambda)) / lambda` is the map that
//! turns an information quantity (nats) into a bound on the loss scale.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::info::FiniteJoint;
use crate::model::FiniteDistribution;

/// `ln cosh x`, overflow-free.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Lower bound `min(1, |x|/2) |x|/2 <= ln cosh x`.
pub fn lncosh_lower(x: f64) -> f64 {
    let h = 0.5 * x.abs();
    h.min(1.0) * h
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CgfKind {
    ExactFinite,
    Empirical,
    ClosedFormSubgaussian,
    ClosedFormLncosh,
    GaussianMixture,
    Averaged,
}

/// An evaluable, centered CGF `lambda -> ln E[exp(lambda (F - E F))]`.
/// Every variant is finite on the whole real line.
#[derive(Debug, Clone, PartialEq)]
pub enum CgfCurve {
    /// Finite-support law: deviations from the mean and log-probabilities.
    ExactFinite { deviations: Vec<f64>, log_probs: Vec<f64> },
    /// Sample surrogate: deviations of the samples from their mean.
    Empirical { deviations: Vec<f64> },
    /// `variance * lambda^2 / 2`.
    SubGaussian { variance: f64 },
    /// `ln cosh(scale * lambda)`, the CGF of `scale * R` for Rademacher `R`.
    LnCosh { scale: f64 },
    /// Mixture of Rademacher sums: `ln sum_k w_k prod_j cosh(s_kj lambda)`.
    RademacherMixture { log_weights: Vec<f64>, scales: Vec<Vec<f64>> },
    /// Finite Gaussian mixture, component means stored as deviations from the
    /// mixture mean.
    GaussianMixture {
        log_weights: Vec<f64>,
        deviations: Vec<f64>,
        variances: Vec<f64>,
    },
    /// Weighted average of curves, `sum_u P(u) psi_u(lambda)`.
    Averaged { weights: Vec<f64>, parts: Vec<CgfCurve> },
}

fn positive_log_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return domain("mixture weights must be nonnegative");
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return domain("mixture weights sum to zero");
    }
    Ok(weights.iter().map(|w| (w / total).ln()).collect())
}

impl CgfCurve {
    /// CGF of a finite-support variable taking `values[i]` with `probs[i]`.
    pub fn exact_finite(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return domain("values and probabilities must have equal, nonzero length");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("non-finite value in a finite-support law");
        }
        let log_probs = positive_log_weights(probs)?;
        let total: f64 = probs.iter().sum();
        let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum::<f64>() / total;
        let (deviations, log_probs) = values
            .iter()
            .zip(log_probs)
            .filter(|(_, lp)| lp.is_finite())
            .map(|(v, lp)| (v - mean, lp))
            .unzip();
        Ok(Self::ExactFinite { deviations, log_probs })
    }

    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return domain("an empirical CGF needs at least two samples");
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return domain("non-finite sample");
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Self::Empirical {
            deviations: samples.iter().map(|s| s - mean).collect(),
        })
    }

    pub fn sub_gaussian(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return domain(format!("sub-Gaussian variance must be nonnegative, got {variance}"));
        }
        Ok(Self::SubGaussian { variance })
    }

    pub fn ln_cosh(scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return domain("non-finite ln cosh scale");
        }
        Ok(Self::LnCosh { scale: scale.abs() })
    }

    pub fn rademacher_mixture(weights: &[f64], scales: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != scales.len() || weights.is_empty() {
            return domain("one scale vector per mixture weight required");
        }
        if scales.iter().flatten().any(|s| !s.is_finite()) {
            return domain("non-finite Rademacher scale");
        }
        Ok(Self::RademacherMixture {
            log_weights: positive_log_weights(weights)?,
            scales,
        })
    }

    pub fn gaussian_mixture(weights: &[f64], means: &[f64], variances: &[f64]) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != variances.len() || weights.is_empty() {
            return domain("mixture arrays must have equal, nonzero length");
        }
        if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || means.iter().any(|m| !m.is_finite()) {
            return domain("invalid Gaussian mixture component");
        }
        let log_weights = positive_log_weights(weights)?;
        let mean: f64 = log_weights.iter().zip(means).map(|(lw, m)| lw.exp() * m).sum();
        Ok(Self::GaussianMixture {
            log_weights,
            deviations: means.iter().map(|m| m - mean).collect(),
            variances: variances.to_vec(),
        })
    }

    pub fn averaged(weights: &[f64], parts: Vec<CgfCurve>) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return domain("one weight per averaged curve required");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain("averaging weights must be nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return domain("averaging weights sum to zero");
        }
        Ok(Self::Averaged {
            weights: weights.iter().map(|w| w / total).collect(),
            parts,
        })
    }

    pub fn kind(&self) -> CgfKind {
        match self {
            Self::ExactFinite { .. } => CgfKind::ExactFinite,
            Self::Empirical { .. } => CgfKind::Empirical,
            Self::SubGaussian { .. } => CgfKind::ClosedFormSubgaussian,
            Self::LnCosh { .. } | Self::RademacherMixture { .. } => CgfKind::ClosedFormLncosh,
            Self::GaussianMixture { .. } => CgfKind::GaussianMixture,
            Self::Averaged { .. } => CgfKind::Averaged,
        }
    }

    /// Open interval on which the curve is finite.
    pub fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Self::ExactFinite { deviations, log_probs } => {
                log_sum_exp(log_probs.iter().zip(deviations).map(|(lp, d)| lp + lambda * d))
                    - log_sum_exp(log_probs.iter().copied())
            }
            Self::Empirical { deviations } => {
                let m = deviations.len() as f64;
                log_sum_exp(deviations.iter().map(|d| lambda * d)) - m.ln()
            }
            Self::SubGaussian { variance } => 0.5 * variance * lambda * lambda,
            Self::LnCosh { scale } => ln_cosh(scale * lambda),
            Self::RademacherMixture { log_weights, scales } => log_sum_exp(
                log_weights
                    .iter()
                    .zip(scales)
                    .map(|(lw, s)| lw + s.iter().map(|c| ln_cosh(c * lambda)).sum::<f64>()),
            ),
            Self::GaussianMixture {
                log_weights,
                deviations,
                variances,
            } => log_sum_exp(
                log_weights
                    .iter()
                    .zip(deviations)
                    .zip(variances)
                    .map(|((lw, d), v)| lw + lambda * d + 0.5 * v * lambda * lambda),
            ),
            Self::Averaged { weights, parts } => weights
                .iter()
                .zip(parts)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, c)| w * c.eval(lambda))
                .sum(),
        }
    }

    /// `lim psi(lambda) / lambda` as `lambda -> +inf`, i.e. the largest
    /// deviation above the mean; `None` when it is unbounded.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            Self::ExactFinite { deviations, .. } | Self::Empirical { deviations } => {
                Some(max(deviations).max(0.0))
            }
            Self::SubGaussian { variance } => (*variance == 0.0).then_some(0.0),
            Self::LnCosh { scale } => Some(*scale),
            Self::RademacherMixture { scales, .. } => Some(
                scales
                    .iter()
                    .map(|s| s.iter().map(|c| c.abs()).sum::<f64>())
                    .fold(0.0, f64::max),
            ),
            Self::GaussianMixture {
                log_weights,
                deviations,
                variances,
            } => {
                let live = log_weights.iter().zip(variances).filter(|(lw, _)| lw.is_finite());
                if live.clone().any(|(_, v)| *v > 0.0) {
                    None
                } else {
                    Some(max(deviations).max(0.0))
                }
            }
            Self::Averaged { weights, parts } => weights
                .iter()
                .zip(parts)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, c)| c.asymptotic_slope().map(|s| w * s))
                .sum(),
        }
    }

    /// CGF of `-F`: `lambda -> psi(-lambda)`.
    pub fn negated(&self) -> Self {
        match self {
            Self::ExactFinite { deviations, log_probs } => Self::ExactFinite {
                deviations: deviations.iter().map(|d| -d).collect(),
                log_probs: log_probs.clone(),
            },
            Self::Empirical { deviations } => Self::Empirical {
                deviations: deviations.iter().map(|d| -d).collect(),
            },
            Self::GaussianMixture {
                log_weights,
                deviations,
                variances,
            } => Self::GaussianMixture {
                log_weights: log_weights.clone(),
                deviations: deviations.iter().map(|d| -d).collect(),
                variances: variances.clone(),
            },
            Self::Averaged { weights, parts } => Self::Averaged {
                weights: weights.clone(),
                parts: parts.iter().map(Self::negated).collect(),
            },
            symmetric => symmetric.clone(),
        }
    }

    /// Largest `lambda > 0` at which an empirical curve keeps an effective
    /// sample size `(sum w)^2 / sum w^2` of at least [`MIN_EFFECTIVE_SAMPLES`]
    /// under the tilt `w_j = exp(lambda d_j)`. `None` for other kinds.
    pub fn trusted_lambda_max(&self) -> Option<f64> {
        let Self::Empirical { deviations } = self else {
            return None;
        };
        let ess = |lambda: f64| {
            let l1 = log_sum_exp(deviations.iter().map(|d| lambda * d));
            let l2 = log_sum_exp(deviations.iter().map(|d| 2.0 * lambda * d));
            (2.0 * l1 - l2).exp()
        };
        if ess(LAMBDA_MAX) >= MIN_EFFECTIVE_SAMPLES {
            return Some(LAMBDA_MAX);
        }
        if ess(LAMBDA_MIN) < MIN_EFFECTIVE_SAMPLES {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ess(mid.exp()) >= MIN_EFFECTIVE_SAMPLES {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo.exp())
    }
}

pub const MIN_EFFECTIVE_SAMPLES: f64 = 30.0;
pub const LAMBDA_MIN: f64 = 1e-12;
pub const LAMBDA_MAX: f64 = 1e12;
/// Default inversion tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// `psi_F(lambda)` for `F` taking `values[i]` with probability `dist[i]`.
pub fn cgf_exact(values: &[f64], dist: &FiniteDistribution, lambda: f64) -> Result<f64> {
    if values.len() != dist.len() {
        return domain("one value per atom required");
    }
    Ok(CgfCurve::exact_finite(values, dist.probs())?.eval(lambda))
}

/// Empirical CGF `ln mean exp(lambda (f_j - mean f))`.
pub fn cgf_empirical(samples: &[f64], lambda: f64) -> Result<f64> {
    Ok(CgfCurve::empirical(samples)?.eval(lambda))
}

/// Law of `F = f(X, Y, u)` under `P(x, y | U = u)` as a curve. `f` holds one
/// value per joint cell.
pub fn conditional_cgf(joint: &FiniteJoint, f: &[f64], u: usize) -> Result<CgfCurve> {
    if f.len() != joint.table().len() {
        return domain("function table does not match the joint cells");
    }
    let (dx, dy, du) = joint.dims();
    if u >= du {
        return domain(format!("conditioning value {u} out of range"));
    }
    let (_, cond) = joint
        .slice(u)
        .ok_or_else(|| Error::Domain(format!("P(U = {u}) = 0")))?;
    let values: Vec<f64> = (0..dx)
        .flat_map(|x| (0..dy).map(move |y| (x, y)))
        .map(|(x, y)| f[joint.index(x, y, u)])
        .collect();
    CgfCurve::exact_finite(&values, &cond)
}

/// `psi_{F|U}(lambda, u)`, centered at `E[F | U = u]`.
pub fn sample_conditioned_cgf(joint: &FiniteJoint, f: &[f64], u: usize, lambda: f64) -> Result<f64> {
    Ok(conditional_cgf(joint, f, u)?.eval(lambda))
}

/// Where the infimum over `lambda > 0` was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argmin {
    Finite(f64),
    /// Infimum approached as `lambda -> 0+` (happens exactly when `eta = 0`).
    ZeroLimit,
    /// Infimum approached as `lambda -> +inf`.
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateResult {
    pub value: f64,
    pub argmin: Argmin,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// False when the argmin lies where an empirical CGF is unreliable.
    pub trusted: bool,
}

/// `inf_{lambda > 0} (eta + psi(lambda)) / lambda`.
///
/// The objective is quasi-convex in `lambda`, so it is bracketed by geometric
/// steps in `ln lambda` starting from `lambda = 1` and then refined by golden
/// section. The returned value is the smallest objective value evaluated, so
/// it never undershoots the true infimum.
pub fn inverse_fenchel(cgf: &CgfCurve, eta: f64, tol: f64) -> Result<ConjugateResult> {
    if eta.is_nan() || eta < 0.0 {
        return domain(format!("information argument must be nonnegative, got {eta}"));
    }
    if !(tol > 0.0) {
        return domain("inversion tolerance must be positive");
    }
    if eta == f64::INFINITY {
        return Ok(ConjugateResult {
            value: f64::INFINITY,
            argmin: Argmin::ZeroLimit,
            iterations: 0,
            bracket: (LAMBDA_MIN, LAMBDA_MAX),
            trusted: true,
        });
    }
    if eta == 0.0 {
        return Ok(ConjugateResult {
            value: 0.0,
            argmin: Argmin::ZeroLimit,
            iterations: 0,
            bracket: (0.0, LAMBDA_MIN),
            trusted: true,
        });
    }

    let objective = |s: f64| {
        let lambda = s.exp();
        (eta + cgf.eval(lambda)) / lambda
    };
    let s_min = LAMBDA_MIN.ln();
    let s_max = LAMBDA_MAX.ln();
    let mut evals = 0usize;
    let mut best = (f64::INFINITY, 0.0);
    let mut eval = |s: f64| {
        let v = objective(s);
        evals += 1;
        if v < best.0 {
            best = (v, s);
        }
        v
    };

    let flat = |h: f64| 4.0 * f64::EPSILON * h.abs();
    // bracket: find a < b < c with h(b) <= h(a), h(b) <= h(c)
    let mut step = 0.5;
    let (mut a, mut b) = (0.0, step);
    let (mut ha, mut hb) = (eval(a), eval(b));
    if !ha.is_finite() || !hb.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite conjugate objective near lambda = 1 (eta = {eta})"
        )));
    }
    if hb > ha {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut ha, &mut hb);
    }
    let direction = if b > a { 1.0 } else { -1.0 };
    let c;
    loop {
        step *= 1.618;
        let next = b + direction * step;
        if direction > 0.0 && next >= s_max {
            let h_end = eval(s_max);
            if h_end <= hb + flat(hb) {
                // still descending at the upper limit
                let value = match cgf.asymptotic_slope() {
                    Some(limit) => limit.min(h_end),
                    None => h_end,
                };
                return Ok(ConjugateResult {
                    value: value.min(best.0),
                    argmin: Argmin::Infinity,
                    iterations: evals,
                    bracket: (b.exp(), f64::INFINITY),
                    trusted: trust(cgf, LAMBDA_MAX),
                });
            }
            c = s_max;
            break;
        }
        if direction < 0.0 && next <= s_min {
            let h_end = eval(s_min);
            if h_end <= hb {
                return Err(Error::Numeric(format!(
                    "conjugate objective still decreasing at lambda = {LAMBDA_MIN:e} (eta = {eta}, kind {:?})",
                    cgf.kind()
                )));
            }
            c = s_min;
            break;
        }
        let hn = eval(next);
        if !hn.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite conjugate objective at lambda = {:e}",
                next.exp()
            )));
        }
        if hn > hb + flat(hb) {
            c = next;
            break;
        }
        a = b;
        b = next;
        hb = hn;
    }

    // golden section on [lo, hi]
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let bracket = (lo.exp(), hi.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let width_tol = (0.1 * tol.sqrt()).max(1e-12);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    let mut iterations = 0;
    while hi - lo > width_tol && iterations < 300 {
        iterations += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2);
        }
    }
    let (value, s_best) = best;
    let lambda = s_best.exp();
    Ok(ConjugateResult {
        value,
        argmin: Argmin::Finite(lambda),
        iterations: evals,
        bracket,
        trusted: trust(cgf, lambda),
    })
}

fn trust(cgf: &CgfCurve, lambda: f64) -> bool {
    cgf.trusted_lambda_max().is_none_or(|max| lambda <= max)
}

/// `sqrt(2 variance eta)`, the inverse conjugate of a quadratic CGF.
pub fn subgaussian_inverse_conjugate(variance: f64, eta: f64) -> Result<f64> {
    if !(variance >= 0.0) || eta.is_nan() || eta < 0.0 {
        return domain("variance and information must be nonnegative");
    }
    Ok((2.0 * variance * eta).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    const TOL: f64 = 1e-11;

    fn random_law(rng: &mut impl Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        (values, raw.into_iter().map(|r| r / s).collect())
    }

    #[test]
    fn ln_cosh_is_stable() {
        assert_eq!(ln_cosh(0.0), 0.0);
        assert!((ln_cosh(1.0) - 1f64.cosh().ln()).abs() < 1e-15);
        assert!((ln_cosh(-3.0) - 3f64.cosh().ln()).abs() < 1e-14);
        assert!((ln_cosh(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn lncosh_lower_examples() {
        assert_eq!(lncosh_lower(0.0), 0.0);
        assert_eq!(lncosh_lower(2.0), 1.0);
        assert!(ln_cosh(2.0) > 1.32 && ln_cosh(2.0) < 1.33);
        assert_eq!(lncosh_lower(-1.0), 0.25);
    }

    #[test]
    fn cgf_exact_examples() {
        let d = FiniteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(cgf_exact(&[1.0, -2.0, 3.0], &d, 0.0).unwrap(), 0.0);
        let half = FiniteDistribution::uniform(2).unwrap();
        for &lambda in &[-2.0, 0.3, 5.0] {
            let c = 1.7;
            let got = cgf_exact(&[-c, c], &half, lambda).unwrap();
            assert!((got - ln_cosh(c * lambda)).abs() < 1e-14);
        }
    }

    #[test]
    fn cgf_exact_matches_direct_summation() {
        let mut r = rng::master(10);
        for _ in 0..30 {
            let (v, p) = random_law(&mut r, 5);
            let mean: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
            let direct = v
                .iter()
                .zip(&p)
                .map(|(a, b)| b * (0.7 * (a - mean)).exp())
                .sum::<f64>()
                .ln();
            let got = cgf_exact(&v, &FiniteDistribution::new(p).unwrap(), 0.7).unwrap();
            assert!((got - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn cgf_empirical_examples() {
        for &lambda in &[0.0, 1.0, 9.0] {
            assert_eq!(cgf_empirical(&[2.5; 10], lambda).unwrap(), 0.0);
        }
        assert!((cgf_empirical(&[-1.0, 1.0], 1.0).unwrap() - 0.433_781).abs() < 1e-6);
        assert!(cgf_empirical(&[1.0], 1.0).is_err());
    }

    #[test]
    fn cgf_empirical_standard_normal() {
        let mut r = rng::master(11);
        let samples: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut r)).collect();
        assert!((cgf_empirical(&samples, 0.5).unwrap() - 0.125).abs() < 1e-2);
    }

    #[test]
    fn cgf_empirical_converges_to_exact() {
        let (v, p) = (vec![-1.0, 0.5, 2.0], vec![0.3, 0.5, 0.2]);
        let d = FiniteDistribution::new(p).unwrap();
        let exact = cgf_exact(&v, &d, 0.8).unwrap();
        let err = |m: usize, seed: u64| {
            let mut r = rng::master(seed);
            let s: Vec<f64> = (0..m).map(|_| v[d.sample(&mut r)]).collect();
            (cgf_empirical(&s, 0.8).unwrap() - exact).abs()
        };
        // average over replicates to compare typical errors
        let small: f64 = (0..20).map(|k| err(1_000, k)).sum::<f64>() / 20.0;
        let large: f64 = (0..20).map(|k| err(100_000, 100 + k)).sum::<f64>() / 20.0;
        assert!(large < small / 3.0, "{large} vs {small}");
    }

    #[test]
    fn curves_are_centered_and_convex() {
        let mut r = rng::master(12);
        let (v, p) = random_law(&mut r, 6);
        let curves = vec![
            CgfCurve::exact_finite(&v, &p).unwrap(),
            CgfCurve::empirical(&v).unwrap(),
            CgfCurve::sub_gaussian(0.7).unwrap(),
            CgfCurve::ln_cosh(1.3).unwrap(),
            CgfCurve::rademacher_mixture(&[0.3, 0.7], vec![vec![0.5, 1.0], vec![2.0]]).unwrap(),
            CgfCurve::gaussian_mixture(&[0.5, 0.5], &[-1.0, 2.0], &[0.1, 0.4]).unwrap(),
        ];
        for c in &curves {
            assert!(c.eval(0.0).abs() < 1e-15, "{:?}", c.kind());
            let h = 1e-5;
            let d0 = (c.eval(h) - c.eval(-h)) / (2.0 * h);
            assert!(d0.abs() < 1e-8, "{:?}: psi'(0) = {d0}", c.kind());
            for k in -20..20 {
                let (x, y) = (k as f64 * 0.3, k as f64 * 0.3 + 0.7);
                assert!(c.eval(0.5 * (x + y)) <= 0.5 * (c.eval(x) + c.eval(y)) + 1e-12);
            }
        }
    }

    #[test]
    fn inverse_fenchel_subgaussian_closed_form() {
        let mut r = rng::master(13);
        for _ in 0..100 {
            let var = r.random_range(0.01..10.0);
            let eta = r.random_range(0.0..5.0);
            let curve = CgfCurve::sub_gaussian(var).unwrap();
            let res = inverse_fenchel(&curve, eta, DEFAULT_TOL).unwrap();
            let exact = subgaussian_inverse_conjugate(var, eta).unwrap();
            assert!((res.value - exact).abs() < 1e-10, "{} vs {exact}", res.value);
        }
        assert!((subgaussian_inverse_conjugate(0.5, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(subgaussian_inverse_conjugate(3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_fenchel_zero_and_infinite_information() {
        let curve = CgfCurve::ln_cosh(2.0).unwrap();
        let zero = inverse_fenchel(&curve, 0.0, DEFAULT_TOL).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.argmin, Argmin::ZeroLimit);
        assert_eq!(inverse_fenchel(&curve, f64::INFINITY, DEFAULT_TOL).unwrap().value, f64::INFINITY);
        assert!(inverse_fenchel(&curve, -1.0, DEFAULT_TOL).is_err());
    }

    #[test]
    fn inverse_fenchel_lncosh_matches_grid() {
        let c = 1.5;
        let eta = 0.25;
        let curve = CgfCurve::ln_cosh(c).unwrap();
        let res = inverse_fenchel(&curve, eta, DEFAULT_TOL).unwrap();
        let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
        let points = 1_000_000;
        let grid_min = (0..points)
            .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
            .map(|l| (eta + ln_cosh(c * l)) / l)
            .fold(f64::INFINITY, f64::min);
        assert!((res.value - grid_min).abs() < 1e-8, "{} vs {grid_min}", res.value);
    }

    #[test]
    fn inverse_fenchel_limit_at_infinity() {
        // ln cosh at eta >= ln 2: the infimum is the scale, approached as lambda grows
        let curve = CgfCurve::ln_cosh(0.8).unwrap();
        let res = inverse_fenchel(&curve, std::f64::consts::LN_2, DEFAULT_TOL).unwrap();
        assert_eq!(res.argmin, Argmin::Infinity);
        assert!((res.value - 0.8).abs() < 1e-12);
        // a constant variable: eta / lambda -> 0
        let flat = CgfCurve::exact_finite(&[3.0], &[1.0]).unwrap();
        assert!(inverse_fenchel(&flat, 0.4, DEFAULT_TOL).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn inverse_fenchel_concave_nondecreasing_in_eta() {
        let mut r = rng::master(14);
        for _ in 0..20 {
            let (v, p) = random_law(&mut r, 4);
            let curve = CgfCurve::exact_finite(&v, &p).unwrap();
            let etas: Vec<f64> = (0..40).map(|k| k as f64 * 0.05).collect();
            let vals: Vec<f64> = etas
                .iter()
                .map(|&e| inverse_fenchel(&curve, e, TOL).unwrap().value)
                .collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            for w in vals.windows(3) {
                assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-9);
            }
            assert!(vals.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn empirical_inversion_flags_untrusted_tilts() {
        let mut r = rng::master(15);
        let samples: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut r)).collect();
        let curve = CgfCurve::empirical(&samples).unwrap();
        let cap = curve.trusted_lambda_max().unwrap();
        assert!(cap > 0.1 && cap < 10.0, "{cap}");
        assert!(inverse_fenchel(&curve, 0.01, DEFAULT_TOL).unwrap().trusted);
        assert!(!inverse_fenchel(&curve, 5.0, DEFAULT_TOL).unwrap().trusted);
    }

    #[test]
    fn sample_conditioned_cgf_matches_extracted_law() {
        let mut r = rng::master(16);
        let raw: Vec<f64> = (0..12).map(|_| r.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let joint = FiniteJoint::new(&[2, 3, 2], raw.iter().map(|x| x / s).collect()).unwrap();
        let f: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        for u in 0..2 {
            let (_, cond) = joint.slice(u).unwrap();
            let values: Vec<f64> = (0..2)
                .flat_map(|x| (0..3).map(move |y| (x, y)))
                .map(|(x, y)| f[joint.index(x, y, u)])
                .collect();
            let oracle = cgf_exact(&values, &FiniteDistribution::new(cond).unwrap(), 1.3).unwrap();
            assert!((sample_conditioned_cgf(&joint, &f, u, 1.3).unwrap() - oracle).abs() < 1e-14);
        }
        // constant given u, symmetric given u
        let j = FiniteJoint::from_fn(&[2, 2, 2], |_, _, _| 0.125).unwrap();
        let constant = vec![4.0; 8];
        assert!(sample_conditioned_cgf(&j, &constant, 1, 3.0).unwrap().abs() < 1e-15);
        let sym: Vec<f64> = (0..8).map(|c| if (c / 2) % 2 == 0 { -0.6 } else { 0.6 }).collect();
        assert!((sample_conditioned_cgf(&j, &sym, 0, 2.0).unwrap() - ln_cosh(1.2)).abs() < 1e-14);
        let empty = FiniteJoint::from_fn(&[2, 2, 2], |_, _, u| if u == 0 { 0.25 } else { 0.0 }).unwrap();
        assert!(sample_conditioned_cgf(&empty, &sym, 1, 1.0).is_err());
    }
}
