//! Learning problems, sampling and the ground-truth generalization error.
//!
//! A problem is either a finite tabular one (data distribution over an indexed
//! alphabet, a dense `|W| x |Z|` loss table and a stochastic learner kernel
//! with one row per training vector) or the Gaussian mean-estimation problem
//! with the averaging learner and squared loss.
//!
//! Training vectors of a finite problem are indexed in base `|Z|` with the
//! first sample as the most significant digit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{self, StreamRng};

/// Tolerance on the total mass of probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Probability vector over an indexed finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return domain("empty probability vector");
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return domain(format!("invalid probability entry {p}"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return domain("empty alphabet");
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    /// Point mass on `symbol`.
    pub fn point(k: usize, symbol: usize) -> Result<Self> {
        if symbol >= k {
            return domain(format!("symbol {symbol} outside alphabet of size {k}"));
        }
        let mut probs = vec![0.0; k];
        probs[symbol] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding can leave acc slightly below 1
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// A data point or a hypothesis: an alphabet index for finite problems, a real
/// number for the Gaussian problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Index(usize),
    Real(f64),
}

/// Tabular learning problem.
#[derive(Debug, Clone)]
pub struct FiniteProblem {
    xi: FiniteDistribution,
    /// `loss[w][z]`
    loss: Vec<Vec<f64>>,
    /// One row per training-vector index, each a distribution over W.
    kernel: Vec<FiniteDistribution>,
    n: usize,
    z_labels: Vec<String>,
    w_labels: Vec<String>,
}

impl FiniteProblem {
    pub fn new(
        xi: FiniteDistribution,
        loss: Vec<Vec<f64>>,
        kernel: Vec<FiniteDistribution>,
        n: usize,
    ) -> Result<Self> {
        if n == 0 {
            return domain("sample count n must be positive");
        }
        let kz = xi.len();
        let kw = loss.len();
        if kw == 0 {
            return domain("empty hypothesis alphabet");
        }
        if let Some(row) = loss.iter().find(|r| r.len() != kz) {
            return domain(format!(
                "loss row has {} entries, expected |Z| = {kz}",
                row.len()
            ));
        }
        if loss.iter().flatten().any(|v| !v.is_finite()) {
            return domain("loss table contains a non-finite value");
        }
        let rows = checked_pow(kz, n)?;
        if kernel.len() != rows {
            return domain(format!(
                "learner has {} rows, expected |Z|^n = {rows}",
                kernel.len()
            ));
        }
        if let Some(row) = kernel.iter().find(|r| r.len() != kw) {
            return domain(format!(
                "learner row has {} entries, expected |W| = {kw}",
                row.len()
            ));
        }
        Ok(Self {
            z_labels: (0..kz).map(|i| format!("z{i}")).collect(),
            w_labels: (0..kw).map(|i| format!("w{i}")).collect(),
            xi,
            loss,
            kernel,
            n,
        })
    }

    /// Builds the kernel by calling `learner` on every training vector.
    pub fn from_learner<F>(
        xi: FiniteDistribution,
        loss: Vec<Vec<f64>>,
        n: usize,
        mut learner: F,
    ) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let kz = xi.len();
        let rows = checked_pow(kz, n)?;
        let kernel = (0..rows)
            .map(|idx| FiniteDistribution::new(learner(&decode_index(idx, kz, n))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(xi, loss, kernel, n)
    }

    pub fn with_labels(mut self, z_labels: Vec<String>, w_labels: Vec<String>) -> Result<Self> {
        if z_labels.len() != self.num_z() || w_labels.len() != self.num_w() {
            return domain("label count does not match alphabet size");
        }
        self.z_labels = z_labels;
        self.w_labels = w_labels;
        Ok(self)
    }

    pub fn xi(&self) -> &FiniteDistribution {
        &self.xi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_z(&self) -> usize {
        self.xi.len()
    }

    pub fn num_w(&self) -> usize {
        self.loss.len()
    }

    pub fn z_labels(&self) -> &[String] {
        &self.z_labels
    }

    pub fn w_labels(&self) -> &[String] {
        &self.w_labels
    }

    pub fn loss(&self, w: usize, z: usize) -> f64 {
        self.loss[w][z]
    }

    pub fn loss_table(&self) -> &[Vec<f64>] {
        &self.loss
    }

    pub fn kernel(&self) -> &[FiniteDistribution] {
        &self.kernel
    }

    /// Number of distinct training vectors, `|Z|^n`.
    pub fn num_training_vectors(&self) -> usize {
        self.kernel.len()
    }

    pub fn training_index(&self, z: &[usize]) -> usize {
        encode_index(z, self.num_z())
    }

    pub fn training_vector(&self, idx: usize) -> Vec<usize> {
        decode_index(idx, self.num_z(), self.n)
    }

    /// `P(Z_[n] = z)` under `xi^n`.
    pub fn training_prob(&self, z: &[usize]) -> f64 {
        z.iter().map(|&s| self.xi.probs()[s]).product()
    }

    /// `(min, max)` over the loss table.
    pub fn loss_range(&self) -> (f64, f64) {
        self.loss
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn population_loss_at(&self, w: usize) -> f64 {
        self.xi.expectation(&self.loss[w])
    }

    /// Marginal law of W.
    pub fn w_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_w()];
        for (idx, row) in self.kernel.iter().enumerate() {
            let pz = self.training_prob(&self.training_vector(idx));
            for (o, p) in out.iter_mut().zip(row.probs()) {
                *o += pz * p;
            }
        }
        out
    }

    /// `P(W = w | Z_i = z)` as a `|Z| x |W|` table (rows with `xi(z) = 0` are
    /// still the formal conditional of the kernel averaged over the other
    /// coordinates).
    pub fn w_given_sample(&self, i: usize) -> Vec<Vec<f64>> {
        let kz = self.num_z();
        let mut out = vec![vec![0.0; self.num_w()]; kz];
        for (idx, row) in self.kernel.iter().enumerate() {
            let z = self.training_vector(idx);
            let others: f64 = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &s)| self.xi.probs()[s])
                .product();
            for (o, p) in out[z[i]].iter_mut().zip(row.probs()) {
                *o += others * p;
            }
        }
        out
    }

    /// Exact `E[L_xi(W) - L_Z(W)]` by summing over all training vectors.
    pub fn exact_gen_error(&self) -> f64 {
        let pop: Vec<f64> = (0..self.num_w()).map(|w| self.population_loss_at(w)).collect();
        let n = self.n as f64;
        let mut total = 0.0;
        for (idx, row) in self.kernel.iter().enumerate() {
            let z = self.training_vector(idx);
            let pz = self.training_prob(&z);
            if pz == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for (w, pw) in row.probs().iter().enumerate() {
                if *pw == 0.0 {
                    continue;
                }
                let emp: f64 = z.iter().map(|&s| self.loss[w][s]).sum::<f64>() / n;
                inner += pw * (pop[w] - emp);
            }
            total += pz * inner;
        }
        total
    }

    /// Per-sample terms `E[l(W~, Z~_i)] - E[l(W, Z_i)]` with `W~` and `Z~_i`
    /// independent copies of the marginals. Their average is the
    /// generalization error.
    pub fn individual_gen_terms(&self) -> Vec<f64> {
        let pw = self.w_marginal();
        let decoupled: f64 = pw
            .iter()
            .enumerate()
            .map(|(w, p)| p * self.population_loss_at(w))
            .sum();
        (0..self.n)
            .map(|i| {
                let cond = self.w_given_sample(i);
                let coupled: f64 = cond
                    .iter()
                    .enumerate()
                    .map(|(z, row)| {
                        self.xi.probs()[z]
                            * row
                                .iter()
                                .enumerate()
                                .map(|(w, p)| p * self.loss[w][z])
                                .sum::<f64>()
                    })
                    .sum();
                decoupled - coupled
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, usize) {
        let z: Vec<usize> = (0..self.n).map(|_| self.xi.sample(rng)).collect();
        let w = self.kernel[self.training_index(&z)].sample(rng);
        (z, w)
    }
}

/// Gaussian mean estimation: `Z_i ~ N(mean, variance)`, `W` the sample
/// average, squared loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProblem {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

impl GaussianProblem {
    pub fn new(mean: f64, variance: f64, n: usize) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return domain(format!("variance must be positive, got {variance}"));
        }
        if !mean.is_finite() {
            return domain("mean must be finite");
        }
        if n == 0 {
            return domain("sample count n must be positive");
        }
        Ok(Self { mean, variance, n })
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn loss(w: f64, z: f64) -> f64 {
        (w - z) * (w - z)
    }

    pub fn population_loss_at(&self, w: f64) -> f64 {
        (w - self.mean).powi(2) + self.variance
    }

    pub fn learner(z: &[f64]) -> f64 {
        z.iter().sum::<f64>() / z.len() as f64
    }

    /// `2 sigma^2 / n`.
    pub fn exact_gen_error(&self) -> f64 {
        2.0 * self.variance / self.n as f64
    }

    pub fn draw_point<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x: f64 = StandardNormal.sample(rng);
        self.mean + self.sigma() * x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let z: Vec<f64> = (0..self.n).map(|_| self.draw_point(rng)).collect();
        let w = Self::learner(&z);
        (z, w)
    }
}

#[derive(Debug, Clone)]
pub enum LearningProblem {
    Finite(FiniteProblem),
    Gaussian(GaussianProblem),
}

impl LearningProblem {
    pub fn n(&self) -> usize {
        match self {
            Self::Finite(p) => p.n(),
            Self::Gaussian(p) => p.n,
        }
    }

    pub fn loss(&self, w: Point, z: Point) -> Result<f64> {
        match (self, w, z) {
            (Self::Finite(p), Point::Index(w), Point::Index(z)) => {
                if w >= p.num_w() || z >= p.num_z() {
                    return domain(format!("symbol pair ({w}, {z}) outside alphabets"));
                }
                Ok(p.loss(w, z))
            }
            (Self::Gaussian(_), Point::Real(w), Point::Real(z)) => Ok(GaussianProblem::loss(w, z)),
            _ => domain("point kind does not match problem kind"),
        }
    }

    /// `L_xi(w)`.
    pub fn population_loss(&self, w: Point) -> Result<f64> {
        match (self, w) {
            (Self::Finite(p), Point::Index(w)) => {
                if w >= p.num_w() {
                    return domain(format!("hypothesis {w} outside alphabet of size {}", p.num_w()));
                }
                Ok(p.population_loss_at(w))
            }
            (Self::Gaussian(p), Point::Real(w)) => Ok(p.population_loss_at(w)),
            _ => domain("hypothesis kind does not match problem kind"),
        }
    }

    /// `L_z(w)`, the mean loss over the sample vector.
    pub fn empirical_loss(&self, w: Point, z: &[Point]) -> Result<f64> {
        if z.is_empty() {
            return domain("empirical loss of an empty sample vector");
        }
        let mut total = 0.0;
        for &zi in z {
            total += self.loss(w, zi)?;
        }
        Ok(total / z.len() as f64)
    }

    /// Draws a training vector and a hypothesis from the learner.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<Point>, Point) {
        match self {
            Self::Finite(p) => {
                let (z, w) = p.sample(rng);
                (z.into_iter().map(Point::Index).collect(), Point::Index(w))
            }
            Self::Gaussian(p) => {
                let (z, w) = p.sample(rng);
                (z.into_iter().map(Point::Real).collect(), Point::Real(w))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMethod {
    ExactEnumeration,
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub samples: usize,
    pub seed: u64,
}

/// Mean and batch-means standard error of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Number of batches used for batch-means standard errors.
pub const MC_BATCHES: usize = 20;

/// Runs `total` draws split into [`MC_BATCHES`] batches, each on its own
/// substream of `seed`. `batch(rng, count)` returns the sum of `count` draws.
/// Batches run in parallel and are merged in batch order.
pub fn monte_carlo<F>(seed: u64, total: usize, batch: F) -> Result<McEstimate>
where
    F: Fn(&mut StreamRng, usize) -> Result<f64> + Sync,
{
    if total < MC_BATCHES {
        return domain(format!(
            "Monte Carlo needs at least {MC_BATCHES} samples, got {total}"
        ));
    }
    let sizes: Vec<usize> = (0..MC_BATCHES)
        .map(|b| total / MC_BATCHES + usize::from(b < total % MC_BATCHES))
        .collect();
    let sums = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut rng = rng::substream(seed, b as u64 + 1);
            batch(&mut rng, count)
        })
        .collect::<Result<Vec<f64>>>()?;
    let means: Vec<f64> = sums.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect();
    let mean = sums.iter().sum::<f64>() / total as f64;
    let bm = means.iter().sum::<f64>() / MC_BATCHES as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (MC_BATCHES - 1) as f64;
    if !mean.is_finite() {
        return Err(Error::Numeric("Monte Carlo mean is not finite".into()));
    }
    Ok(McEstimate {
        mean,
        std_error: (var / MC_BATCHES as f64).sqrt(),
        samples: total,
    })
}

/// `gen(xi, P_{W|Z})` with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenErrorEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: GenMethod,
}

pub fn true_gen_error(
    problem: &LearningProblem,
    method: GenMethod,
    mc: Option<McParams>,
) -> Result<GenErrorEstimate> {
    match (method, problem) {
        (GenMethod::ExactEnumeration, LearningProblem::Finite(p)) => Ok(GenErrorEstimate {
            value: p.exact_gen_error(),
            std_error: 0.0,
            method,
        }),
        (GenMethod::ClosedForm, LearningProblem::Gaussian(p)) => Ok(GenErrorEstimate {
            value: p.exact_gen_error(),
            std_error: 0.0,
            method,
        }),
        (GenMethod::MonteCarlo, _) => {
            let mc = mc.ok_or_else(|| {
                Error::Domain("Monte Carlo needs a sample count and a seed".into())
            })?;
            let est = match problem {
                LearningProblem::Finite(p) => monte_carlo(mc.seed, mc.samples, |rng, count| {
                    let n = p.n() as f64;
                    let mut sum = 0.0;
                    for _ in 0..count {
                        let (z, w) = p.sample(rng);
                        let emp: f64 = z.iter().map(|&s| p.loss(w, s)).sum::<f64>() / n;
                        sum += p.population_loss_at(w) - emp;
                    }
                    Ok(sum)
                })?,
                LearningProblem::Gaussian(p) => monte_carlo(mc.seed, mc.samples, |rng, count| {
                    let mut z = vec![0.0; p.n];
                    let mut sum = 0.0;
                    for _ in 0..count {
                        for zi in z.iter_mut() {
                            *zi = p.draw_point(rng);
                        }
                        let w = GaussianProblem::learner(&z);
                        let emp = z.iter().map(|&zi| GaussianProblem::loss(w, zi)).sum::<f64>()
                            / p.n as f64;
                        sum += p.population_loss_at(w) - emp;
                    }
                    Ok(sum)
                })?,
            };
            Ok(GenErrorEstimate {
                value: est.mean,
                std_error: est.std_error,
                method,
            })
        }
        (GenMethod::ExactEnumeration, LearningProblem::Gaussian(_)) => Err(
            Error::UnsupportedMethod("exact enumeration needs a finite problem".into()),
        ),
        (GenMethod::ClosedForm, LearningProblem::Finite(_)) => Err(Error::UnsupportedMethod(
            "closed form is only available for the Gaussian averager".into(),
        )),
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base)).ok_or_else(|| Error::Resource {
        states: (base as u128).saturating_pow(exp as u32),
        budget: usize::MAX as u128,
    })
}

pub fn encode_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

pub fn decode_index(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}
