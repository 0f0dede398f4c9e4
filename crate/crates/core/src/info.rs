//! Exact information measures over finite joint tables, plus the mutual
//! information between a Rademacher label and a symmetric two-component
//! Gaussian mixture.
//!
//! Everything is in nats.

use std::f64::consts::{LN_2, PI};

use crate::cgf::{ln_cosh, log_sum_exp};
use crate::error::{domain, Result};
use crate::model::{FiniteDistribution, PROB_TOL};
use crate::quad;

/// Probability table over two (`X x Y`) or three (`X x Y x U`) finite axes.
///
/// Cells are stored row-major with `U` varying fastest:
/// `idx = (x * |Y| + y) * |U| + u`. A two-axis joint behaves as a
/// three-axis one with `|U| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJoint {
    dims: [usize; 3],
    axes: usize,
    table: Vec<f64>,
    labels: Vec<String>,
}

impl FiniteJoint {
    pub fn new(dims: &[usize], table: Vec<f64>) -> Result<Self> {
        let axes = dims.len();
        if !(axes == 2 || axes == 3) {
            return domain(format!("joint must have 2 or 3 axes, got {axes}"));
        }
        if dims.iter().any(|&d| d == 0) {
            return domain("joint axis of size zero");
        }
        let d = [dims[0], dims[1], if axes == 3 { dims[2] } else { 1 }];
        if table.len() != d.iter().product::<usize>() {
            return domain(format!(
                "table has {} cells, dims {:?} need {}",
                table.len(),
                dims,
                d.iter().product::<usize>()
            ));
        }
        if let Some(p) = table.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return domain(format!("invalid joint entry {p}"));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return domain(format!("joint sums to {total}, not 1"));
        }
        let default = ["X", "Y", "U"];
        Ok(Self {
            dims: d,
            axes,
            table,
            labels: default[..axes].iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Builds a joint from a cell function `p(x, y, u)`.
    pub fn from_fn(dims: &[usize], mut p: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let du = if dims.len() == 3 { dims[2] } else { 1 };
        let mut table = Vec::with_capacity(dims.iter().product());
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for u in 0..du {
                    table.push(p(x, y, u));
                }
            }
        }
        Self::new(dims, table)
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.axes {
            return domain("one label per axis required");
        }
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    /// `(|X|, |Y|, |U|)`, with `|U| = 1` for two-axis joints.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn index(&self, x: usize, y: usize, u: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + u
    }

    pub fn prob(&self, x: usize, y: usize, u: usize) -> f64 {
        self.table[self.index(x, y, u)]
    }

    pub fn u_marginal(&self) -> Vec<f64> {
        let (dx, dy, du) = self.dims();
        let mut out = vec![0.0; du];
        for x in 0..dx {
            for y in 0..dy {
                for (u, o) in out.iter_mut().enumerate() {
                    *o += self.prob(x, y, u);
                }
            }
        }
        out
    }

    /// `P(x, u)` as `[x][u]`.
    pub fn xu_marginal(&self) -> Vec<Vec<f64>> {
        let (dx, dy, du) = self.dims();
        let mut out = vec![vec![0.0; du]; dx];
        for (x, row) in out.iter_mut().enumerate() {
            for y in 0..dy {
                for (u, o) in row.iter_mut().enumerate() {
                    *o += self.prob(x, y, u);
                }
            }
        }
        out
    }

    /// `P(y, u)` as `[y][u]`.
    pub fn yu_marginal(&self) -> Vec<Vec<f64>> {
        let (dx, dy, du) = self.dims();
        let mut out = vec![vec![0.0; du]; dy];
        for x in 0..dx {
            for (y, row) in out.iter_mut().enumerate() {
                for (u, o) in row.iter_mut().enumerate() {
                    *o += self.prob(x, y, u);
                }
            }
        }
        out
    }

    /// Marginal over a single axis (0 = X, 1 = Y, 2 = U).
    pub fn axis_marginal(&self, axis: usize) -> Result<FiniteDistribution> {
        let probs = match axis {
            0 => self.xu_marginal().iter().map(|r| r.iter().sum()).collect(),
            1 => self.yu_marginal().iter().map(|r| r.iter().sum()).collect(),
            2 if self.axes == 3 => self.u_marginal(),
            _ => return domain(format!("no axis {axis}")),
        };
        FiniteDistribution::new(probs)
    }

    /// `(P(u), P(x, y | u))` with the conditional laid out as `x * |Y| + y`,
    /// or `None` when `P(u) = 0`.
    pub fn slice(&self, u: usize) -> Option<(f64, Vec<f64>)> {
        let (dx, dy, _) = self.dims();
        let cells: Vec<f64> = (0..dx)
            .flat_map(|x| (0..dy).map(move |y| (x, y)))
            .map(|(x, y)| self.prob(x, y, u))
            .collect();
        let pu: f64 = cells.iter().sum();
        if pu <= 0.0 {
            return None;
        }
        Some((pu, cells.into_iter().map(|c| c / pu).collect()))
    }
}

/// `sum p ln(p / q)` on raw slices; `+inf` when `p` puts mass where `q` does not.
/// Values at rounding level are returned as exactly zero.
pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).ln();
    }
    if acc <= 16.0 * f64::EPSILON {
        0.0
    } else {
        acc
    }
}

/// `D(p || q)` in nats.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return domain(format!(
            "KL between alphabets of size {} and {}",
            p.len(),
            q.len()
        ));
    }
    Ok(kl_slices(p.probs(), q.probs()))
}

/// Mutual information of a conditional slice `P(x, y | u)`.
fn slice_mi(cells: &[f64], dx: usize, dy: usize) -> f64 {
    let mut px = vec![0.0; dx];
    let mut py = vec![0.0; dy];
    for x in 0..dx {
        for y in 0..dy {
            let c = cells[x * dy + y];
            px[x] += c;
            py[y] += c;
        }
    }
    let product: Vec<f64> = (0..dx)
        .flat_map(|x| py.iter().map(move |&b| (x, b)))
        .map(|(x, b)| px[x] * b)
        .collect();
    kl_slices(cells, &product)
}

/// `I(X; Y)` of a two-axis joint.
pub fn mutual_information(joint: &FiniteJoint) -> Result<f64> {
    if joint.axes() != 2 {
        return domain("mutual_information expects a two-axis joint; use conditional_mutual_information");
    }
    let (dx, dy, _) = joint.dims();
    Ok(slice_mi(joint.table(), dx, dy))
}

/// `I_u(X; Y)` for one conditioning value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedTerm {
    pub u: usize,
    pub mi: f64,
    pub prob: f64,
}

/// The random variable `I_U(X; Y)` as a list of its values, and its mean
/// `I(X; Y | U)`. Slices with `P(u) = 0` are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleConditionedMI {
    pub per_u: Vec<ConditionedTerm>,
    pub mean: f64,
}

pub fn sample_conditioned_mi(joint: &FiniteJoint) -> Result<SampleConditionedMI> {
    if joint.axes() != 3 {
        return domain("sample-conditioned MI needs a three-axis joint");
    }
    let (dx, dy, du) = joint.dims();
    let per_u: Vec<ConditionedTerm> = (0..du)
        .filter_map(|u| {
            joint.slice(u).map(|(prob, cells)| ConditionedTerm {
                u,
                mi: slice_mi(&cells, dx, dy),
                prob,
            })
        })
        .collect();
    let mean = per_u.iter().map(|t| t.prob * t.mi).sum();
    Ok(SampleConditionedMI { per_u, mean })
}

/// `I(X; Y | U)`.
pub fn conditional_mutual_information(joint: &FiniteJoint) -> Result<f64> {
    Ok(sample_conditioned_mi(joint)?.mean)
}

/// Default absolute tolerance for [`mixed_gaussian_mi`].
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

const MAX_SEGMENTS: usize = 4000;
const SERIES_ALPHA: f64 = 0.01;

/// `I(V; R)` where `R` is Rademacher and `V | R ~ N(R nu, variance)`.
///
/// Uses `I(V; R) = alpha^2 - I(alpha)` with `alpha = |nu| / sigma` and
/// `I(alpha) = E[ln cosh(alpha |X|)]`, `X ~ N(alpha, 1)`, written as a
/// half-line integral and truncated where the Gaussian tail is below
/// `quad_tol / 10`. Below `alpha = 0.01` the series
/// `alpha^2 / 2 - alpha^4 / 4 + alpha^6 / 6` is used instead.
pub fn mixed_gaussian_mi(nu: f64, variance: f64, quad_tol: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return domain(format!("variance must be positive, got {variance}"));
    }
    if !nu.is_finite() {
        return domain("mixture offset must be finite");
    }
    if !(quad_tol > 0.0) {
        return domain("quadrature tolerance must be positive");
    }
    let alpha = nu.abs() / variance.sqrt();
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha > 30.0 {
        // misclassification mass below e^{-450}
        return Ok(LN_2);
    }
    let a2 = alpha * alpha;
    if alpha < SERIES_ALPHA {
        return Ok(a2 * (0.5 - a2 * (0.25 - a2 / 6.0)));
    }
    let c = 1.0 / (2.0 * PI).sqrt();
    let tail = |s: f64| 2.0 * c * alpha * (-0.5 * s * s).exp() * (1.0 + alpha / s);
    let mut s = 1.0;
    while tail(s) > quad_tol / 10.0 {
        s += 0.5;
    }
    let upper = alpha + s;
    let tol = quad_tol.min(1e-8 * a2).max(1e-13 * a2);
    let integrand = |t: f64| {
        let left = -0.5 * (t - alpha) * (t - alpha);
        let right = -0.5 * (t + alpha) * (t + alpha);
        c * (left.exp() + right.exp()) * ln_cosh(alpha * t)
    };
    let q = quad::integrate(integrand, 0.0, upper, tol, MAX_SEGMENTS)?;
    Ok((a2 - q.value).clamp(0.0, LN_2))
}

/// Donsker-Varadhan gap `E_P[lambda F] - ln E_Q[exp(lambda F)]`, where `F`
/// is given by its value on every cell of the joints.
pub fn dv_gap(p: &FiniteJoint, q: &FiniteJoint, f: &[f64], lambda: f64) -> Result<f64> {
    if p.dims() != q.dims() {
        return domain("joints live on different alphabets");
    }
    if f.len() != p.table().len() {
        return domain("function table does not match the joint cells");
    }
    let mean_p: f64 = p.table().iter().zip(f).map(|(pi, fi)| pi * fi).sum();
    let terms: Vec<(f64, f64)> = q
        .table()
        .iter()
        .zip(f)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, fi)| (qi.ln(), lambda * fi))
        .collect();
    let log_mgf = log_sum_exp(terms.iter().map(|(lw, e)| lw + e));
    Ok(lambda * mean_p - log_mgf)
}
