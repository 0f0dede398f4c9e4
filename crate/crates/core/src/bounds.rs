//! Generalization bounds for finite problems, evaluated exactly.
//!
//! Every bound here is one application of the conditional decoupling
//! inequality `E[F] - E[F~] <= E[Psi*^-1_{F~|U}(I_U(X;Y))] <=
//! psibar*^-1(I(X;Y|U))` with a particular choice of `(X, Y, U, F)`:
//!
//! | bound | Y         | U          | F                                   |
//! |-------|-----------|------------|-------------------------------------|
//! | MI    | `Z_[n]`   | none       | `(1/n) sum_i l(W, Z_i)`             |
//! | IMI   | `Z_i`     | none       | `l(W, Z_i)`                         |
//! | CMI   | `R_[n]`   | `Z^+-_[n]` | `(1/n) sum_i R_i (l(W,Z_i^-) - l(W,Z_i^+))` |
//! | CIMI  | `R_i`     | `Z^+-_[n]` | `R_i (l(W,Z_i^-) - l(W,Z_i^+))`     |
//! | ICIMI | `R_i`     | `Z_i^+-`   | `R_i (l(W,Z_i^-) - l(W,Z_i^+))`     |
//!
//! with `X = W` throughout. MI and IMI use the `-F~` direction.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cgf::{conditional_cgf, inverse_fenchel, CgfCurve, CgfKind, DEFAULT_TOL};
use crate::error::{domain, Error, Result};
use crate::info::{sample_conditioned_mi, FiniteJoint, SampleConditionedMI};
use crate::model::{checked_pow, FiniteProblem, LearningProblem};
use crate::supersample::{
    decouple, selector_sign, supersample_joint, table_columns, Conditioning, Selector, DEFAULT_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundName {
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "IMI")]
    Imi,
    #[serde(rename = "CMI")]
    Cmi,
    #[serde(rename = "CIMI")]
    Cimi,
    #[serde(rename = "ICIMI")]
    Icimi,
    #[serde(rename = "CMI_strengthened")]
    CmiStrengthened,
    #[serde(rename = "CIMI_strengthened")]
    CimiStrengthened,
    #[serde(rename = "ICIMI_bounded")]
    IcimiBounded,
}

impl BoundName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mi => "MI",
            Self::Imi => "IMI",
            Self::Cmi => "CMI",
            Self::Cimi => "CIMI",
            Self::Icimi => "ICIMI",
            Self::CmiStrengthened => "CMI_strengthened",
            Self::CimiStrengthened => "CIMI_strengthened",
            Self::IcimiBounded => "ICIMI_bounded",
        }
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which form of a bound a report holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The square-root form with a sub-Gaussian or bounded-difference constant.
    Standard,
    /// The inverse conjugate of the exact decoupled CGF.
    Conjugate,
    /// Expectation of the per-realization inverse conjugate of `I_U`.
    SampleConditioned,
    /// Inverse conjugate of the averaged CGF at the conditional MI.
    Averaged,
    /// CMI with the difference bound replaced by the loss range.
    Specialization,
    /// The `l in [0, 1]` closed form.
    SpecialCase,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Conjugate => "conjugate",
            Self::SampleConditioned => "sample_conditioned",
            Self::Averaged => "averaged",
            Self::Specialization => "specialization",
            Self::SpecialCase => "special_case",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    Exact,
    MonteCarlo,
}

impl EvalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// The information term is infinite.
    pub infinite: bool,
    /// The theorem's hypothesis fails; `value` is `NaN`.
    pub inapplicable: bool,
    /// An empirical CGF was inverted outside its trusted range.
    pub untrusted: bool,
    /// Carries a note (see [`BoundReport::note`]).
    pub annotated: bool,
}

impl Flags {
    pub fn labels(&self) -> String {
        let mut out = Vec::new();
        if self.infinite {
            out.push("infinite");
        }
        if self.inapplicable {
            out.push("inapplicable");
        }
        if self.untrusted {
            out.push("untrusted_cgf");
        }
        if self.annotated {
            out.push("annotated");
        }
        out.join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: BoundName,
    pub variant: Variant,
    /// In loss units.
    pub value: f64,
    /// Information terms in nats, one per sample index for individual bounds.
    pub info_terms: Vec<f64>,
    pub conjugate_kind: CgfKind,
    pub method: EvalMethod,
    pub std_error: f64,
    pub n: usize,
    pub flags: Flags,
    pub note: Option<String>,
}

impl BoundReport {
    fn exact(
        name: BoundName,
        variant: Variant,
        value: f64,
        info_terms: Vec<f64>,
        conjugate_kind: CgfKind,
        n: usize,
    ) -> Self {
        Self {
            name,
            variant,
            value,
            info_terms,
            conjugate_kind,
            method: EvalMethod::Exact,
            std_error: 0.0,
            n,
            flags: Flags::default(),
            note: None,
        }
    }

    /// The single information number printed in CSV output: the term itself,
    /// or the mean over sample indices for individual bounds.
    pub fn info_summary(&self) -> f64 {
        if self.info_terms.is_empty() {
            return f64::NAN;
        }
        self.info_terms.iter().sum::<f64>() / self.info_terms.len() as f64
    }

    /// Whether the report carries a usable upper bound.
    pub fn is_applicable(&self) -> bool {
        !self.flags.inapplicable
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Inversion tolerance for the inverse conjugate.
    pub tol: f64,
    /// Maximum number of enumerated supersample states.
    pub budget: u128,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Bounds `E[F] - E[F~]` with the CGF of `F~`.
    Plus,
    /// Bounds `E[F~] - E[F]` with the CGF of `-F~`.
    Minus,
}

/// Both sides of the decoupling inequality for one `(joint, f)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CdBound {
    /// `E[F] - E[F~]` (Plus) or `E[F~] - E[F]` (Minus).
    pub gap: f64,
    pub strong: f64,
    pub weak: f64,
    pub info: SampleConditionedMI,
}

/// Values of `f` on every cell of `joint`, in the joint's storage order.
pub fn cell_values(joint: &FiniteJoint, mut f: impl FnMut(usize, usize, usize) -> f64) -> Vec<f64> {
    let (dx, dy, du) = joint.dims();
    let mut out = Vec::with_capacity(dx * dy * du);
    for x in 0..dx {
        for y in 0..dy {
            for u in 0..du {
                out.push(f(x, y, u));
            }
        }
    }
    out
}

/// Applies the decoupling inequality to a three-axis joint.
pub fn cd_bound(joint: &FiniteJoint, f: &[f64], direction: Direction, tol: f64) -> Result<CdBound> {
    if joint.axes() != 3 {
        return domain("decoupling bound needs a three-axis joint (use |U| = 1 for none)");
    }
    if f.len() != joint.table().len() {
        return domain("function table does not match the joint cells");
    }
    let dec = decouple(joint)?.decoupled;
    let info = sample_conditioned_mi(joint)?;
    let raw_gap: f64 = joint
        .table()
        .iter()
        .zip(dec.table())
        .zip(f)
        .map(|((p, q), v)| (p - q) * v)
        .sum();
    let gap = match direction {
        Direction::Plus => raw_gap,
        Direction::Minus => -raw_gap,
    };
    let mut weights = Vec::with_capacity(info.per_u.len());
    let mut parts = Vec::with_capacity(info.per_u.len());
    let mut strong = 0.0;
    for term in &info.per_u {
        let mut curve = conditional_cgf(&dec, f, term.u)?;
        if direction == Direction::Minus {
            curve = curve.negated();
        }
        strong += term.prob * inverse_fenchel(&curve, term.mi, tol)?.value;
        weights.push(term.prob);
        parts.push(curve);
    }
    let weak = inverse_fenchel(&CgfCurve::averaged(&weights, parts)?, info.mean, tol)?.value;
    Ok(CdBound {
        gap,
        strong,
        weak,
        info,
    })
}

fn mi_joint(p: &FiniteProblem, budget: u128) -> Result<FiniteJoint> {
    let vectors = checked_pow(p.num_z(), p.n())?;
    let states = vectors as u128 * p.num_w() as u128;
    if states > budget {
        return Err(Error::Resource { states, budget });
    }
    FiniteJoint::from_fn(&[p.num_w(), vectors, 1], |w, z, _| {
        p.training_prob(&p.training_vector(z)) * p.kernel()[z].probs()[w]
    })
}

fn mi_terms(p: &FiniteProblem, opts: &EngineOptions) -> Result<CdBound> {
    let joint = mi_joint(p, opts.budget)?;
    let n = p.n() as f64;
    let f = cell_values(&joint, |w, z, _| {
        p.training_vector(z).iter().map(|&s| p.loss(w, s)).sum::<f64>() / n
    });
    cd_bound(&joint, &f, Direction::Minus, opts.tol)
}

fn imi_terms(p: &FiniteProblem, i: usize, opts: &EngineOptions) -> Result<CdBound> {
    let cond = p.w_given_sample(i);
    let xi = p.xi().probs();
    let joint = FiniteJoint::from_fn(&[p.num_w(), p.num_z(), 1], |w, z, _| xi[z] * cond[z][w])?;
    let f = cell_values(&joint, |w, z, _| p.loss(w, z));
    cd_bound(&joint, &f, Direction::Minus, opts.tol)
}

fn cmi_terms(p: &FiniteProblem, opts: &EngineOptions) -> Result<CdBound> {
    let joint = supersample_joint(p, Selector::All, Conditioning::Table, opts.budget)?;
    let n = p.n();
    let columns: Vec<Vec<[usize; 2]>> = (0..joint.dims().2).map(|t| table_columns(t, p.num_z(), n)).collect();
    let f = cell_values(&joint, |w, r, t| {
        columns[t]
            .iter()
            .enumerate()
            .map(|(i, c)| selector_sign(r, i, n) * (p.loss(w, c[0]) - p.loss(w, c[1])))
            .sum::<f64>()
            / n as f64
    });
    cd_bound(&joint, &f, Direction::Plus, opts.tol)
}

fn cimi_terms(p: &FiniteProblem, i: usize, opts: &EngineOptions) -> Result<CdBound> {
    let joint = supersample_joint(p, Selector::One(i), Conditioning::Table, opts.budget)?;
    let columns: Vec<[usize; 2]> = (0..joint.dims().2)
        .map(|t| table_columns(t, p.num_z(), p.n())[i])
        .collect();
    let f = cell_values(&joint, |w, y, t| {
        let c = columns[t];
        (2.0 * y as f64 - 1.0) * (p.loss(w, c[0]) - p.loss(w, c[1]))
    });
    cd_bound(&joint, &f, Direction::Plus, opts.tol)
}

fn icimi_terms(p: &FiniteProblem, i: usize, opts: &EngineOptions) -> Result<CdBound> {
    let joint = supersample_joint(p, Selector::One(i), Conditioning::Column(i), opts.budget)?;
    let kz = p.num_z();
    let f = cell_values(&joint, |w, y, u| {
        (2.0 * y as f64 - 1.0) * (p.loss(w, u / kz) - p.loss(w, u % kz))
    });
    cd_bound(&joint, &f, Direction::Plus, opts.tol)
}

fn per_index(p: &FiniteProblem, opts: &EngineOptions, f: fn(&FiniteProblem, usize, &EngineOptions) -> Result<CdBound>) -> Result<Vec<CdBound>> {
    (0..p.n()).map(|i| f(p, i, opts)).collect()
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// `E[sqrt(2 I_U)]` over the conditioning realizations.
fn mean_sqrt_2i(info: &SampleConditionedMI) -> f64 {
    info.per_u.iter().map(|t| t.prob * (2.0 * t.mi).sqrt()).sum()
}

fn in_unit_range(p: &FiniteProblem) -> bool {
    let (lo, hi) = p.loss_range();
    lo >= 0.0 && hi <= 1.0
}

fn infinite_report(name: BoundName, variant: Variant, n: usize) -> BoundReport {
    let mut r = BoundReport::exact(name, variant, f64::INFINITY, vec![f64::INFINITY], CgfKind::ClosedFormSubgaussian, n);
    r.flags.infinite = true;
    r
}

fn inapplicable_report(name: BoundName, variant: Variant, n: usize, why: &str) -> BoundReport {
    let mut r = BoundReport::exact(name, variant, f64::NAN, Vec::new(), CgfKind::ClosedFormSubgaussian, n);
    r.flags.inapplicable = true;
    r.flags.annotated = true;
    r.note = Some(why.to_string());
    r
}

fn mi_standard(p: &FiniteProblem, info: f64, sigma2: Option<f64>) -> Result<BoundReport> {
    let (lo, hi) = p.loss_range();
    let sigma2 = match sigma2 {
        Some(s) if s.is_finite() && s >= 0.0 => s,
        Some(s) => return domain(format!("sub-Gaussian parameter must be nonnegative, got {s}")),
        None => (hi - lo).powi(2) / 4.0,
    };
    let value = (2.0 * sigma2 / p.n() as f64 * info).sqrt();
    Ok(BoundReport::exact(BoundName::Mi, Variant::Standard, value, vec![info], CgfKind::ClosedFormSubgaussian, p.n()))
}

/// Sub-Gaussian MI bound `sqrt(2 sigma^2 I(W; Z_[n]) / n)`. Without an explicit
/// `sigma2` a finite problem uses `(max l - min l)^2 / 4`. The Gaussian
/// averager has infinite `I(W; Z_[n])`.
pub fn mi_bound(problem: &LearningProblem, sigma2: Option<f64>, opts: &EngineOptions) -> Result<BoundReport> {
    match problem {
        LearningProblem::Gaussian(g) => Ok(infinite_report(BoundName::Mi, Variant::Standard, g.n)),
        LearningProblem::Finite(p) => {
            let info = mutual_info_full(p, opts)?;
            mi_standard(p, info, sigma2)
        }
    }
}

/// `I(W; Z_[n])`.
pub fn mutual_info_full(p: &FiniteProblem, opts: &EngineOptions) -> Result<f64> {
    Ok(sample_conditioned_mi(&mi_joint(p, opts.budget)?)?.mean)
}

/// MI bound with the exact CGF of `-(1/n) sum_i l(W~, Z~_i)`.
pub fn mi_conjugate_bound(p: &FiniteProblem, opts: &EngineOptions) -> Result<BoundReport> {
    let t = mi_terms(p, opts)?;
    Ok(BoundReport::exact(BoundName::Mi, Variant::Conjugate, t.weak, vec![t.info.mean], CgfKind::ExactFinite, p.n()))
}

fn imi_report(p: &FiniteProblem, terms: &[CdBound]) -> BoundReport {
    let n = p.n();
    BoundReport::exact(
        BoundName::Imi,
        Variant::Conjugate,
        mean(terms.iter().map(|t| t.weak), n),
        terms.iter().map(|t| t.info.mean).collect(),
        CgfKind::ExactFinite,
        n,
    )
}

/// `(1/n) sum_i psi_-*^-1(I(W; Z_i))` with `psi_-` the exact CGF of
/// `-l(W~, Z~)` under `P_W x xi`. For the Gaussian averager the closed form
/// with the quadratic envelope is used.
pub fn imi_bound(problem: &LearningProblem, opts: &EngineOptions) -> Result<BoundReport> {
    match problem {
        LearningProblem::Finite(p) => Ok(imi_report(p, &per_index(p, opts, imi_terms)?)),
        LearningProblem::Gaussian(g) => {
            let cfg = crate::gaussian::GaussianCaseConfig::new(g.variance, g.n)?;
            let (info, value) = crate::gaussian::imi_gaussian(&cfg)?;
            let mut r = BoundReport::exact(
                BoundName::Imi,
                Variant::Standard,
                value,
                vec![info; g.n],
                CgfKind::ClosedFormSubgaussian,
                g.n,
            );
            r.method = EvalMethod::Exact;
            Ok(r)
        }
    }
}

/// `E[Delta(Z_1, Z_2)^2]` with `Delta(z1, z2) = max_w |l(w, z1) - l(w, z2)|`.
pub fn expected_delta_squared(p: &FiniteProblem, delta: Option<&[Vec<f64>]>) -> Result<f64> {
    let kz = p.num_z();
    let xi = p.xi().probs();
    let mut acc = 0.0;
    for a in 0..kz {
        for b in 0..kz {
            let sup = (0..p.num_w())
                .map(|w| (p.loss(w, a) - p.loss(w, b)).abs())
                .fold(0.0, f64::max);
            let d = match delta {
                None => sup,
                Some(table) => {
                    let d = *table
                        .get(a)
                        .and_then(|row| row.get(b))
                        .ok_or_else(|| Error::Domain("difference table must be |Z| x |Z|".into()))?;
                    if !(d >= sup - 1e-15) {
                        return domain(format!("Delta({a}, {b}) = {d} is below the loss difference {sup}"));
                    }
                    d
                }
            };
            acc += xi[a] * xi[b] * d * d;
        }
    }
    Ok(acc)
}

/// `sqrt((2/n) E[Delta^2] I(W; R_[n] | Z^+-_[n]))`. The Gaussian averager has
/// no finite `Delta` and gets an inapplicable report.
pub fn cmi_bound(problem: &LearningProblem, delta: Option<&[Vec<f64>]>, opts: &EngineOptions) -> Result<BoundReport> {
    match problem {
        LearningProblem::Gaussian(g) => Ok(inapplicable_report(
            BoundName::Cmi,
            Variant::Standard,
            g.n,
            "no finite bound on sup_w |l(w, z1) - l(w, z2)| exists; use the strengthened form",
        )),
        LearningProblem::Finite(p) => {
            let info = cmi_info(p, opts)?;
            cmi_standard(p, info, delta)
        }
    }
}

fn cmi_standard(p: &FiniteProblem, info: f64, delta: Option<&[Vec<f64>]>) -> Result<BoundReport> {
    let ed2 = expected_delta_squared(p, delta)?;
    let value = (2.0 / p.n() as f64 * ed2 * info).sqrt();
    Ok(BoundReport::exact(BoundName::Cmi, Variant::Standard, value, vec![info], CgfKind::ClosedFormSubgaussian, p.n()))
}

fn cmi_specialization_report(p: &FiniteProblem, info: f64) -> BoundReport {
    let (lo, hi) = p.loss_range();
    let value = (hi - lo) * (2.0 * info / p.n() as f64).sqrt();
    BoundReport::exact(BoundName::Cmi, Variant::Specialization, value, vec![info], CgfKind::ClosedFormSubgaussian, p.n())
}

/// `I(W; R_[n] | Z^+-_[n])`.
pub fn cmi_info(p: &FiniteProblem, opts: &EngineOptions) -> Result<f64> {
    let joint = supersample_joint(p, Selector::All, Conditioning::Table, opts.budget)?;
    Ok(sample_conditioned_mi(&joint)?.mean)
}

/// CMI bound with `Delta` replaced by the loss range `b - a`:
/// `(b - a) sqrt(2 I(W; R_[n] | Z^+-_[n]) / n)`.
pub fn cmi_specialization(p: &FiniteProblem, opts: &EngineOptions) -> Result<BoundReport> {
    Ok(cmi_specialization_report(p, cmi_info(p, opts)?))
}

fn require_unit_range(p: &FiniteProblem) -> Result<()> {
    if !in_unit_range(p) {
        let (lo, hi) = p.loss_range();
        return domain(format!(
            "CIMI constants need losses in [0, 1], got [{lo}, {hi}]; use the strengthened CIMI bound"
        ));
    }
    Ok(())
}

fn check_variant(v: Variant, allowed: &[Variant]) -> Result<()> {
    if !allowed.contains(&v) {
        return domain(format!("variant {v} is not available for this bound"));
    }
    Ok(())
}

fn cimi_report(p: &FiniteProblem, terms: &[CdBound], variant: Variant) -> BoundReport {
    let n = p.n();
    let value = match variant {
        Variant::SampleConditioned => mean(terms.iter().map(|t| mean_sqrt_2i(&t.info)), n),
        _ => mean(terms.iter().map(|t| (2.0 * t.info.mean).sqrt()), n),
    };
    BoundReport::exact(
        BoundName::Cimi,
        variant,
        value,
        terms.iter().map(|t| t.info.mean).collect(),
        CgfKind::ClosedFormSubgaussian,
        n,
    )
}

/// CIMI bound for losses in `[0, 1]`: `(1/n) sum_i E[sqrt(2 I_{Z^+-}(W; R_i))]`
/// (sample-conditioned) or `(1/n) sum_i sqrt(2 I(W; R_i | Z^+-))` (averaged).
pub fn cimi_bound(p: &FiniteProblem, variant: Variant, opts: &EngineOptions) -> Result<BoundReport> {
    check_variant(variant, &[Variant::SampleConditioned, Variant::Averaged])?;
    require_unit_range(p)?;
    let infos = (0..p.n())
        .map(|i| cimi_info(p, i, opts))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<CdBound> = infos
        .into_iter()
        .map(|info| CdBound { gap: f64::NAN, strong: f64::NAN, weak: f64::NAN, info })
        .collect();
    Ok(cimi_report(p, &terms, variant))
}

fn cimi_info(p: &FiniteProblem, i: usize, opts: &EngineOptions) -> Result<SampleConditionedMI> {
    sample_conditioned_mi(&supersample_joint(p, Selector::One(i), Conditioning::Table, opts.budget)?)
}

fn icimi_report(p: &FiniteProblem, terms: &[CdBound], variant: Variant) -> BoundReport {
    let n = p.n();
    let value = match variant {
        Variant::SampleConditioned => mean(terms.iter().map(|t| t.strong), n),
        _ => mean(terms.iter().map(|t| t.weak), n),
    };
    BoundReport::exact(
        BoundName::Icimi,
        variant,
        value,
        terms.iter().map(|t| t.info.mean).collect(),
        CgfKind::ExactFinite,
        n,
    )
}

/// ICIMI bound with the exact CGF of `G~_i` given `Z_i^+-`.
pub fn icimi_bound(p: &FiniteProblem, variant: Variant, opts: &EngineOptions) -> Result<BoundReport> {
    check_variant(variant, &[Variant::SampleConditioned, Variant::Averaged])?;
    Ok(icimi_report(p, &per_index(p, opts, icimi_terms)?, variant))
}

fn icimi_bounded_report(p: &FiniteProblem, terms: &[CdBound], a: f64, b: f64, variant: Variant) -> BoundReport {
    let n = p.n();
    let inner = match variant {
        Variant::SampleConditioned => mean(terms.iter().map(|t| mean_sqrt_2i(&t.info)), n),
        _ => mean(terms.iter().map(|t| (2.0 * t.info.mean).sqrt()), n),
    };
    BoundReport::exact(
        BoundName::IcimiBounded,
        variant,
        (b - a) * inner,
        terms.iter().map(|t| t.info.mean).collect(),
        CgfKind::ClosedFormSubgaussian,
        n,
    )
}

fn check_loss_interval(p: &FiniteProblem, a: f64, b: f64) -> Result<()> {
    let (lo, hi) = p.loss_range();
    if !(a <= b) || lo < a || hi > b {
        return domain(format!("losses span [{lo}, {hi}], not inside [{a}, {b}]"));
    }
    Ok(())
}

/// ICIMI bound for losses in `[a, b]`:
/// `((b - a)/n) sum_i E[sqrt(2 I_{Z_i^+-}(W; R_i))]` (sample-conditioned) or
/// `((b - a)/n) sum_i sqrt(2 I(W; R_i | Z_i^+-))` (averaged).
pub fn icimi_bounded_loss(p: &FiniteProblem, a: f64, b: f64, variant: Variant, opts: &EngineOptions) -> Result<BoundReport> {
    check_variant(variant, &[Variant::SampleConditioned, Variant::Averaged])?;
    check_loss_interval(p, a, b)?;
    let terms = (0..p.n())
        .map(|i| {
            let joint = supersample_joint(p, Selector::One(i), Conditioning::Column(i), opts.budget)?;
            Ok(CdBound { gap: f64::NAN, strong: f64::NAN, weak: f64::NAN, info: sample_conditioned_mi(&joint)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(icimi_bounded_report(p, &terms, a, b, variant))
}

fn strengthened_cmi_report(p: &FiniteProblem, t: &CdBound, variant: Variant) -> BoundReport {
    let value = match variant {
        Variant::SampleConditioned => t.strong,
        _ => t.weak,
    };
    BoundReport::exact(BoundName::CmiStrengthened, variant, value, vec![t.info.mean], CgfKind::ExactFinite, p.n())
}

/// `E[Psi*^-1_{E~|Z^+-}(I_{Z^+-}(W; R_[n]))]` (sample-conditioned) or the
/// averaged-CGF form.
pub fn strengthened_cmi(p: &FiniteProblem, variant: Variant, opts: &EngineOptions) -> Result<BoundReport> {
    check_variant(variant, &[Variant::SampleConditioned, Variant::Averaged])?;
    Ok(strengthened_cmi_report(p, &cmi_terms(p, opts)?, variant))
}

fn strengthened_cimi_report(p: &FiniteProblem, terms: &[CdBound], variant: Variant) -> BoundReport {
    let n = p.n();
    let value = match variant {
        Variant::SampleConditioned => mean(terms.iter().map(|t| t.strong), n),
        _ => mean(terms.iter().map(|t| t.weak), n),
    };
    BoundReport::exact(
        BoundName::CimiStrengthened,
        variant,
        value,
        terms.iter().map(|t| t.info.mean).collect(),
        CgfKind::ExactFinite,
        n,
    )
}

/// `(1/n) sum_i E[Psi*^-1_{E~_i|Z^+-}(I_{Z^+-}(W; R_i))]` or its averaged form.
pub fn strengthened_cimi(p: &FiniteProblem, variant: Variant, opts: &EngineOptions) -> Result<BoundReport> {
    check_variant(variant, &[Variant::SampleConditioned, Variant::Averaged])?;
    Ok(strengthened_cimi_report(p, &per_index(p, opts, cimi_terms)?, variant))
}

/// Every decoupling term of a finite problem, computed once.
#[derive(Debug, Clone)]
pub struct FiniteTerms {
    pub mi: CdBound,
    pub imi: Vec<CdBound>,
    pub cmi: CdBound,
    pub cimi: Vec<CdBound>,
    pub icimi: Vec<CdBound>,
}

impl FiniteTerms {
    pub fn compute(p: &FiniteProblem, opts: &EngineOptions) -> Result<Self> {
        Ok(Self {
            mi: mi_terms(p, opts)?,
            imi: per_index(p, opts, imi_terms)?,
            cmi: cmi_terms(p, opts)?,
            cimi: per_index(p, opts, cimi_terms)?,
            icimi: per_index(p, opts, icimi_terms)?,
        })
    }
}

/// All bound reports of a finite problem. Reports that need `l in [0, 1]`
/// are included only when the loss table satisfies it.
pub fn all_bounds(p: &FiniteProblem, opts: &EngineOptions) -> Result<Vec<BoundReport>> {
    let t = FiniteTerms::compute(p, opts)?;
    Ok(reports_from_terms(p, &t))
}

pub fn reports_from_terms(p: &FiniteProblem, t: &FiniteTerms) -> Vec<BoundReport> {
    let n = p.n();
    let (lo, hi) = p.loss_range();
    let mut out = Vec::new();
    out.push(mi_standard(p, t.mi.info.mean, None).expect("default sub-Gaussian parameter is valid"));
    out.push(BoundReport::exact(BoundName::Mi, Variant::Conjugate, t.mi.weak, vec![t.mi.info.mean], CgfKind::ExactFinite, n));
    out.push(imi_report(p, &t.imi));
    out.push(cmi_standard(p, t.cmi.info.mean, None).expect("computed differences are valid"));
    out.push(cmi_specialization_report(p, t.cmi.info.mean));
    if in_unit_range(p) {
        out.push(cimi_report(p, &t.cimi, Variant::SampleConditioned));
        out.push(cimi_report(p, &t.cimi, Variant::Averaged));
    }
    out.push(icimi_report(p, &t.icimi, Variant::SampleConditioned));
    out.push(icimi_report(p, &t.icimi, Variant::Averaged));
    out.push(icimi_bounded_report(p, &t.icimi, lo, hi, Variant::SampleConditioned));
    out.push(icimi_bounded_report(p, &t.icimi, lo, hi, Variant::Averaged));
    out.push(strengthened_cmi_report(p, &t.cmi, Variant::SampleConditioned));
    out.push(strengthened_cmi_report(p, &t.cmi, Variant::Averaged));
    out.push(strengthened_cimi_report(p, &t.cimi, Variant::SampleConditioned));
    out.push(strengthened_cimi_report(p, &t.cimi, Variant::Averaged));
    out
}

/// One checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonPair {
    pub lhs_name: String,
    pub rhs_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub pairs: Vec<ComparisonPair>,
    /// Whether the bounded-loss orderings were checked (`l in [0, 1]`).
    pub bounded_suite: bool,
}

impl BoundComparison {
    pub fn violations(&self) -> Vec<&ComparisonPair> {
        self.pairs.iter().filter(|p| !p.holds).collect()
    }
}

/// Slack allowed in the comparisons, covering summation and inversion error.
pub const COMPARISON_TOL: f64 = 1e-9;

fn pair(lhs_name: String, lhs: f64, rhs_name: String, rhs: f64) -> ComparisonPair {
    ComparisonPair {
        holds: lhs <= rhs + COMPARISON_TOL,
        lhs_name,
        rhs_name,
        lhs,
        rhs,
    }
}

/// Information-term orderings (always) and bound orderings for losses in
/// `[0, 1]`.
pub fn compare_bounds(p: &FiniteProblem, opts: &EngineOptions) -> Result<BoundComparison> {
    let t = FiniteTerms::compute(p, opts)?;
    Ok(compare_terms(p, &t))
}

pub fn compare_terms(p: &FiniteProblem, t: &FiniteTerms) -> BoundComparison {
    let mut pairs = Vec::new();
    for i in 0..p.n() {
        let ind = t.icimi[i].info.mean;
        pairs.push(pair(format!("I(W;R_{i}|Z_{i}^pm)"), ind, format!("I(W;R_{i}|Z^pm)"), t.cimi[i].info.mean));
        pairs.push(pair(format!("I(W;R_{i}|Z_{i}^pm)"), ind, format!("I(W;Z_{i})"), t.imi[i].info.mean));
    }
    let sum_imi: f64 = t.imi.iter().map(|b| b.info.mean).sum();
    let sum_cimi: f64 = t.cimi.iter().map(|b| b.info.mean).sum();
    pairs.push(pair("sum_i I(W;Z_i)".into(), sum_imi, "I(W;Z_[n])".into(), t.mi.info.mean));
    pairs.push(pair("sum_i I(W;R_i|Z^pm)".into(), sum_cimi, "I(W;R_[n]|Z^pm)".into(), t.cmi.info.mean));
    pairs.push(pair("I(W;R_[n]|Z^pm)".into(), t.cmi.info.mean, "I(W;Z_[n])".into(), t.mi.info.mean));
    let bounded = in_unit_range(p);
    if bounded {
        let reports = reports_from_terms(p, t);
        let get = |name: BoundName, v: Variant| {
            reports
                .iter()
                .find(|r| r.name == name && r.variant == v)
                .map(|r| r.value)
                .expect("bounded suite reports are present")
        };
        let label = |name: BoundName, v: Variant| format!("{name}[{v}]");
        let unit_cmi = (2.0 * t.cmi.info.mean / p.n() as f64).sqrt();
        pairs.push(pair(
            label(BoundName::IcimiBounded, Variant::Averaged),
            get(BoundName::IcimiBounded, Variant::Averaged),
            label(BoundName::Cimi, Variant::Averaged),
            get(BoundName::Cimi, Variant::Averaged),
        ));
        pairs.push(pair(
            label(BoundName::Cimi, Variant::Averaged),
            get(BoundName::Cimi, Variant::Averaged),
            "CMI[specialization, b - a = 1]".into(),
            unit_cmi,
        ));
        let jensen = [BoundName::Cimi, BoundName::Icimi, BoundName::IcimiBounded, BoundName::CmiStrengthened, BoundName::CimiStrengthened];
        for name in jensen {
            pairs.push(pair(
                label(name, Variant::SampleConditioned),
                get(name, Variant::SampleConditioned),
                label(name, Variant::Averaged),
                get(name, Variant::Averaged),
            ));
        }
        pairs.push(pair(
            label(BoundName::Icimi, Variant::SampleConditioned),
            get(BoundName::Icimi, Variant::SampleConditioned),
            label(BoundName::IcimiBounded, Variant::SampleConditioned),
            get(BoundName::IcimiBounded, Variant::SampleConditioned),
        ));
    }
    BoundComparison {
        pairs,
        bounded_suite: bounded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecouplingRow {
    pub approach: BoundName,
    pub x: &'static str,
    pub y: &'static str,
    pub u: &'static str,
    pub f: &'static str,
    /// Mean over `i` for individual approaches.
    pub info_term: f64,
    pub general_bound: f64,
    /// `None` unless the loss lies in `[0, 1]`.
    pub special_case: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecouplingTable {
    pub n: usize,
    pub rows: Vec<DecouplingRow>,
}

/// Side-by-side view of the five approaches with their decoupling choices.
pub fn decoupling_table(p: &FiniteProblem, opts: &EngineOptions) -> Result<DecouplingTable> {
    let t = FiniteTerms::compute(p, opts)?;
    Ok(decoupling_table_from_terms(p, &t))
}

pub fn decoupling_table_from_terms(p: &FiniteProblem, t: &FiniteTerms) -> DecouplingTable {
    let n = p.n();
    let unit = in_unit_range(p);
    let avg_info = |v: &[CdBound]| mean(v.iter().map(|b| b.info.mean), n);
    let avg_weak = |v: &[CdBound]| mean(v.iter().map(|b| b.weak), n);
    let special = |x: f64| unit.then_some(x);
    let rows = vec![
        DecouplingRow {
            approach: BoundName::Mi,
            x: "W",
            y: "Z_[n]",
            u: "",
            f: "(1/n) sum_i l(W, Z_i)",
            info_term: t.mi.info.mean,
            general_bound: t.mi.weak,
            special_case: special((t.mi.info.mean / (2.0 * n as f64)).sqrt()),
            note: None,
        },
        DecouplingRow {
            approach: BoundName::Imi,
            x: "W",
            y: "Z_i",
            u: "",
            f: "l(W, Z_i)",
            info_term: avg_info(&t.imi),
            general_bound: avg_weak(&t.imi),
            special_case: special(mean(t.imi.iter().map(|b| (0.5 * b.info.mean).sqrt()), n)),
            note: None,
        },
        DecouplingRow {
            approach: BoundName::Cmi,
            x: "W",
            y: "R_[n]",
            u: "Z^pm_[n]",
            f: "(1/n) sum_i R_i (l(W, Z_i^-) - l(W, Z_i^+))",
            info_term: t.cmi.info.mean,
            general_bound: t.cmi.weak,
            special_case: special((2.0 * t.cmi.info.mean).sqrt()),
            note: Some(format!(
                "special case printed as sqrt(2 I); the theorem with Delta = 1 gives sqrt(2 I / n) = {}",
                (2.0 * t.cmi.info.mean / n as f64).sqrt()
            )),
        },
        DecouplingRow {
            approach: BoundName::Cimi,
            x: "W",
            y: "R_i",
            u: "Z^pm_[n]",
            f: "R_i (l(W, Z_i^-) - l(W, Z_i^+))",
            info_term: avg_info(&t.cimi),
            general_bound: avg_weak(&t.cimi),
            special_case: special(mean(t.cimi.iter().map(|b| (2.0 * b.info.mean).sqrt()), n)),
            note: None,
        },
        DecouplingRow {
            approach: BoundName::Icimi,
            x: "W",
            y: "R_i",
            u: "Z_i^pm",
            f: "R_i (l(W, Z_i^-) - l(W, Z_i^+))",
            info_term: avg_info(&t.icimi),
            general_bound: avg_weak(&t.icimi),
            special_case: special(mean(t.icimi.iter().map(|b| (2.0 * b.info.mean).sqrt()), n)),
            note: None,
        },
    ];
    DecouplingTable { n, rows }
}

impl fmt::Display for DecouplingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:<2} {:<6} {:<9} {:<45} {:>14} {:>14} {:>14}",
            "bound", "X", "Y", "U", "F", "info (nats)", "bound", "l in [0,1]"
        )?;
        for r in &self.rows {
            let special = r.special_case.map_or("-".to_string(), |v| format!("{v:.6e}"));
            writeln!(
                f,
                "{:<6} {:<2} {:<6} {:<9} {:<45} {:>14.6e} {:>14.6e} {:>14}",
                r.approach.as_str(),
                r.x,
                r.y,
                r.u,
                r.f,
                r.info_term,
                r.general_bound,
                special
            )?;
        }
        for r in &self.rows {
            if let Some(note) = &r.note {
                writeln!(f, "note ({}): {note}", r.approach)?;
            }
        }
        Ok(())
    }
}

/// Unit for information columns on output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn from_nats(&self, nats: f64) -> f64 {
        match self {
            Self::Nats => nats,
            Self::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn info_column(&self) -> &'static str {
        match self {
            Self::Nats => "info_term_nats",
            Self::Bits => "info_term_bits",
        }
    }
}

/// Writes reports as CSV: `n, bound_name, variant, info_term_<unit>, value,
/// std_error, method, flags`.
pub fn write_reports_csv<W: Write>(reports: &[BoundReport], units: Units, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Numeric(format!("writing CSV: {e}"));
    w.write_record(["n", "bound_name", "variant", units.info_column(), "value", "std_error", "method", "flags"])
        .map_err(io)?;
    for r in reports {
        w.write_record([
            r.n.to_string(),
            r.name.to_string(),
            r.variant.to_string(),
            units.from_nats(r.info_summary()).to_string(),
            r.value.to_string(),
            r.std_error.to_string(),
            r.method.as_str().to_string(),
            r.flags.labels(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("writing CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FiniteDistribution, GaussianProblem};
    use crate::rng;
    use rand::Rng;

    fn dist(r: &mut impl Rng, k: usize) -> FiniteDistribution {
        let raw: Vec<f64> = (0..k).map(|_| -r.random::<f64>().ln()).collect();
        let s: f64 = raw.iter().sum();
        FiniteDistribution::new(raw.into_iter().map(|x| x / s).collect()).unwrap()
    }

    fn random_problem(r: &mut impl Rng, kz: usize, kw: usize, n: usize) -> FiniteProblem {
        let xi = dist(r, kz);
        let loss: Vec<Vec<f64>> = (0..kw).map(|_| (0..kz).map(|_| r.random()).collect()).collect();
        let kernel = (0..kz.pow(n as u32)).map(|_| dist(r, kw)).collect();
        FiniteProblem::new(xi, loss, kernel, n).unwrap()
    }

    fn constant_learner() -> FiniteProblem {
        FiniteProblem::from_learner(
            FiniteDistribution::new(vec![0.4, 0.6]).unwrap(),
            vec![vec![0.1, 0.8], vec![0.7, 0.3]],
            2,
            |_| vec![0.25, 0.75],
        )
        .unwrap()
    }

    #[test]
    fn constant_learner_gives_zero_everywhere() {
        let p = constant_learner();
        let reports = all_bounds(&p, &EngineOptions::default()).unwrap();
        assert!(reports.len() >= 15);
        for r in &reports {
            assert!(r.value.abs() < 1e-12, "{} {}: {}", r.name, r.variant, r.value);
            assert!(r.info_terms.iter().all(|i| i.abs() < 1e-12));
        }
        let table = decoupling_table(&p, &EngineOptions::default()).unwrap();
        for row in &table.rows {
            assert!(row.general_bound.abs() < 1e-12);
            assert!(row.special_case.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_are_sound_and_ordered() {
        let mut r = rng::master(21);
        let opts = EngineOptions::default();
        for trial in 0..15 {
            let (kz, kw, n) = [(2, 2, 1), (2, 3, 2), (3, 2, 2), (2, 2, 3)][trial % 4];
            let p = random_problem(&mut r, kz, kw, n);
            let gen = p.exact_gen_error();
            let reports = all_bounds(&p, &opts).unwrap();
            for rep in &reports {
                assert!(rep.value >= gen - 1e-9, "{} {} = {} < {gen}", rep.name, rep.variant, rep.value);
                assert!(rep.value >= 0.0);
            }
            let cmp = compare_bounds(&p, &opts).unwrap();
            assert!(cmp.bounded_suite);
            assert!(cmp.violations().is_empty(), "{:?}", cmp.violations());
        }
    }

    #[test]
    fn cd_gap_matches_generalization_terms() {
        let mut r = rng::master(22);
        let p = random_problem(&mut r, 3, 2, 2);
        let opts = EngineOptions::default();
        let t = FiniteTerms::compute(&p, &opts).unwrap();
        let gen = p.exact_gen_error();
        assert!((t.mi.gap - gen).abs() < 1e-13);
        assert!((t.cmi.gap - gen).abs() < 1e-13);
        let terms = p.individual_gen_terms();
        for i in 0..2 {
            assert!((t.imi[i].gap - terms[i]).abs() < 1e-13);
            assert!((t.cimi[i].gap - terms[i]).abs() < 1e-13);
            assert!((t.icimi[i].gap - terms[i]).abs() < 1e-13);
            for b in [&t.imi[i], &t.cimi[i], &t.icimi[i]] {
                assert!(b.gap <= b.strong + 1e-9 && b.strong <= b.weak + 1e-9);
            }
        }
    }

    #[test]
    fn individual_calls_match_all_bounds() {
        let mut r = rng::master(23);
        let p = random_problem(&mut r, 2, 3, 2);
        let opts = EngineOptions::default();
        let all = all_bounds(&p, &opts).unwrap();
        let find = |name, v| all.iter().find(|x| x.name == name && x.variant == v).unwrap().value;
        let lp = LearningProblem::Finite(p.clone());
        assert_eq!(mi_bound(&lp, None, &opts).unwrap().value, find(BoundName::Mi, Variant::Standard));
        assert_eq!(mi_conjugate_bound(&p, &opts).unwrap().value, find(BoundName::Mi, Variant::Conjugate));
        assert_eq!(imi_bound(&lp, &opts).unwrap().value, find(BoundName::Imi, Variant::Conjugate));
        assert_eq!(cmi_bound(&lp, None, &opts).unwrap().value, find(BoundName::Cmi, Variant::Standard));
        for v in [Variant::SampleConditioned, Variant::Averaged] {
            assert_eq!(cimi_bound(&p, v, &opts).unwrap().value, find(BoundName::Cimi, v));
            assert_eq!(icimi_bound(&p, v, &opts).unwrap().value, find(BoundName::Icimi, v));
            assert_eq!(strengthened_cmi(&p, v, &opts).unwrap().value, find(BoundName::CmiStrengthened, v));
            assert_eq!(strengthened_cimi(&p, v, &opts).unwrap().value, find(BoundName::CimiStrengthened, v));
            let (lo, hi) = p.loss_range();
            assert_eq!(icimi_bounded_loss(&p, lo, hi, v, &opts).unwrap().value, find(BoundName::IcimiBounded, v));
        }
    }

    #[test]
    fn table_rows_match_reports() {
        let mut r = rng::master(24);
        let p = random_problem(&mut r, 2, 2, 2);
        let opts = EngineOptions::default();
        let table = decoupling_table(&p, &opts).unwrap();
        let t = FiniteTerms::compute(&p, &opts).unwrap();
        assert_eq!(table.rows[0].general_bound, mi_conjugate_bound(&p, &opts).unwrap().value);
        assert_eq!(table.rows[2].general_bound, strengthened_cmi(&p, Variant::Averaged, &opts).unwrap().value);
        assert_eq!(table.rows[3].general_bound, strengthened_cimi(&p, Variant::Averaged, &opts).unwrap().value);
        assert_eq!(table.rows[4].general_bound, icimi_bound(&p, Variant::Averaged, &opts).unwrap().value);
        // closed-form special-case column computed from the info terms
        let i_full = t.mi.info.mean;
        assert!((table.rows[0].special_case.unwrap() - (i_full / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(table.rows[4].special_case.unwrap(), cimi_like(&t.icimi));
        assert!(table.rows[2].note.is_some());
        assert!(format!("{table}").contains("ICIMI"));
    }

    fn cimi_like(terms: &[CdBound]) -> f64 {
        terms.iter().map(|b| (2.0 * b.info.mean).sqrt()).sum::<f64>() / terms.len() as f64
    }

    #[test]
    fn icimi_bounded_hand_enumeration() {
        // n = 1, Z uniform on {0, 1}, W = Z, loss l(w, z) = [w != z].
        let p = FiniteProblem::from_learner(
            FiniteDistribution::uniform(2).unwrap(),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            1,
            |z| if z[0] == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
        )
        .unwrap();
        // columns (0,1) and (1,0) each with probability 1/4 reveal R fully
        // (I = ln 2); equal columns reveal nothing.
        let expected = 0.5 * (2.0 * std::f64::consts::LN_2).sqrt();
        let opts = EngineOptions::default();
        let line1 = icimi_bounded_loss(&p, 0.0, 1.0, Variant::SampleConditioned, &opts).unwrap();
        assert!((line1.value - expected).abs() < 1e-14);
        let line2 = icimi_bounded_loss(&p, 0.0, 1.0, Variant::Averaged, &opts).unwrap();
        assert!((line2.value - std::f64::consts::LN_2.sqrt()).abs() < 1e-14);
        assert!(line1.value <= line2.value);
        assert_eq!(icimi_bounded_loss(&p, 0.5, 0.5, Variant::Averaged, &opts).unwrap_err(), Error::Domain("losses span [0, 1], not inside [0.5, 0.5]".into()));
        assert!(p.exact_gen_error() <= line1.value);
    }

    #[test]
    fn constant_loss_interval_gives_zero() {
        let p = FiniteProblem::from_learner(
            FiniteDistribution::uniform(2).unwrap(),
            vec![vec![0.3, 0.3], vec![0.3, 0.3]],
            2,
            |z| if z[0] == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
        )
        .unwrap();
        let r = icimi_bounded_loss(&p, 0.3, 0.3, Variant::SampleConditioned, &EngineOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn gaussian_dispatch() {
        let g = LearningProblem::Gaussian(GaussianProblem::new(0.0, 1.0, 10).unwrap());
        let opts = EngineOptions::default();
        let mi = mi_bound(&g, None, &opts).unwrap();
        assert!(mi.value.is_infinite() && mi.flags.infinite);
        let cmi = cmi_bound(&g, None, &opts).unwrap();
        assert!(cmi.flags.inapplicable && cmi.value.is_nan());
        let imi = imi_bound(&g, &opts).unwrap();
        let closed = (2.0 * (11.0f64 / 10.0).powi(2) * (10.0f64 / 9.0).ln()).sqrt();
        assert!((imi.value - closed).abs() < 1e-12);
    }

    #[test]
    fn cimi_rejects_out_of_range_losses() {
        let p = FiniteProblem::from_learner(
            FiniteDistribution::uniform(2).unwrap(),
            vec![vec![0.0, 2.0]],
            1,
            |_| vec![1.0],
        )
        .unwrap();
        assert!(matches!(cimi_bound(&p, Variant::Averaged, &EngineOptions::default()), Err(Error::Domain(_))));
        assert!(strengthened_cimi(&p, Variant::Averaged, &EngineOptions::default()).is_ok());
    }

    #[test]
    fn delta_table_must_dominate() {
        let p = constant_learner();
        let small = vec![vec![0.0, 0.1], vec![0.1, 0.0]];
        assert!(expected_delta_squared(&p, Some(&small)).is_err());
        let big = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!((expected_delta_squared(&p, Some(&big)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_header_and_units() {
        let p = constant_learner();
        let reports = all_bounds(&p, &EngineOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&reports, Units::Bits, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,bound_name,variant,info_term_bits,value,std_error,method,flags\n"));
        assert_eq!(text.lines().count(), reports.len() + 1);
        assert!((Units::Bits.from_nats(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
    }
}
