//! Brute-force enumeration of the supersample world and a second,
//! independent evaluation of every finite bound.
//!
//! Nothing here goes through [`crate::bounds`], [`crate::supersample`] or the
//! golden-section inversion in [`crate::cgf`]. Conditional laws are built by
//! grouping enumerated states, and inverse conjugates are found by solving
//! `lambda psi'(lambda) - psi(lambda) = eta` for `lambda` by bisection.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundName, BoundReport, EvalMethod, Flags, Variant};
use crate::cgf::CgfKind;
use crate::error::{domain, Error, Result};
use crate::info::FiniteJoint;
use crate::model::{FiniteDistribution, FiniteProblem};
use crate::rng::substream;

/// One enumerated outcome: supersample table, selectors, hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// `table[i] = [z_i^-, z_i^+]`.
    pub table: Vec<[usize; 2]>,
    /// `true` when `R_i = +1` (the `Z_i^+` entry is used for training).
    pub plus: Vec<bool>,
    pub w: usize,
    pub prob: f64,
}

impl WorldState {
    pub fn training(&self) -> Vec<usize> {
        self.table
            .iter()
            .zip(&self.plus)
            .map(|(c, &s)| if s { c[1] } else { c[0] })
            .collect()
    }

    fn selector_bits(&self) -> Vec<usize> {
        self.plus.iter().map(|&s| usize::from(s)).collect()
    }

    fn flat_table(&self) -> Vec<usize> {
        self.table.iter().flat_map(|c| [c[0], c[1]]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EnumeratedWorld {
    pub states: Vec<WorldState>,
    pub n: usize,
    pub num_z: usize,
    pub num_w: usize,
    pub budget: u128,
}

/// Number of states `|Z|^(2n) 2^n |W|`, saturating.
pub fn world_size(num_z: usize, num_w: usize, n: usize) -> u128 {
    let mut s = num_w as u128;
    for _ in 0..n {
        s = s.saturating_mul(num_z as u128 * num_z as u128 * 2);
    }
    s
}

/// Lists every `(Z^+-, R, W)` with its probability.
pub fn enumerate_world(p: &FiniteProblem, budget: u128) -> Result<EnumeratedWorld> {
    let (n, kz, kw) = (p.n(), p.num_z(), p.num_w());
    let states_count = world_size(kz, kw, n);
    if states_count > budget {
        return Err(Error::Resource {
            states: states_count,
            budget,
        });
    }
    let xi = p.xi().probs();
    let half_n = 0.5f64.powi(n as i32);
    let mut states = Vec::with_capacity(states_count as usize);
    let mut digits = vec![0usize; 2 * n];
    loop {
        let table: Vec<[usize; 2]> = (0..n).map(|i| [digits[2 * i], digits[2 * i + 1]]).collect();
        let p_table: f64 = digits.iter().map(|&d| xi[d]).product();
        for code in 0..1usize << n {
            let plus: Vec<bool> = (0..n).map(|i| code & (1 << i) != 0).collect();
            let train_index = table
                .iter()
                .zip(&plus)
                .fold(0usize, |acc, (c, &s)| acc * kz + if s { c[1] } else { c[0] });
            let row = p.kernel()[train_index].probs();
            for (w, &pw) in row.iter().enumerate() {
                states.push(WorldState {
                    table: table.clone(),
                    plus: plus.clone(),
                    w,
                    prob: p_table * half_n * pw,
                });
            }
        }
        // odometer over the 2n table digits
        let mut k = 2 * n;
        loop {
            if k == 0 {
                return Ok(EnumeratedWorld {
                    states,
                    n,
                    num_z: kz,
                    num_w: kw,
                    budget,
                });
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < kz {
                break;
            }
            digits[k] = 0;
        }
    }
}

impl EnumeratedWorld {
    pub fn total_probability(&self) -> f64 {
        self.states.iter().map(|s| s.prob).sum()
    }

    /// Law of the selector vector, indexed by `sum_i [R_i = +1] 2^i`.
    pub fn selector_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.n];
        for s in &self.states {
            let code: usize = s.plus.iter().enumerate().map(|(i, &b)| usize::from(b) << i).sum();
            out[code] += s.prob;
        }
        out
    }

    /// Law of the `i`-th training sample.
    pub fn training_marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_z];
        for s in &self.states {
            out[s.training()[i]] += s.prob;
        }
        out
    }

    pub fn w_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_w];
        for s in &self.states {
            out[s.w] += s.prob;
        }
        out
    }

    /// `E[L_xi(W) - L_S(W)]` summed over states.
    pub fn gen_error(&self, p: &FiniteProblem) -> f64 {
        let xi = p.xi().probs();
        let n = self.n as f64;
        self.states
            .iter()
            .map(|s| {
                let pop: f64 = xi.iter().enumerate().map(|(z, q)| q * p.loss(s.w, z)).sum();
                let emp: f64 = s.training().iter().map(|&z| p.loss(s.w, z)).sum::<f64>() / n;
                s.prob * (pop - emp)
            })
            .sum()
    }
}

/// Finite law given by atoms; `values` are not required to be centered.
#[derive(Debug, Clone)]
struct Atoms {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl Atoms {
    fn centered(mut self) -> Self {
        let total: f64 = self.probs.iter().sum();
        let mean: f64 = self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum::<f64>() / total;
        for p in self.probs.iter_mut() {
            *p /= total;
        }
        for v in self.values.iter_mut() {
            *v -= mean;
        }
        self
    }

    fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(psi, psi', lambda psi' - psi)` at `lambda` for centered atoms.
    fn psi(&self, lambda: f64) -> (f64, f64, f64) {
        let spread = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if lambda * spread < 0.5 {
            // e^u - 1 - u written out so the centered first moment cancels exactly
            let phi = |u: f64| {
                if u.abs() < 1e-3 {
                    u * u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u / 120.0)))
                } else {
                    u.exp_m1() - u
                }
            };
            let mut s = 0.0;
            let mut d = 0.0;
            for (v, p) in self.values.iter().zip(&self.probs) {
                s += p * phi(lambda * v);
                d += p * v * (lambda * v).exp_m1();
            }
            let (ps, pd) = (s.ln_1p(), d / (1.0 + s));
            (ps, pd, lambda * pd - ps)
        } else {
            let top = self.max();
            let mut z = 0.0;
            let mut d = 0.0;
            for (v, p) in self.values.iter().zip(&self.probs) {
                let e = p * (lambda * (v - top)).exp();
                z += e;
                d += e * (v - top);
            }
            (lambda * top + z.ln(), top + d / z, lambda * d / z - z.ln())
        }
    }

    /// `-ln P(X = max X)`, the limit of `lambda psi' - psi`.
    fn top_surprise(&self) -> f64 {
        let top = self.max();
        let mass: f64 = self
            .values
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| **v == top)
            .map(|(_, p)| p)
            .sum();
        -mass.ln()
    }
}

/// `inf_{lambda > 0} (eta + sum_k w_k psi_k(lambda)) / lambda` through the
/// stationarity condition.
fn inverse_conjugate(parts: &[(f64, Atoms)], eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let eval = |lambda: f64| {
        parts.iter().fold((0.0, 0.0, 0.0), |(s, d, g), (w, a)| {
            let (ps, pd, pg) = a.psi(lambda);
            (s + w * ps, d + w * pd, g + w * pg)
        })
    };
    let limit: f64 = parts.iter().map(|(w, a)| w * a.top_surprise()).sum();
    if eta >= limit {
        return parts.iter().map(|(w, a)| w * a.max()).sum();
    }
    let g = |s: f64| eval(s.exp()).2;
    let (mut lo, mut hi) = (-34.0f64, 34.0f64);
    if g(hi) < eta {
        lo = hi;
    } else if g(lo) < eta {
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < eta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        hi = lo;
    }
    let lambda = (0.5 * (lo + hi)).exp();
    let (ps, pd, _) = eval(lambda);
    pd.min((eta + ps) / lambda)
}

/// One conditioning value: `P(u)`, the conditional table over `(x, y)` and
/// `F` on every cell of the grid.
#[derive(Debug, Clone)]
struct Slice {
    pu: f64,
    ny: usize,
    p: Vec<f64>,
    f: Vec<f64>,
}

/// Both sides of the decoupling inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdTriple {
    /// `E[F] - E[F~]`.
    pub lhs: f64,
    /// `E_U[Psi*^-1_{F~|U}(I_U(X; Y))]`.
    pub mid: f64,
    /// `psibar*^-1(I(X; Y | U))`.
    pub rhs: f64,
    /// `I(X; Y | U)` in nats.
    pub info: f64,
}

impl CdTriple {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.mid + tol && self.mid <= self.rhs + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdLemmaCheck {
    /// With `F`.
    pub plus: CdTriple,
    /// With `-F`.
    pub minus: CdTriple,
}

impl CdLemmaCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.plus.holds(tol) && self.minus.holds(tol)
    }
}

struct SliceTerms {
    info_u: Vec<f64>,
    triple: CdTriple,
}

fn evaluate_slices(slices: &[Slice], sign: f64) -> SliceTerms {
    let mut info_u = Vec::with_capacity(slices.len());
    let mut parts = Vec::with_capacity(slices.len());
    let (mut lhs, mut mid, mut info) = (0.0, 0.0, 0.0);
    for s in slices {
        let nx = s.p.len() / s.ny;
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; s.ny];
        for x in 0..nx {
            for y in 0..s.ny {
                px[x] += s.p[x * s.ny + y];
                py[y] += s.p[x * s.ny + y];
            }
        }
        let mut iu = 0.0;
        let mut ef = 0.0;
        let mut atoms = Atoms {
            values: Vec::new(),
            probs: Vec::new(),
        };
        for x in 0..nx {
            for y in 0..s.ny {
                let c = s.p[x * s.ny + y];
                let f = sign * s.f[x * s.ny + y];
                if c > 0.0 {
                    iu += c * (c / (px[x] * py[y])).ln();
                    ef += c * f;
                }
                if px[x] > 0.0 && py[y] > 0.0 {
                    atoms.values.push(f);
                    atoms.probs.push(px[x] * py[y]);
                }
            }
        }
        if iu <= 16.0 * f64::EPSILON {
            iu = 0.0;
        }
        let ef_dec: f64 = atoms.values.iter().zip(&atoms.probs).map(|(v, p)| v * p).sum();
        let atoms = atoms.centered();
        lhs += s.pu * (ef - ef_dec);
        mid += s.pu * inverse_conjugate(&[(1.0, atoms.clone())], iu);
        info += s.pu * iu;
        info_u.push(iu);
        parts.push((s.pu, atoms));
    }
    let rhs = inverse_conjugate(&parts, info);
    SliceTerms {
        info_u,
        triple: CdTriple { lhs, mid, rhs, info },
    }
}

fn slices_from_joint(joint: &FiniteJoint, f: &[f64]) -> Result<Vec<Slice>> {
    let (dx, dy, du) = joint.dims();
    if f.len() != dx * dy * du {
        return domain("function table does not match the joint cells");
    }
    let mut out = Vec::new();
    for u in 0..du {
        let mut pu = 0.0;
        for x in 0..dx {
            for y in 0..dy {
                pu += joint.prob(x, y, u);
            }
        }
        if pu <= 0.0 {
            continue;
        }
        let mut p = Vec::with_capacity(dx * dy);
        let mut fv = Vec::with_capacity(dx * dy);
        for x in 0..dx {
            for y in 0..dy {
                p.push(joint.prob(x, y, u) / pu);
                fv.push(f[(x * dy + y) * du + u]);
            }
        }
        out.push(Slice { pu, ny: dy, p, f: fv });
    }
    Ok(out)
}

/// Evaluates all three members of the decoupling inequality for `F` and for
/// `-F`. `f` is laid out like the joint's cells, `x` slowest and `u` fastest.
pub fn cd_lemma_check(joint: &FiniteJoint, f: &[f64]) -> Result<CdLemmaCheck> {
    let slices = slices_from_joint(joint, f)?;
    Ok(CdLemmaCheck {
        plus: evaluate_slices(&slices, 1.0).triple,
        minus: evaluate_slices(&slices, -1.0).triple,
    })
}

/// Groups world states by a conditioning key and an outcome key. `f(w, y, u)`
/// is evaluated on the full `(w, y)` grid of each slice.
fn world_slices(
    world: &EnumeratedWorld,
    ykey: impl Fn(&WorldState) -> Vec<usize>,
    ukey: impl Fn(&WorldState) -> Vec<usize>,
    f: impl Fn(usize, &[usize], &[usize]) -> f64,
) -> Vec<Slice> {
    let mut groups: HashMap<Vec<usize>, (usize, HashMap<Vec<usize>, usize>, Vec<(usize, usize, f64)>)> = HashMap::new();
    let mut order: Vec<Vec<usize>> = Vec::new();
    for s in world.states.iter().filter(|s| s.prob > 0.0) {
        let u = ukey(s);
        let entry = groups.entry(u.clone()).or_insert_with(|| {
            order.push(u.clone());
            (order.len() - 1, HashMap::new(), Vec::new())
        });
        let y = ykey(s);
        let next = entry.1.len();
        let yi = *entry.1.entry(y).or_insert(next);
        entry.2.push((s.w, yi, s.prob));
    }
    let kw = world.num_w;
    order
        .iter()
        .map(|u| {
            let (_, ymap, cells) = &groups[u];
            let ny = ymap.len();
            let mut ykeys = vec![Vec::new(); ny];
            for (k, &i) in ymap {
                ykeys[i] = k.clone();
            }
            let mut p = vec![0.0; kw * ny];
            for &(w, y, q) in cells {
                p[w * ny + y] += q;
            }
            let pu: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v /= pu;
            }
            let mut fv = Vec::with_capacity(kw * ny);
            for w in 0..kw {
                for yk in &ykeys {
                    fv.push(f(w, yk, u));
                }
            }
            Slice { pu, ny, p, f: fv }
        })
        .collect()
}

/// Every information term and decoupling triple of a finite problem,
/// recomputed from the enumerated world.
#[derive(Debug, Clone)]
pub struct OracleTerms {
    pub mi: CdTriple,
    pub imi: Vec<CdTriple>,
    pub cmi: CdTriple,
    pub cimi: Vec<CdTriple>,
    pub icimi: Vec<CdTriple>,
    /// Per-realization `I_U` for CIMI and ICIMI, with the `P(u)` weights.
    pub cimi_per_u: Vec<Vec<(f64, f64)>>,
    pub icimi_per_u: Vec<Vec<(f64, f64)>>,
    pub gen_error: f64,
}

fn with_weights(slices: &[Slice], info: &[f64]) -> Vec<(f64, f64)> {
    slices.iter().zip(info).map(|(s, &i)| (s.pu, i)).collect()
}

impl OracleTerms {
    pub fn compute(p: &FiniteProblem, budget: u128) -> Result<Self> {
        let world = enumerate_world(p, budget)?;
        let n = p.n();
        let nf = n as f64;
        let loss = |w: usize, z: usize| p.loss(w, z);
        let none = |_: &WorldState| Vec::new();

        let mi = evaluate_slices(
            &world_slices(&world, WorldState::training, none, |w, y, _| {
                y.iter().map(|&z| loss(w, z)).sum::<f64>() / nf
            }),
            -1.0,
        )
        .triple;
        let imi = (0..n)
            .map(|i| {
                evaluate_slices(
                    &world_slices(&world, |s| vec![s.training()[i]], none, |w, y, _| loss(w, y[0])),
                    -1.0,
                )
                .triple
            })
            .collect();
        let diff = |w: usize, bit: usize, u: &[usize], i: usize| {
            let sign = if bit == 1 { 1.0 } else { -1.0 };
            sign * (loss(w, u[2 * i]) - loss(w, u[2 * i + 1]))
        };
        let cmi = evaluate_slices(
            &world_slices(&world, WorldState::selector_bits, WorldState::flat_table, |w, y, u| {
                (0..n).map(|i| diff(w, y[i], u, i)).sum::<f64>() / nf
            }),
            1.0,
        )
        .triple;
        let mut cimi = Vec::with_capacity(n);
        let mut cimi_per_u = Vec::with_capacity(n);
        let mut icimi = Vec::with_capacity(n);
        let mut icimi_per_u = Vec::with_capacity(n);
        for i in 0..n {
            let sl = world_slices(
                &world,
                |s| vec![usize::from(s.plus[i])],
                WorldState::flat_table,
                |w, y, u| diff(w, y[0], u, i),
            );
            let t = evaluate_slices(&sl, 1.0);
            cimi_per_u.push(with_weights(&sl, &t.info_u));
            cimi.push(t.triple);
            let sl = world_slices(
                &world,
                |s| vec![usize::from(s.plus[i])],
                |s| vec![s.table[i][0], s.table[i][1]],
                |w, y, u| diff(w, y[0], u, 0),
            );
            let t = evaluate_slices(&sl, 1.0);
            icimi_per_u.push(with_weights(&sl, &t.info_u));
            icimi.push(t.triple);
        }
        Ok(Self {
            mi,
            imi,
            cmi,
            cimi,
            icimi,
            cimi_per_u,
            icimi_per_u,
            gen_error: world.gen_error(p),
        })
    }
}

fn report(name: BoundName, variant: Variant, value: f64, info_terms: Vec<f64>, kind: CgfKind, n: usize) -> BoundReport {
    BoundReport {
        name,
        variant,
        value,
        info_terms,
        conjugate_kind: kind,
        method: EvalMethod::Exact,
        std_error: 0.0,
        n,
        flags: Flags::default(),
        note: None,
    }
}

/// Every finite bound recomputed from the enumerated world, in the same
/// `(name, variant)` set the engine reports.
pub fn brute_force_bounds(p: &FiniteProblem, budget: u128) -> Result<Vec<BoundReport>> {
    let t = OracleTerms::compute(p, budget)?;
    Ok(bounds_from_oracle_terms(p, &t))
}

pub fn bounds_from_oracle_terms(p: &FiniteProblem, t: &OracleTerms) -> Vec<BoundReport> {
    use BoundName::*;
    use CgfKind::{ClosedFormSubgaussian as Closed, ExactFinite as Exact};
    let n = p.n();
    let nf = n as f64;
    let (kz, kw) = (p.num_z(), p.num_w());
    let all: Vec<f64> = (0..kw).flat_map(|w| (0..kz).map(move |z| (w, z))).map(|(w, z)| p.loss(w, z)).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xi = p.xi().probs();
    let mut ed2 = 0.0;
    for a in 0..kz {
        for b in 0..kz {
            let d = (0..kw).map(|w| (p.loss(w, a) - p.loss(w, b)).abs()).fold(0.0, f64::max);
            ed2 += xi[a] * xi[b] * d * d;
        }
    }
    let avg = |v: &[CdTriple], pick: fn(&CdTriple) -> f64| v.iter().map(pick).sum::<f64>() / nf;
    let infos = |v: &[CdTriple]| v.iter().map(|c| c.info).collect::<Vec<_>>();
    let root_mean = |per_u: &[Vec<(f64, f64)>]| {
        per_u
            .iter()
            .map(|terms| terms.iter().map(|(w, i)| w * (2.0 * i).sqrt()).sum::<f64>())
            .sum::<f64>()
            / nf
    };
    let root_avg = |v: &[CdTriple]| v.iter().map(|c| (2.0 * c.info).sqrt()).sum::<f64>() / nf;

    let mut out = vec![
        report(Mi, Variant::Standard, ((hi - lo).powi(2) / 2.0 / nf * t.mi.info).sqrt(), vec![t.mi.info], Closed, n),
        report(Mi, Variant::Conjugate, t.mi.rhs, vec![t.mi.info], Exact, n),
        report(Imi, Variant::Conjugate, avg(&t.imi, |c| c.rhs), infos(&t.imi), Exact, n),
        report(Cmi, Variant::Standard, (2.0 / nf * ed2 * t.cmi.info).sqrt(), vec![t.cmi.info], Closed, n),
        report(Cmi, Variant::Specialization, (hi - lo) * (2.0 * t.cmi.info / nf).sqrt(), vec![t.cmi.info], Closed, n),
    ];
    if lo >= 0.0 && hi <= 1.0 {
        out.push(report(Cimi, Variant::SampleConditioned, root_mean(&t.cimi_per_u), infos(&t.cimi), Closed, n));
        out.push(report(Cimi, Variant::Averaged, root_avg(&t.cimi), infos(&t.cimi), Closed, n));
    }
    out.extend([
        report(Icimi, Variant::SampleConditioned, avg(&t.icimi, |c| c.mid), infos(&t.icimi), Exact, n),
        report(Icimi, Variant::Averaged, avg(&t.icimi, |c| c.rhs), infos(&t.icimi), Exact, n),
        report(IcimiBounded, Variant::SampleConditioned, (hi - lo) * root_mean(&t.icimi_per_u), infos(&t.icimi), Closed, n),
        report(IcimiBounded, Variant::Averaged, (hi - lo) * root_avg(&t.icimi), infos(&t.icimi), Closed, n),
        report(CmiStrengthened, Variant::SampleConditioned, t.cmi.mid, vec![t.cmi.info], Exact, n),
        report(CmiStrengthened, Variant::Averaged, t.cmi.rhs, vec![t.cmi.info], Exact, n),
        report(CimiStrengthened, Variant::SampleConditioned, avg(&t.cimi, |c| c.mid), infos(&t.cimi), Exact, n),
        report(CimiStrengthened, Variant::Averaged, avg(&t.cimi, |c| c.rhs), infos(&t.cimi), Exact, n),
    ]);
    out
}

/// Largest `|engine - oracle|` over matching `(name, variant)` reports, or an
/// error naming a report present on one side only.
pub fn max_discrepancy(engine: &[BoundReport], oracle: &[BoundReport]) -> Result<f64> {
    if engine.len() != oracle.len() {
        return Err(Error::Invariant(format!(
            "engine produced {} reports, oracle {}",
            engine.len(),
            oracle.len()
        )));
    }
    let mut worst = 0.0f64;
    for e in engine {
        let o = oracle
            .iter()
            .find(|o| o.name == e.name && o.variant == e.variant)
            .ok_or_else(|| Error::Invariant(format!("oracle has no {} {}", e.name, e.variant)))?;
        let gap = (e.value - o.value).abs();
        if !(gap.is_finite() || e.value == o.value) {
            return Err(Error::Invariant(format!("{} {}: {} vs {}", e.name, e.variant, e.value, o.value)));
        }
        worst = worst.max(if e.value == o.value { 0.0 } else { gap });
    }
    Ok(worst)
}

/// Flat Dirichlet draw of length `k`.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomProblemOptions {
    pub max_z: usize,
    pub max_w: usize,
    pub max_n: usize,
    /// Losses uniform on `[0, 1]`; otherwise uniform on `[-2, 3]`.
    pub unit_loss: bool,
    /// Upper limit on [`world_size`].
    pub budget: u128,
}

impl Default for RandomProblemOptions {
    fn default() -> Self {
        Self {
            max_z: 3,
            max_w: 3,
            max_n: 3,
            unit_loss: true,
            budget: 20_000,
        }
    }
}

/// Random finite problem small enough to enumerate. A third of the draws use
/// a deterministic learner.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, opts: &RandomProblemOptions) -> Result<FiniteProblem> {
    if opts.max_z < 2 || opts.max_w < 1 || opts.max_n < 1 {
        return domain("random problems need |Z| >= 2, |W| >= 1, n >= 1");
    }
    loop {
        let kz = rng.random_range(2..=opts.max_z);
        let kw = rng.random_range(1..=opts.max_w);
        let n = rng.random_range(1..=opts.max_n);
        if world_size(kz, kw, n) > opts.budget {
            continue;
        }
        let xi = FiniteDistribution::new(random_simplex(rng, kz))?;
        let loss: Vec<Vec<f64>> = (0..kw)
            .map(|_| {
                (0..kz)
                    .map(|_| if opts.unit_loss { rng.random::<f64>() } else { rng.random_range(-2.0..3.0) })
                    .collect()
            })
            .collect();
        let deterministic = rng.random_range(0..3) == 0;
        let rows = kz.pow(n as u32);
        let kernel = (0..rows)
            .map(|_| {
                if deterministic {
                    FiniteDistribution::point(kw, rng.random_range(0..kw))
                } else {
                    FiniteDistribution::new(random_simplex(rng, kw))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        return FiniteProblem::new(xi, loss, kernel, n);
    }
}

/// A random `(joint, f)` pair for the decoupling check, serializable as a
/// reproducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdInstance {
    pub seed: u64,
    pub trial: u64,
    pub dims: Vec<usize>,
    pub table: Vec<f64>,
    pub f: Vec<f64>,
}

impl CdInstance {
    pub fn joint(&self) -> Result<FiniteJoint> {
        FiniteJoint::new(&self.dims, self.table.clone())
    }
}

/// Joint from a flat Dirichlet over `|X| |Y| |U|` cells, `f` uniform on
/// `[-1, 1]`. Trial `t` of seed `s` always gives the same instance.
pub fn random_cd_instance(seed: u64, trial: u64, max_alphabet: usize) -> Result<CdInstance> {
    if max_alphabet < 1 {
        return domain("alphabet sizes must be at least 1");
    }
    let mut rng = substream(seed, trial + 1);
    let dims: Vec<usize> = (0..3).map(|_| rng.random_range(1..=max_alphabet)).collect();
    let cells = dims.iter().product();
    let table = random_simplex(&mut rng, cells);
    let f = (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Ok(CdInstance {
        seed,
        trial,
        dims,
        table,
        f,
    })
}

#[derive(Debug, Clone)]
pub struct CdSweep {
    pub trials: u64,
    pub violations: Vec<(CdInstance, CdLemmaCheck)>,
    /// Largest `lhs - mid` and `mid - rhs` seen, over both directions.
    pub worst_slack: f64,
}

/// Checks the decoupling inequality on `trials` random instances in parallel.
pub fn cd_check_sweep(trials: u64, max_alphabet: usize, seed: u64, tol: f64) -> Result<CdSweep> {
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = random_cd_instance(seed, t, max_alphabet)?;
            let check = cd_lemma_check(&inst.joint()?, &inst.f)?;
            Ok((inst, check))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (inst, check) in results {
        for t in [check.plus, check.minus] {
            worst = worst.max(t.lhs - t.mid).max(t.mid - t.rhs);
        }
        if !check.holds(tol) {
            violations.push((inst, check));
        }
    }
    Ok(CdSweep {
        trials,
        violations,
        worst_slack: worst,
    })
}
