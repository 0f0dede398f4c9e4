//! The 2 x n supersample with Rademacher selectors, and decoupled pairs.
//!
//! Row 0 of a column holds `Z_i^-`, row 1 holds `Z_i^+`; `R_i = +1` puts
//! `Z_i^+` in the training vector.

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::info::FiniteJoint;
use crate::model::{checked_pow, decode_index, FiniteProblem, GaussianProblem, LearningProblem, Point};

/// Largest number of enumerated states allowed by default.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// One draw of `(Z^+-_[n], R_[n], Z_[n], W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupersampleState {
    /// `table[i] = [Z_i^-, Z_i^+]`
    pub table: Vec<[Point; 2]>,
    /// Entries in `{-1, +1}`.
    pub r: Vec<i8>,
    pub train: Vec<Point>,
    pub w: Point,
}

/// Row of the supersample selected by `r`.
pub fn row_of(r: i8) -> usize {
    usize::from(r > 0)
}

impl SupersampleState {
    /// Whether `train[i]` is the entry selected by `r[i]` in every column.
    pub fn is_consistent(&self) -> bool {
        self.table.len() == self.r.len()
            && self.r.len() == self.train.len()
            && self
                .table
                .iter()
                .zip(&self.r)
                .zip(&self.train)
                .all(|((col, &r), t)| (r == 1 || r == -1) && col[row_of(r)] == *t)
    }
}

pub fn build_supersample<R: Rng + ?Sized>(problem: &LearningProblem, rng: &mut R) -> SupersampleState {
    let n = problem.n();
    let table: Vec<[Point; 2]> = match problem {
        LearningProblem::Finite(p) => (0..n)
            .map(|_| [Point::Index(p.xi().sample(rng)), Point::Index(p.xi().sample(rng))])
            .collect(),
        LearningProblem::Gaussian(g) => (0..n)
            .map(|_| [Point::Real(g.draw_point(rng)), Point::Real(g.draw_point(rng))])
            .collect(),
    };
    let r: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let train: Vec<Point> = table.iter().zip(&r).map(|(col, &ri)| col[row_of(ri)]).collect();
    let w = match problem {
        LearningProblem::Finite(p) => {
            let idx: Vec<usize> = train
                .iter()
                .map(|t| match t {
                    Point::Index(s) => *s,
                    Point::Real(_) => unreachable!("finite problems draw indices"),
                })
                .collect();
            Point::Index(p.kernel()[p.training_index(&idx)].sample(rng))
        }
        LearningProblem::Gaussian(_) => {
            let z: Vec<f64> = train
                .iter()
                .map(|t| match t {
                    Point::Real(v) => *v,
                    Point::Index(_) => unreachable!("Gaussian problems draw reals"),
                })
                .collect();
            Point::Real(GaussianProblem::learner(&z))
        }
    };
    SupersampleState { table, r, train, w }
}

/// A joint together with its decoupled surrogate `P(u) P(x|u) P(y|u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledJoint {
    pub original: FiniteJoint,
    pub decoupled: FiniteJoint,
}

pub fn decouple(joint: &FiniteJoint) -> Result<DecoupledJoint> {
    let (dx, dy, du) = joint.dims();
    let xu = joint.xu_marginal();
    let yu = joint.yu_marginal();
    let pu = joint.u_marginal();
    let mut table = vec![0.0; joint.table().len()];
    for x in 0..dx {
        for y in 0..dy {
            for u in 0..du {
                if pu[u] > 0.0 {
                    table[joint.index(x, y, u)] = xu[x][u] * yu[y][u] / pu[u];
                }
            }
        }
    }
    let dims: Vec<usize> = [dx, dy, du][..joint.axes()].to_vec();
    let decoupled = FiniteJoint::new(&dims, table)?;
    Ok(DecoupledJoint {
        original: joint.clone(),
        decoupled,
    })
}

/// Which selector variable forms the Y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// `R_i` alone; `y = 0` is `-1`, `y = 1` is `+1`.
    One(usize),
    /// `R_[n]`; bit `n - 1 - i` of `y` is set when `R_i = +1`.
    All,
}

/// Which part of the supersample forms the U axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// `Z_i^+-`, encoded `u = z_minus * |Z| + z_plus`.
    Column(usize),
    /// `Z^+-_[n]`, digits `(z_1^-, z_1^+, ..., z_n^-, z_n^+)` base `|Z|`,
    /// most significant first.
    Table,
}

/// Decodes a full-table code into columns `[z_minus, z_plus]`.
pub fn table_columns(code: usize, num_z: usize, n: usize) -> Vec<[usize; 2]> {
    decode_index(code, num_z, 2 * n)
        .chunks(2)
        .map(|c| [c[0], c[1]])
        .collect()
}

/// Training vector selected from a table by the selector code `r`.
pub fn selected_training(columns: &[[usize; 2]], r: usize) -> Vec<usize> {
    let n = columns.len();
    columns
        .iter()
        .enumerate()
        .map(|(i, col)| col[(r >> (n - 1 - i)) & 1])
        .collect()
}

/// Sign `R_i` encoded in the selector code `r`.
pub fn selector_sign(r: usize, i: usize, n: usize) -> f64 {
    if (r >> (n - 1 - i)) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Number of `(table, selector, hypothesis)` states of the full supersample.
pub fn supersample_states(problem: &FiniteProblem) -> u128 {
    let n = problem.n() as u32;
    (problem.num_z() as u128)
        .saturating_pow(2 * n)
        .saturating_mul(1u128 << n.min(127))
        .saturating_mul(problem.num_w() as u128)
}

fn check_budget(problem: &FiniteProblem, budget: u128) -> Result<()> {
    let states = supersample_states(problem);
    if states > budget {
        return Err(Error::Resource { states, budget });
    }
    Ok(())
}

/// Joint of `(W, selector, conditioning)` under the supersample law, with
/// `W` on the X axis.
pub fn supersample_joint(
    problem: &FiniteProblem,
    selector: Selector,
    conditioning: Conditioning,
    budget: u128,
) -> Result<FiniteJoint> {
    let n = problem.n();
    let kz = problem.num_z();
    let kw = problem.num_w();
    let xi = problem.xi().probs();
    for idx in [selector_index(selector), column_index(conditioning)].into_iter().flatten() {
        if idx >= n {
            return domain(format!("sample index {idx} out of range for n = {n}"));
        }
    }
    match (selector, conditioning) {
        (Selector::One(i), Conditioning::Column(j)) => {
            if i != j {
                return domain("a single selector can only be paired with its own column");
            }
            let cond = problem.w_given_sample(i);
            let du = kz * kz;
            FiniteJoint::from_fn(&[kw, 2, du], |w, y, u| {
                let col = [u / kz, u % kz];
                xi[col[0]] * xi[col[1]] * 0.5 * cond[col[y]][w]
            })
        }
        (Selector::All, Conditioning::Column(_)) => {
            domain("the full selector vector needs the full table as conditioning")
        }
        (_, Conditioning::Table) => {
            check_budget(problem, budget)?;
            let tables = checked_pow(kz, 2 * n)?;
            let patterns = 1usize << n;
            let dy = match selector {
                Selector::All => patterns,
                Selector::One(_) => 2,
            };
            let mut cells = vec![0.0; kw * dy * tables];
            let weight = 1.0 / patterns as f64;
            for t in 0..tables {
                let columns = table_columns(t, kz, n);
                let pt: f64 = columns.iter().map(|c| xi[c[0]] * xi[c[1]]).product();
                if pt == 0.0 {
                    continue;
                }
                for r in 0..patterns {
                    let train = selected_training(&columns, r);
                    let y = match selector {
                        Selector::All => r,
                        Selector::One(i) => (r >> (n - 1 - i)) & 1,
                    };
                    let row = &problem.kernel()[problem.training_index(&train)];
                    for (w, pw) in row.probs().iter().enumerate() {
                        cells[(w * dy + y) * tables + t] += pt * weight * pw;
                    }
                }
            }
            FiniteJoint::new(&[kw, dy, tables], cells)
        }
    }
}

fn selector_index(s: Selector) -> Option<usize> {
    match s {
        Selector::One(i) => Some(i),
        Selector::All => None,
    }
}

fn column_index(c: Conditioning) -> Option<usize> {
    match c {
        Conditioning::Column(i) => Some(i),
        Conditioning::Table => None,
    }
}

/// `(exact gen error, E[(1/n) sum_i R_i (l(W, Z_i^-) - l(W, Z_i^+))])`, the
/// second computed by enumerating the supersample.
pub fn gen_error_supersample_identity(problem: &FiniteProblem, budget: u128) -> Result<(f64, f64)> {
    check_budget(problem, budget)?;
    let n = problem.n();
    let kz = problem.num_z();
    let xi = problem.xi().probs();
    let tables = checked_pow(kz, 2 * n)?;
    let patterns = 1usize << n;
    let mut rhs = 0.0;
    for t in 0..tables {
        let columns = table_columns(t, kz, n);
        let pt: f64 = columns.iter().map(|c| xi[c[0]] * xi[c[1]]).product();
        if pt == 0.0 {
            continue;
        }
        for r in 0..patterns {
            let train = selected_training(&columns, r);
            let row = &problem.kernel()[problem.training_index(&train)];
            for (w, pw) in row.probs().iter().enumerate() {
                if *pw == 0.0 {
                    continue;
                }
                let g: f64 = columns
                    .iter()
                    .enumerate()
                    .map(|(i, c)| selector_sign(r, i, n) * (problem.loss(w, c[0]) - problem.loss(w, c[1])))
                    .sum::<f64>()
                    / n as f64;
                rhs += pt / patterns as f64 * pw * g;
            }
        }
    }
    Ok((problem.exact_gen_error(), rhs))
}
