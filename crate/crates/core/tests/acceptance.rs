//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::time::{Duration, Instant};

use genbound::bounds::{all_bounds, cd_bound, compare_bounds, Direction, EngineOptions};
use genbound::cgf::{inverse_fenchel, ln_cosh, lncosh_lower, DEFAULT_TOL};
use genbound::gaussian::{
    gaussian_info_constants, icimi_column_cgf, icimi_gaussian, icimi_info_term, imi_gaussian, imi_info_monte_carlo,
    lemma_conjugate_bound, strengthened_lower_check, subset_averages, GaussianCaseConfig,
};
use genbound::info::{kl_divergence, mixed_gaussian_mi, sample_conditioned_mi, DEFAULT_QUAD_TOL};
use genbound::model::{true_gen_error, FiniteDistribution, GaussianProblem, GenMethod, LearningProblem, McParams};
use genbound::oracle::{
    brute_force_bounds, cd_check_sweep, cd_lemma_check, max_discrepancy, random_cd_instance, random_problem,
    RandomProblemOptions,
};
use genbound::rng;
use genbound::supersample::decouple;
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

/// Entropy in nats of a probability vector.
fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn cd_lemma_sweep() -> Outcome {
    let start = Instant::now();
    let sweep = cd_check_sweep(1000, 4, 2024, 1e-9).map_err(e)?;
    let elapsed = start.elapsed();
    // engine inversion against the independent oracle inversion
    let mut worst_gap = 0.0f64;
    for t in 0..1000 {
        let inst = random_cd_instance(2024, t, 4).map_err(e)?;
        let joint = inst.joint().map_err(e)?;
        let oracle = cd_lemma_check(&joint, &inst.f).map_err(e)?;
        for (dir, triple) in [(Direction::Plus, oracle.plus), (Direction::Minus, oracle.minus)] {
            let b = cd_bound(&joint, &inst.f, dir, DEFAULT_TOL).map_err(e)?;
            worst_gap = worst_gap
                .max((b.gap - triple.lhs).abs())
                .max((b.strong - triple.mid).abs())
                .max((b.weak - triple.rhs).abs());
        }
    }
    check(
        sweep.violations.is_empty() && worst_gap < 1e-7 && elapsed < Duration::from_secs(120),
        format!(
            "1000 instances, {} violations, largest slack {:.2e}, engine vs oracle {:.2e}, {:.1?}",
            sweep.violations.len(),
            sweep.worst_slack,
            worst_gap,
            elapsed
        ),
    )
}

fn decoupling_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut slices = 0;
    for t in 0..200 {
        let joint = random_cd_instance(77, t, 4).map_err(e)?.joint().map_err(e)?;
        let d = decouple(&joint).map_err(e)?;
        let terms = sample_conditioned_mi(&joint).map_err(e)?;
        let (dx, dy, _) = joint.dims();
        for term in &terms.per_u {
            let (_, p) = joint.slice(term.u).unwrap();
            let (_, q) = d.decoupled.slice(term.u).unwrap();
            let kl = kl_divergence(
                &FiniteDistribution::new(p.clone()).map_err(e)?,
                &FiniteDistribution::new(q).map_err(e)?,
            )
            .map_err(e)?;
            // I_u = H(X|u) + H(Y|u) - H(X,Y|u)
            let px: Vec<f64> = (0..dx).map(|x| (0..dy).map(|y| p[x * dy + y]).sum()).collect();
            let py: Vec<f64> = (0..dy).map(|y| (0..dx).map(|x| p[x * dy + y]).sum()).collect();
            let by_entropy = entropy(&px) + entropy(&py) - entropy(&p);
            worst = worst.max((kl - term.mi).abs()).max((kl - by_entropy).abs());
            slices += 1;
        }
    }
    check(worst <= 1e-12, format!("200 joints, {slices} slices, largest |KL - I_u| {worst:.2e}"))
}

fn gaussian_exact_constants() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2usize, 10, 100] {
        let cfg = GaussianCaseConfig::new(1.0, n).map_err(e)?.with_mc(200_000, 31 + n as u64);
        let (info, _) = imi_gaussian(&cfg).map_err(e)?;
        let nf = n as f64;
        let closed = 0.5 * (nf / (nf - 1.0)).ln();
        let mc = imi_info_monte_carlo(&cfg).map_err(e)?;
        let z = (mc.mean - closed).abs() / mc.std_error;
        ok &= info == closed && z <= 3.0;
        parts.push(format!("n={n}: {closed:.5} vs MC {:.5} ({z:.2} SE)", mc.mean));
    }
    check(ok, parts.join("; "))
}

fn true_generalization_error() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2usize, 10, 100] {
        let p = GaussianProblem::new(0.0, 1.0, n).map_err(e)?;
        let est = true_gen_error(
            &LearningProblem::Gaussian(p),
            GenMethod::MonteCarlo,
            Some(McParams {
                samples: 1_000_000,
                seed: 400 + n as u64,
            }),
        )
        .map_err(e)?;
        let target = 2.0 / n as f64;
        let z = (est.value - target).abs() / est.std_error;
        ok &= z <= 3.0;
        parts.push(format!("n={n}: {:.5} vs {target:.5} ({z:.2} SE)", est.value));
    }
    check(ok, parts.join("; "))
}

fn imi_curve() -> Outcome {
    let mut ns: Vec<usize> = (0..=100).map(|k| 10f64.powf(k as f64 * 5.0 / 100.0).round() as usize).collect();
    ns.retain(|&n| n >= 2);
    ns.dedup();
    let mut worst = 0.0f64;
    for &n in &ns {
        let cfg = GaussianCaseConfig::new(1.0, n).map_err(e)?;
        let (_, bound) = imi_gaussian(&cfg).map_err(e)?;
        let nf = n as f64;
        let closed = (2.0 * (nf + 1.0).powi(2) / (nf * nf) * (nf / (nf - 1.0)).ln()).sqrt();
        worst = worst.max((bound - closed).abs());
    }
    check(worst <= 1e-12, format!("{} grid points in [2, 1e5], largest deviation {worst:.2e}", ns.len()))
}

struct IcimiRun {
    n: usize,
    imi: f64,
    icimi: f64,
    se: f64,
}

fn icimi_runs() -> Result<(Vec<IcimiRun>, Duration), String> {
    let start = Instant::now();
    let mut out = Vec::new();
    for n in [100usize, 1000, 10_000] {
        let cfg = GaussianCaseConfig::new(1.0, n).map_err(e)?.with_mc(100_000, 6);
        let (_, imi) = imi_gaussian(&cfg).map_err(e)?;
        let r = icimi_gaussian(&cfg).map_err(e)?;
        out.push(IcimiRun {
            n,
            imi,
            icimi: r.value,
            se: r.std_error,
        });
    }
    Ok((out, start.elapsed()))
}

fn icimi_rate(runs: &[IcimiRun], elapsed: Duration) -> Outcome {
    let target = 2.0 / PI.sqrt();
    let scaled: Vec<f64> = runs.iter().map(|r| r.icimi * ((r.n - 1) as f64).sqrt()).collect();
    let last = *scaled.last().unwrap();
    let gaps: Vec<f64> = scaled.iter().map(|s| (s - target).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let detail = runs
        .iter()
        .zip(&scaled)
        .map(|(r, s)| format!("n={}: {s:.4} (se {:.4})", r.n, r.se * ((r.n - 1) as f64).sqrt()))
        .collect::<Vec<_>>()
        .join("; ");
    check(
        (last - target).abs() <= 0.1 * target && monotone && elapsed < Duration::from_secs(600),
        format!("scaled ICIMI {detail}; target {target:.4}; {elapsed:.1?}"),
    )
}

fn imi_icimi_ratio(runs: &[IcimiRun]) -> Outcome {
    let r = runs.last().unwrap();
    let ratio = r.imi / r.icimi;
    let target = (PI / 2.0).sqrt();
    check(
        (ratio - target).abs() <= 0.1 * target,
        format!("n={}: IMI/ICIMI = {ratio:.4}, target {target:.4}", r.n),
    )
}

fn strengthened_floor_check() -> Outcome {
    const FLOOR: f64 = 0.2652;
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, draws) in [(1usize, 20_000usize), (2, 4000), (5, 2000), (10, 400)] {
        let cfg = GaussianCaseConfig::new(1.0, n).map_err(e)?.with_mc(draws, 800 + n as u64);
        let c = strengthened_lower_check(&cfg).map_err(e)?;
        let need = if n == 1 { 1.0 } else { FLOOR };
        ok &= c.cmi.mean >= need - 3.0 * c.cmi.std_error && c.cimi.mean >= need - 3.0 * c.cimi.std_error;
        parts.push(format!(
            "n={n}: CMI {:.4} (se {:.4}), CIMI {:.4} (se {:.4}) vs {need}",
            c.cmi.mean, c.cmi.std_error, c.cimi.mean, c.cimi.std_error
        ));
    }
    check(ok, parts.join("; "))
}

fn gaussian_info_constants_check() -> Outcome {
    let mut ok = true;
    let mut tables = 0;
    for n in 1..=12usize {
        let cfg = GaussianCaseConfig::new(1.0, n).map_err(e)?.with_mc(1000, 900 + n as u64);
        let c = gaussian_info_constants(&cfg, 200).map_err(e)?;
        ok &= c.full == n as f64 * LN_2 && c.per_i == LN_2;
        tables += c.tables_checked;
        // independent count of distinct hypotheses on fresh tables
        let mut r = rng::master(950 + n as u64);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for _ in 0..20 {
            let table: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut r), normal.sample(&mut r)]).collect();
            let mut ws = subset_averages(&table);
            ws.sort_by(f64::total_cmp);
            ws.dedup();
            // H(R) over uniform selectors, recovered from W
            let h = entropy(&vec![1.0 / ws.len() as f64; ws.len()]);
            ok &= ws.len() == 1 << n && (h - n as f64 * LN_2).abs() < 1e-9;
            tables += 1;
        }
    }
    check(ok, format!("n = 1..12, {tables} tables, all 2^n averages distinct"))
}

fn ordering_lemmas() -> Outcome {
    let mut r = rng::master(1010);
    let opts = RandomProblemOptions::default();
    let eng = EngineOptions::default();
    let mut pairs = 0;
    let mut bad = Vec::new();
    let mut bounded = 0;
    for k in 0..500 {
        let p = random_problem(&mut r, &opts).map_err(e)?;
        let cmp = compare_bounds(&p, &eng).map_err(e)?;
        pairs += cmp.pairs.len();
        bounded += usize::from(cmp.bounded_suite);
        for v in cmp.violations() {
            bad.push(format!("problem {k}: {} {} > {} {}", v.lhs_name, v.lhs, v.rhs_name, v.rhs));
        }
    }
    check(
        bad.is_empty() && bounded == 500,
        format!("500 problems ({bounded} in the bounded suite), {pairs} comparisons, {} violations {}", bad.len(), bad.join(", ")),
    )
}

fn lemma_suite() -> Outcome {
    let mut lower_ok = true;
    let mut cosh_dev = 0.0f64;
    for k in 0..=20_000 {
        let x = -10.0 + k as f64 * 1e-3;
        let v = ln_cosh(x);
        lower_ok &= lncosh_lower(x) <= v;
        cosh_dev = cosh_dev.max((v - x.cosh().ln()).abs());
    }
    let small = mixed_gaussian_mi(0.05, 1.0, DEFAULT_QUAD_TOL).map_err(e)? * 2.0 / 0.05f64.powi(2);
    let large = mixed_gaussian_mi(10.0, 1.0, DEFAULT_QUAD_TOL).map_err(e)?;
    let mut r = rng::master(1111);
    let mut dominated = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let n = r.random_range(2..=1000usize);
        let sigma2 = r.random_range(0.25..4.0);
        let cfg = GaussianCaseConfig::new(sigma2, n).map_err(e)?;
        let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let (zm, zp) = (normal.sample(&mut r), normal.sample(&mut r));
        let eta = icimi_info_term(zm, zp, &cfg).map_err(e)?;
        let exact = inverse_fenchel(&icimi_column_cgf(zm, zp, &cfg).map_err(e)?, eta, DEFAULT_TOL)
            .map_err(e)?
            .value;
        let lemma = lemma_conjugate_bound(zm, zp, n, sigma2, eta).map_err(e)?;
        worst = worst.min(lemma - exact);
        dominated += usize::from(lemma >= exact - 1e-9 * exact.max(1.0));
    }
    check(
        lower_ok && cosh_dev < 1e-12 && (0.95..=1.05).contains(&small) && (large - LN_2).abs() < 1e-6 && dominated == 10_000,
        format!(
            "ln cosh bound on 20001 points {}, |ln cosh - ln(cosh)| {cosh_dev:.1e}; 2 sigma^2 I / nu^2 = {small:.5} at 0.05; \
             I - ln 2 = {:.1e} at 10; lemma dominates in {dominated}/10000 (smallest margin {worst:.2e})",
            if lower_ok { "holds" } else { "fails" },
            large - LN_2
        ),
    )
}

fn engine_oracle_equivalence() -> Outcome {
    let mut r = rng::master(1212);
    let eng = EngineOptions::default();
    let mut worst = 0.0f64;
    let mut unsound = Vec::new();
    for k in 0..100 {
        let opts = RandomProblemOptions {
            unit_loss: k % 2 == 0,
            ..Default::default()
        };
        let p = random_problem(&mut r, &opts).map_err(e)?;
        let engine = all_bounds(&p, &eng).map_err(e)?;
        let oracle = brute_force_bounds(&p, 1_000_000).map_err(e)?;
        worst = worst.max(max_discrepancy(&engine, &oracle).map_err(e)?);
        let gen = genbound::oracle::enumerate_world(&p, 1_000_000).map_err(e)?.gen_error(&p);
        for b in engine.iter().filter(|b| b.is_applicable()) {
            if b.value < gen - 1e-9 {
                unsound.push(format!("problem {k}: {} {} = {} < {gen}", b.name, b.variant, b.value));
            }
        }
    }
    check(
        worst <= 1e-9 && unsound.is_empty(),
        format!("100 problems, largest discrepancy {worst:.2e}, {} unsound bounds {}", unsound.len(), unsound.join(", ")),
    )
}

#[test]
fn acceptance() {
    let (runs, icimi_elapsed) = icimi_runs().expect("ICIMI runs");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("decoupling inequality sweep", Box::new(cd_lemma_sweep)),
        ("decoupling identity", Box::new(decoupling_identity)),
        ("Gaussian exact constants", Box::new(gaussian_exact_constants)),
        ("true generalization error", Box::new(true_generalization_error)),
        ("IMI bound curve", Box::new(imi_curve)),
        ("ICIMI asymptotic rate", Box::new(|| icimi_rate(&runs, icimi_elapsed))),
        ("IMI vs ICIMI ratio", Box::new(|| imi_icimi_ratio(&runs))),
        ("strengthened bound floor", Box::new(strengthened_floor_check)),
        ("Gaussian information constants", Box::new(gaussian_info_constants_check)),
        ("ordering lemmas", Box::new(ordering_lemmas)),
        ("lemma suite", Box::new(lemma_suite)),
        ("engine/oracle equivalence", Box::new(engine_oracle_equivalence)),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(k + 1);
                ("FAIL", d)
            }
        };
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {:>2} {status}: {name}: {detail} [{:.1?}]", k + 1, start.elapsed()).unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
