use genbound::bounds::{all_bounds, EngineOptions};
use genbound::oracle::{brute_force_bounds, max_discrepancy, random_problem, RandomProblemOptions};
use genbound::rng;

#[test]
fn engine_matches_oracle_on_random_problems() {
    let mut r = rng::master(101);
    let opts = EngineOptions::default();
    let mut worst = 0.0f64;
    for unit in [true, false] {
        let gen_opts = RandomProblemOptions { unit_loss: unit, ..Default::default() };
        for k in 0..100 {
            let p = random_problem(&mut r, &gen_opts).unwrap();
            let e = all_bounds(&p, &opts).unwrap();
            let o = brute_force_bounds(&p, 1_000_000).unwrap();
            let d = max_discrepancy(&e, &o).unwrap();
            if d > 1e-9 {
                for (a, b) in e.iter().zip(&o) {
                    eprintln!("{} {} {} {}", a.name, a.variant, a.value, b.value);
                }
                panic!("problem {k} (unit {unit}): discrepancy {d}");
            }
            worst = worst.max(d);
        }
    }
    eprintln!("worst {worst:e}");
}
