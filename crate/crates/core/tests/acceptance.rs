//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that the per-criterion
//! lines always appear in `cargo test` output.

mod common;

use std::f64::consts::{E, LN_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use permbounds::bethe::{kld_relaxation, product_relaxation, schrijver_lower};
use permbounds::conjectures::{scan, HalfPowerUpper, Phi0Bregman};
use permbounds::dimer::{empirical_beta, friedland_limit_beta, friedland_lower_pa1, sample_lambda};
use permbounds::ensemble::{ensemble_by_name, Ensemble};
use permbounds::{
    approximate_permanent, bethe_f, bethe_upper_bound, bregman_bound, cw_functional, cw_gradient, min_constant_c,
    per_m_direct, per_m_via_block, permanent, permanent_bruteforce, permanent_ryser, sinkhorn_scale, solve_root_a,
    upper_bound_orlicz, verify_psi_conditions, Matrix, PsiFunction,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
    noteworthy: bool,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            noteworthy: false,
        }
    }
}

fn within(budget: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < budget, format!("{:.1}s of {}s budget", t.as_secs_f64(), budget.as_secs()))
}

fn sandwich() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut failures = 0;
    let mut worst_low = f64::NEG_INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    for n in 3..=12 {
        for _ in 0..500 {
            let r = sinkhorn_scale(&random_positive(n, &mut rng), 1e-12, 100_000).unwrap();
            let b = &r.scaled;
            let slack = 1e-8 + 10.0 * n as f64 * r.residual;
            let lf = log_bethe(b);
            let lp = permanent_ryser(b).unwrap().log_value;
            worst_low = worst_low.max(lf - lp);
            worst_high = worst_high.max(lp - lf - n as f64 * LN_2);
            if lf > lp + slack || lp > lf + n as f64 * LN_2 + slack {
                failures += 1;
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(120), start);
    Outcome::new(
        failures == 0 && fast,
        format!(
            "5000 matrices, {failures} violations, max(lnF - lnPer) = {worst_low:.3e}, max(lnPer - lnF - n ln2) = {worst_high:.3e}, {time}"
        ),
    )
}

fn extremal_ratios() -> Outcome {
    let mut worst = 0.0f64;
    for n in [4, 6, 8, 10] {
        let a = half_block(n);
        let ratio = (permanent(&a).unwrap().log_value - bethe_f(&a).unwrap()).exp();
        worst = worst.max(rel_err(ratio, 2f64.powi(n as i32 / 2)));
    }
    let cyc = permanent(&cycle(8)).unwrap().value();
    Outcome::new(
        worst <= 1e-9 && (cyc - 2.0).abs() <= 1e-12,
        format!("max rel err of Per/F vs 2^(n/2) = {worst:.2e}, Per(A2, n=8) = {cyc}"),
    )
}

fn van_der_waerden() -> Outcome {
    let mut worst_per = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut ordered = true;
    for n in 1..=12 {
        let j = Matrix::uniform(n);
        let lp = permanent(&j).unwrap().log_value;
        let nf = n as f64;
        let want = ln_factorial(n) - nf * nf.ln();
        worst_per = worst_per.max(rel_err(lp.exp(), want.exp()));
        let lf = bethe_f(&j).unwrap();
        let want_f = if n == 1 { 0.0 } else { nf * (nf - 1.0) * ((nf - 1.0) / nf).ln() };
        worst_f = worst_f.max((lf - want_f).abs());
        ordered &= lf <= lp + 1e-12;
    }
    Outcome::new(
        worst_per <= 1e-10 && worst_f <= 1e-12 && ordered,
        format!("max rel err Per(J/n) = {worst_per:.2e}, max |lnF - n(n-1)ln((n-1)/n)| = {worst_f:.2e}, lnF <= lnPer: {ordered}"),
    )
}

fn approximation_pipeline() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(404);
    let n = 8;
    let mut interval_failures = 0;
    let mut worst_agreement = 0.0f64;
    for _ in 0..200 {
        let a = random_positive(n, &mut rng);
        let lp = dp_log_permanent(&a);
        let r = approximate_permanent(&a, 1e-10, 100_000).unwrap();
        if (lp - r.log_estimate).abs() > n as f64 * LN_2 + 10.0 * n as f64 * r.scaling_residual {
            interval_failures += 1;
        }
        let scaling = -sinkhorn_scale(&a, 1e-12, 100_000).unwrap().log_factor_product;
        let product = product_relaxation(&a, 1e-8).unwrap();
        let kld = kld_relaxation(&a, 100_000, 1e-6).unwrap();
        worst_agreement = worst_agreement
            .max((scaling - product).abs())
            .max((scaling - kld).abs())
            .max((product - kld).abs());
    }
    let (fast, time) = within(Duration::from_secs(60), start);
    Outcome::new(
        interval_failures == 0 && worst_agreement <= 1e-4 && fast,
        format!("{interval_failures} estimates outside n ln2, max relaxation disagreement {worst_agreement:.2e}, {time}"),
    )
}

fn schrijver() -> Outcome {
    let mut rng = rng(505);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..200 {
        let n = rng.gen_range(2..=10);
        let b = if k % 2 == 0 {
            naive_sinkhorn(&random_positive(n, &mut rng), 2000)
        } else {
            let terms = rng.gen_range(1..=n);
            random_birkhoff(n, terms, &mut rng)
        };
        let (t, bound) = schrijver_lower(&b).unwrap();
        let lp = dp_log_permanent(&t);
        worst = worst.max(bound - lp);
        if bound > lp + 1e-8 {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("200 matrices, {failures} violations, max(bound - lnPer) = {worst:.3e}"),
    )
}

fn psi_certification() -> Outcome {
    let a = solve_root_a();
    let residual = ((1.0 - a.ln()) / a - 1.0 / E).abs();
    let r = verify_psi_conditions(&PsiFunction::canonical(), 100_000).unwrap();
    Outcome::new(
        r.passes(1e-12) && (1.53..=1.55).contains(&a) && residual <= 1e-13,
        format!(
            "a = {a:.15}, residual {residual:.1e}, margins {:.2e} / {:.2e} / {:.2e}, on [0,e] {:.2e}, grid {}",
            r.cond1_min_margin, r.cond2_min_margin, r.cond3_min_margin, r.cond3_extended_min_margin, r.grid_size
        ),
    )
}

fn orlicz_upper() -> Outcome {
    let mut rng = rng(707);
    let psi = PsiFunction::canonical();
    let (mut orlicz_failures, mut bethe_failures) = (0, 0);
    let (mut orlicz_gap, mut bethe_gap) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..500 {
        let n = rng.gen_range(1..=10);
        let b = random_nonnegative(n, &mut rng);
        let lp = dp_log_permanent(&b);
        let ub = upper_bound_orlicz(&b, &psi).unwrap();
        if lp.is_finite() {
            orlicz_gap = orlicz_gap.min(ub - lp);
        }
        if ub < lp - 1e-9 {
            orlicz_failures += 1;
        }
    }
    for _ in 0..500 {
        let n = rng.gen_range(1..=10);
        let a = random_nonnegative(n, &mut rng).row_normalized().unwrap();
        let lp = dp_log_permanent(&a);
        let ub = bethe_upper_bound(&a).unwrap();
        if lp.is_finite() {
            bethe_gap = bethe_gap.min(ub - lp);
        }
        if ub < lp - 1e-9 {
            bethe_failures += 1;
        }
    }
    Outcome::new(
        orlicz_failures == 0 && bethe_failures == 0,
        format!(
            "Orlicz: {orlicz_failures} violations (min gap {orlicz_gap:.3e}); 2^n F on stochastic: {bethe_failures} violations (min gap {bethe_gap:.3e})"
        ),
    )
}

fn row_constant() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(808);
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let len = rng.gen_range(1..=50);
        let peak = [1.0, 3.0, 10.0, 40.0][k % 4];
        let x = random_stochastic_vector(len, peak, &mut rng);
        worst = worst.max(min_constant_c(&x).unwrap());
    }
    let cap = (1.0 / E).exp();
    let grid = 1_000_000;
    let mut grid_max = 0.0f64;
    for i in 0..grid {
        let y = i as f64 / grid as f64;
        grid_max = grid_max.max(y * (1.0 - y).exp() / (1.0 - y).powf(1.0 - y));
    }
    let (fast, time) = within(Duration::from_secs(30), start);
    Outcome::new(
        worst <= 2.0 && grid_max <= cap + 1e-9 && fast,
        format!("max C over 10000 vectors = {worst:.6}, max of y e^(1-y)/(1-y)^(1-y) on grid = {grid_max:.12} (cap {cap:.12}), {time}"),
    )
}

fn friedland() -> Outcome {
    let mut rng = rng(909);
    let mut below = 0;
    let mut disagree = 0.0f64;
    let mut instances = 0;
    for k in [2, 3] {
        for n in 1..=8 {
            for m in 1..=n {
                let pa1 = friedland_lower_pa1(n, m, k).unwrap();
                for _ in 0..500 {
                    let a = sample_lambda(k, n, &mut rng).unwrap();
                    let direct = per_m_direct(&a, m).unwrap().log_value;
                    let block = per_m_via_block(&a, m).unwrap().log_value;
                    disagree = disagree.max((direct - block).abs());
                    if direct < pa1 - 1e-8 {
                        below += 1;
                    }
                    instances += 1;
                }
            }
        }
    }
    let est = empirical_beta(2, 1.0, &[4, 6, 8], 2000, 31).unwrap();
    let beta = friedland_limit_beta(1.0, 2).unwrap();
    let gaps: Vec<f64> = est.iter().map(|e| e.estimate - beta).collect();
    let sandwich = est.iter().all(|e| e.estimate >= e.lower - 1e-12);
    let shrinking = gaps.windows(2).all(|w| w[1].abs() < w[0].abs());
    Outcome::new(
        below == 0 && disagree <= 1e-8 && sandwich && shrinking,
        format!(
            "{instances} instances, {below} below the bound, max route disagreement {disagree:.2e}; k=2 p=1 gaps to beta: {}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn cw_oracle(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&p, &q)| {
            let a = if q < 1.0 { (1.0 - q) * (1.0 - q).ln() } else { 0.0 };
            a - if q > 0.0 { q * (q / p).ln() } else { 0.0 }
        })
        .sum()
}

fn oracle_consistency() -> Outcome {
    let mut rng = rng(1010);
    let mut worst_ryser = 0.0f64;
    for n in 1..=8 {
        for k in 0..60 {
            let a = match k % 3 {
                0 => random_positive(n, &mut rng),
                1 => random_nonnegative(n, &mut rng),
                _ => naive_sinkhorn(&random_positive(n, &mut rng), 500),
            };
            let r = permanent_ryser(&a).unwrap().value();
            let b = permanent_bruteforce(&a).unwrap().value();
            if b > 0.0 {
                worst_ryser = worst_ryser.max(rel_err(r, b));
            } else if r != 0.0 {
                worst_ryser = f64::INFINITY;
            }
        }
    }

    let mut worst_grad = 0.0f64;
    for n in 2..=6 {
        for _ in 0..10 {
            let p = random_positive(n, &mut rng);
            let q = naive_sinkhorn(&random_positive(n, &mut rng), 2000);
            let g = cw_gradient(&p, &q).unwrap();
            let h = 1e-6;
            for idx in 0..n * n {
                let mut up = q.entries().to_vec();
                let mut dn = q.entries().to_vec();
                up[idx] += h;
                dn[idx] -= h;
                let fd = (cw_oracle(p.entries(), &up) - cw_oracle(p.entries(), &dn)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - g[idx]).abs());
            }
            // the library value agrees with the oracle at the base point
            let base = cw_functional(&p, &q).unwrap();
            worst_grad = worst_grad.max((base - cw_oracle(p.entries(), q.entries())).abs());
        }
    }

    let mut worst_bregman = 0.0f64;
    let perm = Matrix::permutation(&[3, 1, 4, 0, 2]).unwrap();
    let ones = Matrix::filled(6, 6, 1.0).unwrap();
    let a1 = half_block(6).scaled(2.0).unwrap();
    for m in [perm, ones, a1] {
        let b = bregman_bound(&m).unwrap().log_value;
        worst_bregman = worst_bregman.max((b - dp_log_permanent(&m)).abs());
    }
    Outcome::new(
        worst_ryser <= 1e-10 && worst_grad <= 1e-4 && worst_bregman <= 1e-10,
        format!(
            "Ryser vs brute force rel {worst_ryser:.2e}, CW gradient vs finite differences {worst_grad:.2e}, Bregman tightness {worst_bregman:.2e}"
        ),
    )
}

fn conjecture_scans() -> Outcome {
    let mut lines = Vec::new();
    let mut violations = 0;
    let mut total = [0usize; 2];
    let mut max_ratio = [f64::NEG_INFINITY; 2];
    for n in 2..=8 {
        let per_n = 10_000usize.div_ceil(7);
        let ds = ensemble_by_name("ds-random", 0).unwrap();
        let s = scan(&HalfPowerUpper, ds.as_ref(), n, per_n, 1100 + n as u64).unwrap();
        violations += s.violations;
        total[0] += s.samples - s.skipped;
        max_ratio[0] = max_ratio[0].max(s.max_ratio);
        for (name, count) in [("stochastic-random", per_n - per_n / 2), ("zero-one-density(0.5)", per_n / 2)] {
            let ens: Box<dyn Ensemble> = ensemble_by_name(name, 0).unwrap();
            let s = scan(&Phi0Bregman, ens.as_ref(), n, count, 1200 + n as u64).unwrap();
            violations += s.violations;
            total[1] += s.samples - s.skipped;
            max_ratio[1] = max_ratio[1].max(s.max_ratio);
            if s.violations > 0 {
                lines.push(format!("{} counterexamples at n={n} ({name})", s.violations));
            }
        }
    }
    let mut o = Outcome::new(
        true,
        format!(
            "Per <= 2^(n/2) F: {} instances, max ratio {:.6}; Per(phi0(A)) <= 1: {} instances, max {:.6}; {violations} counterexamples{}",
            total[0],
            max_ratio[0],
            total[1],
            max_ratio[1],
            if lines.is_empty() { String::new() } else { format!(" [{}]", lines.join("; ")) }
        ),
    );
    o.noteworthy = violations > 0;
    o
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Bethe sandwich on random doubly stochastic matrices", sandwich),
        ("extremal ratios for the half block and the cycle", extremal_ratios),
        ("van der Waerden anchor", van_der_waerden),
        ("scale-then-evaluate pipeline and relaxation agreement", approximation_pipeline),
        ("entrywise b(1-b) lower bound", schrijver),
        ("psi_a certification and root", psi_certification),
        ("Orlicz and 2^n F upper bounds", orlicz_upper),
        ("row constant C <= 2", row_constant),
        ("monomer-dimer instance bound and trend", friedland),
        ("oracle self-consistency", oracle_consistency),
        ("conjecture scans", conjecture_scans),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let status = match (outcome.pass, outcome.noteworthy) {
            (false, _) => "FAIL",
            (true, true) => "PASS (noteworthy)",
            (true, false) => "PASS",
        };
        println!(
            "criterion {:>2} {status}: {name}: {} [{:.1}s]",
            k + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
