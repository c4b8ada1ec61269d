//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach the console.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use seqemp::arrays::{MixingProfile, Model, TriangularArrayRow};
use seqemp::bracketing::{bracketing_integral, build_brackets_halfline, entropy_integral, NFn};
use seqemp::diagnostics::{aec_table, lipschitz_increments, pipeline_check, AecConfig, LipschitzConfig, PipelineConfig, ProcessKind};
use seqemp::fclasses::{FunctionClass, Member};
use seqemp::growth::{check_condition_s, combine_h, constant_a, holder_bound, index_threshold, zeta, GammaSpec, GrowthFunction};
use seqemp::process::CenteredEval;
use seqemp::rng::InnovationStream;
use seqemp::verify::{
    exact_pair_moments, exact_small_oracle, fit_moment_constant, mc_sup_moment, verify_maximal_inequality, ArraySource,
    IncrementSource, PairGrid, SumOrMax, TwoValued, Verdict,
};
use seqemp::Error;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit_secs: u64, started: Instant, detail: String) -> Outcome {
    let elapsed = started.elapsed();
    check!(elapsed <= Duration::from_secs(limit_secs), "{detail}; took {elapsed:.1?}, limit {limit_secs} s");
    Ok(detail)
}

fn smoothed_identity() -> Outcome {
    let t = Instant::now();
    let mut rng = InnovationStream::new(1);
    let mut worst: f64 = 0.0;
    for case in 0..10_000u64 {
        let n = 1 + (rng.uniform() * 200.0) as usize;
        let row = TriangularArrayRow::generate(&Model::iid_uniform(), n, case).map_err(|e| e.to_string())?;
        let f = Member::Halfline(rng.uniform());
        let means = vec![match f {
            Member::Halfline(x) => x,
            _ => unreachable!(),
        }; n];
        let eval = CenteredEval::new(&row, &f, &means).map_err(|e| e.to_string())?;
        let (a, b) = (rng.uniform(), rng.uniform());
        let (u, v) = (a.min(b), a.max(b));
        let closed = eval.eval_zs_interval(u, v).map_err(|e| e.to_string())?;
        let weights = eval.eval_zs_weights(u, v).map_err(|e| e.to_string())?;
        worst = worst.max((closed - weights).abs());
    }
    check!(worst <= 1e-12, "max |closed form - weights| = {worst:e} > 1e-12");
    within(10, t, format!("10^4 cases, max deviation {worst:.2e}"))
}

fn holder_constants() -> Outcome {
    let t = Instant::now();
    let mut rng = InnovationStream::new(2);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_eq: f64 = 0.0;
    for _ in 0..10_000 {
        let (x, y, d) = (10.0 * rng.uniform(), 10.0 * rng.uniform(), rng.uniform().max(1e-6));
        worst_gap = worst_gap.max(x.powf(d) + y.powf(d) - holder_bound(x, y, d));
        worst_eq = worst_eq.max((2.0 * x.powf(d) - holder_bound(x, x, d)).abs());
    }
    check!(worst_gap <= 1e-12, "x^d + y^d exceeds the bound by {worst_gap:e}");
    check!(worst_eq <= 1e-12, "equality at x = y off by {worst_eq:e}");
    within(1, t, format!("max excess {worst_gap:.2e}, equality error {worst_eq:.2e}"))
}

fn condition_s_certificates() -> Outcome {
    let t = Instant::now();
    let lin = check_condition_s(&GrowthFunction::linear(2.7, 200, 2.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check!(lin.q_min == 1.0, "linear q_min = {}", lin.q_min);
    let mut rng = InnovationStream::new(3);
    let nu = 4.0;
    let draw = |rng: &mut InnovationStream| -> Result<(GrowthFunction, f64), String> {
        let kappa = (0.5 - 1.0 / nu) * (0.01 + 0.98 * rng.uniform());
        let spec = GammaSpec::new(0.1 + 10.0 * rng.uniform(), kappa, nu).map_err(|e| e.to_string())?;
        let delta = 0.01 + 0.99 * rng.uniform();
        // R(delta) = a delta, J(delta) = b / delta with random a, b
        let (a, b) = (5.0 * rng.uniform(), 5.0 * rng.uniform());
        let g = spec.growth(200, a * delta, b / delta, 2.0).map_err(|e| e.to_string())?;
        Ok((g, kappa))
    };
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (g, kappa) = draw(&mut rng)?;
        let c = check_condition_s(&g).map_err(|e| e.to_string())?;
        check!(c.violations.is_empty(), "gamma violates monotonicity: {:?}", c.violations);
        worst = worst.max(c.q_min - 2f64.powf(2.0 * kappa));
    }
    check!(worst <= 1e-9, "gamma q_min exceeds 2^(2 kappa) by {worst:e}");
    let mut worst_sum: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let ((g, _), (l, _)) = (draw(&mut rng)?, draw(&mut rng)?);
        let (cg, cl) = (check_condition_s(&g).unwrap(), check_condition_s(&l).unwrap());
        let h = check_condition_s(&combine_h(&g, &l).map_err(|e| e.to_string())?).unwrap();
        check!(h.violations.is_empty(), "sum violates monotonicity");
        worst_sum = worst_sum.max(h.q_min - cg.q_min.max(cl.q_min));
    }
    check!(worst_sum <= 1e-12, "sum index exceeds the larger index by {worst_sum:e}");
    within(5, t, format!("gamma excess {worst:.2e}, sum excess {worst_sum:.2e}"))
}

/// `2^{-1/4}` by Newton's method on `x^4 = 1/2`, then `(1 - x)^{-4}` by
/// repeated multiplication.
fn reference_a() -> f64 {
    let mut x: f64 = 0.8;
    for _ in 0..60 {
        x -= (x * x * x * x - 0.5) / (4.0 * x * x * x);
    }
    let d = 1.0 - x;
    1.0 / (d * d * d * d)
}

fn constant_a_check() -> Outcome {
    let a = constant_a(2.0, 4.0, 1.0).map_err(|e| e.to_string())?;
    let reference = reference_a();
    let rel = (a - reference).abs() / reference;
    check!(rel < 5e-6, "A = {a} vs reference {reference}");
    let threshold = index_threshold(2.0);
    for q in [0.5, 0.999, threshold, threshold * 1.01, 3.0] {
        check!(constant_a(2.0, 4.0, q).is_err(), "q = {q} outside the domain was accepted");
    }
    check!(constant_a(2.0, 4.0, 1.2).is_ok(), "q = 1.2 inside the domain was rejected");
    Ok(format!("A(2, 4, 1) = {a:.6}, reference {reference:.6} (relative {rel:.1e}); domain [1, {threshold:.6}) enforced"))
}

fn exact_oracle() -> Outcome {
    let t = Instant::now();
    let levels = [(-1.0, 1.0), (0.0, 1.0), (-1.0, 2.0), (-0.5, 3.0)];
    let (mut checked, mut skipped) = (0, 0);
    let mut min_slack = f64::INFINITY;
    for nu in [2.0, 4.0] {
        let alpha = nu / 2.0;
        for n in 1..=10 {
            for count in 1..=4 {
                for &(lo, hi) in &levels {
                    let tv = TwoValued::walsh(n, count, lo, hi).map_err(|e| e.to_string())?;
                    match exact_small_oracle(&tv, nu, alpha, &PairGrid::All) {
                        Ok(r) => {
                            checked += 1;
                            check!(r.verdict == Verdict::Pass, "n = {n}, |family| = {count}, nu = {nu}, levels ({lo}, {hi}): {:?}", r.verdict);
                            min_slack = min_slack.min(r.rows.iter().map(|row| row.bound / row.m_moment.max(1e-300)).fold(f64::INFINITY, f64::min));
                        }
                        Err(_) if alpha <= 1.0 => skipped += 1,
                        Err(e) => return Err(e.to_string()),
                    }
                }
            }
        }
    }
    check!(checked == 160, "only {checked} configurations checked");
    within(60, t, format!("{checked} configurations hold exactly (min bound/moment {min_slack:.1}); {skipped} nu = 2 configurations skipped (alpha = 1 admits no index)"))
}

fn mc_harness() -> Outcome {
    let t = Instant::now();
    let src = IncrementSource::TwoValued(TwoValued::rademacher_walsh(64, 8).map_err(|e| e.to_string())?);
    let r = verify_maximal_inequality(&src, 4.0, 2.0, &PairGrid::Dyadic, 100_000, 20261018).map_err(|e| e.to_string())?;
    check!(r.verdict == Verdict::Pass, "verdict {:?}, min margin {}", r.verdict, r.min_margin);
    check!(r.rows.len() == 127, "{} dyadic pairs", r.rows.len());
    let tv = TwoValued::rademacher_walsh(10, 8).map_err(|e| e.to_string())?;
    let (pairs, es, em) = exact_pair_moments(&tv, 4.0, &PairGrid::Dyadic).map_err(|e| e.to_string())?;
    let src = IncrementSource::TwoValued(tv);
    let mut worst_z: f64 = 0.0;
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for (which, exact) in [(SumOrMax::Sum, es[p]), (SumOrMax::Max, em[p])] {
            let e = mc_sup_moment(&src, i, j, 4.0, which, 100_000, 7).map_err(|e| e.to_string())?;
            let z = if e.std_error > 0.0 { (e.mean - exact).abs() / e.std_error } else if e.mean == exact { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
        }
    }
    check!(worst_z <= 3.0, "Monte Carlo departs from the exact oracle by {worst_z:.2} SE");
    within(300, t, format!("PASS at all 127 dyadic pairs (min margin {:.3e}); n = 10 agreement within {worst_z:.2} SE over {} pairs", r.min_margin, pairs.len()))
}

fn zeta_evaluator() -> Outcome {
    let lambda = 2.0 / 3.0;
    let w = lambda / (2.0 + lambda);
    for r in [0.1f64, 0.2, 0.25] {
        let q: f64 = r.powf(w);
        let p = MixingProfile::geometric(1.0, r).map_err(|e| e.to_string())?;
        let two = zeta(&p, lambda, 2.0, 1e-12).map_err(|e| e.to_string())?.value;
        let four = zeta(&p, lambda, 4.0, 1e-12).map_err(|e| e.to_string())?.value;
        let (c2, c4) = (q / (1.0 - q), q * (1.0 + q) / (1.0 - q).powi(3));
        check!((two - c2).abs() <= 1e-10 && (four - c4).abs() <= 1e-10, "rho = {r}: {two} vs {c2}, {four} vs {c4}");
    }
    let z = zeta(&MixingProfile::zero_beyond(3), lambda, 4.0, 1e-12).map_err(|e| e.to_string())?;
    let exact = (1.0 + 4.0 + 9.0) * 0.25f64.powf(w);
    // exact up to the order of summation
    check!((z.value - exact).abs() <= 1e-14 * exact && z.truncation_bound == 0.0, "zero beyond 3: {} vs {exact}", z.value);
    let tab = MixingProfile::tabulated(vec![0.2, 0.1, 0.05]).map_err(|e| e.to_string())?;
    let verdict = zeta(&tab, lambda, 4.0, 1e-12);
    check!(matches!(verdict, Err(Error::Uncertifiable(_))), "tabulated profile gave {verdict:?}");
    Ok("geometric closed forms within 1e-10 at nu = 2, 4; zero-beyond-m exact; tabulated profile not certified".into())
}

fn bracketing() -> Outcome {
    let cover = build_brackets_halfline(0.1).map_err(|e| e.to_string())?;
    check!(cover.len() == 100, "N = {}", cover.len());
    check!((cover.higher_moment_size() - 0.1).abs() < 1e-12, "rho_2(b) = {}", cover.higher_moment_size());
    cover.verify(100_000).map_err(|e| e.to_string())?;
    let (lambda, nu, eta) = (2.0 / 3.0, 4.0, 0.5);
    let w = lambda / (2.0 + lambda);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let constant = bracketing_integral(&NFn::Constant { value: 16.0 }, lambda, nu, eta).map_err(|e| e.to_string())?.value;
    let c_exact = 2.0 * eta.powf(1.0 - w) / (1.0 - w);
    let power = bracketing_integral(&NFn::Power { c: 3.0, a: 2.0 }, lambda, nu, eta).map_err(|e| e.to_string())?.value;
    let e = 1.0 - w - 0.5;
    let p_exact = 3f64.powf(0.25) * eta.powf(e) / e;
    let entropy = entropy_integral(&NFn::Power { c: 2.0, a: 1.0 }, 2.0, eta).map_err(|e| e.to_string())?.value;
    let e_exact = 2f64.sqrt() * eta.sqrt() / 0.5;
    check!(rel(constant, c_exact) < 1e-6, "constant case {constant} vs {c_exact}");
    check!(rel(power, p_exact) < 1e-6, "power case {power} vs {p_exact}");
    check!(rel(entropy, e_exact) < 1e-6, "entropy case {entropy} vs {e_exact}");
    let boundary = bracketing_integral(&NFn::CeilPower { c: 1.0, a: 2.0 }, 2.0, 4.0, 1.0);
    check!(matches!(boundary, Err(Error::Divergent { .. })), "boundary lambda = 2, nu = 4 gave {boundary:?}");
    Ok(format!(
        "N = 100 verified, rho_2(b) = 0.1; closed forms within {:.1e}; divergence at lambda/(2+lambda) + 2/nu = 1",
        rel(constant, c_exact).max(rel(power, p_exact)).max(rel(entropy, e_exact))
    ))
}

fn moment_stability() -> Outcome {
    let t = Instant::now();
    let grid: Vec<usize> = (4..=10).map(|k| 1usize << k).collect();
    let net = FunctionClass::halfline().parameter_grid(17).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for (label, model) in [("iid", Model::iid_uniform()), ("2-dependent", Model::MDependent { m: 2 })] {
        let fit = fit_moment_constant(&model, net.clone(), 4.0, 2.0 / 3.0, &grid, 10_000, 99).map_err(|e| e.to_string())?;
        check!(fit.band_ratio <= 4.0, "{label}: band ratio {}", fit.band_ratio);
        details.push(format!("{label} band {:.3}", fit.band_ratio));
    }
    let p = 0.3;
    let m = 256;
    let src = IncrementSource::Array(ArraySource::new(Model::iid_uniform(), vec![Member::Halfline(p)], m).map_err(|e| e.to_string())?);
    let e = mc_sup_moment(&src, 1, m, 2.0, SumOrMax::Sum, 10_000, 5).map_err(|e| e.to_string())?;
    let exact = m as f64 * p * (1.0 - p);
    check!((e.mean - exact).abs() <= 3.0 * e.std_error, "E S^2 = {} +- {} vs {exact}", e.mean, e.std_error);
    details.push(format!("E S^2 = {:.2} vs m p(1-p) = {exact:.2}", e.mean));
    within(600, t, details.join("; "))
}

fn aec_decay() -> Outcome {
    let t = Instant::now();
    let net = FunctionClass::halfline().parameter_grid(64).map_err(|e| e.to_string())?;
    let table = aec_table(&AecConfig {
        model: Model::iid_uniform(),
        net,
        p: 2.0,
        process: ProcessKind::Sequential,
        deltas: vec![0.05, 0.2],
        ns: vec![256, 1024, 2048, 4096],
        epsilon: 0.75,
        replicates: 500,
        seed: 10,
    })
    .map_err(|e| e.to_string())?;
    let at = |d: f64, n: usize| table.iter().find(|r| r.delta == d && r.n == n).unwrap();
    let (small, large) = (at(0.05, 2048), at(0.2, 2048));
    check!(small.p_hat < large.p_hat, "P(delta = 0.05) = {} not below P(delta = 0.2) = {}", small.p_hat, large.p_hat);
    let trend: Vec<_> = [256, 1024, 4096].iter().map(|&n| at(0.05, n)).collect();
    for w in trend.windows(2) {
        check!(
            w[1].p_hat <= w[0].p_hat + 2.0 * (w[0].se + w[1].se),
            "P at delta = 0.05 rose from {} (n = {}) to {} (n = {})",
            w[0].p_hat,
            w[0].n,
            w[1].p_hat,
            w[1].n
        );
    }
    within(
        900,
        t,
        format!(
            "n = 2048: P = {:.3} at delta 0.05 vs {:.3} at 0.2; delta 0.05 across n: {:.3}, {:.3}, {:.3}",
            small.p_hat, large.p_hat, trend[0].p_hat, trend[1].p_hat, trend[2].p_hat
        ),
    )
}

fn lipschitz_scaling() -> Outcome {
    let t = Instant::now();
    let n = 1024;
    let set_pairs = (1..=10).map(|k| ((0.0, 0.25), (0.0, 0.25 + 0.5f64.powi(k)))).collect();
    let r = lipschitz_increments(&LipschitzConfig {
        model: Model::iid_uniform(),
        n,
        set_pairs,
        set_member: Member::Halfline(0.5),
        function_pairs: vec![],
        function_set: (0.0, 1.0),
        p: 2.0,
        replicates: 10_000,
        seed: 11,
    })
    .map_err(|e| e.to_string())?;
    let lo = r.set_rows.iter().map(|row| row.distance).fold(f64::INFINITY, f64::min);
    check!((lo - 1.0 / n as f64).abs() < 1e-15, "smallest lambda(A delta B) = {lo}");
    let slope = r.set_slope.ok_or("no fit")?.slope;
    check!((0.45..=0.55).contains(&slope), "log-log slope {slope}");
    within(300, t, format!("slope {slope:.4} over lambda in [1/1024, 0.5], C1 = {:.4}", r.c1))
}

fn pipeline_verdicts() -> Outcome {
    let cfg = |lambda: f64| PipelineConfig {
        model: Model::iid_uniform(),
        class: FunctionClass::halfline(),
        nu: 4.0,
        lambda,
        kappa: 0.1,
        moment_cap: 1.0,
        eta: 0.5,
        block_lengths: vec![16, 64, 256],
        replicates: 2000,
        seed: 12,
    };
    let t = Instant::now();
    let good = pipeline_check(&cfg(2.0 / 3.0)).map_err(|e| e.to_string())?;
    check!(good.all_pass, "lambda = 2/3: halted at {:?}", good.halted_at);
    let good_time = t.elapsed();
    let t = Instant::now();
    let bad = pipeline_check(&cfg(2.0)).map_err(|e| e.to_string())?;
    let last = bad.hypotheses.last().ok_or("empty bundle")?;
    check!(
        bad.halted_at.as_deref() == Some("bracketing integral") && last.detail.contains("diverges"),
        "lambda = 2: {:?} / {}",
        bad.halted_at,
        last.detail
    );
    check!(good_time.max(t.elapsed()) <= Duration::from_secs(60), "pipeline exceeded 60 s");
    Ok(format!("lambda = 2/3 all {} hypotheses PASS; lambda = 2 halts at the bracketing integral: {}", good.hypotheses.len(), last.detail))
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/iid_halfline.toml");
    let base = std::env::temp_dir().join(format!("seqemp-acceptance-{}", std::process::id()));
    let mut files = 0;
    for sub in seqemp_cli::SUBCOMMANDS {
        let mut runs = Vec::new();
        for (k, threads) in ["1", "3"].iter().enumerate() {
            let out = base.join(format!("{sub}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_seqemp"))
                .args([sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "2026", "--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            check!(status.status.success(), "{sub}: {}", String::from_utf8_lossy(&status.stderr));
            runs.push(artifacts(&out));
        }
        check!(!runs[0].is_empty() && runs[0] == runs[1], "{sub}: artifacts differ between runs");
        files += runs[0].len();
    }
    let _ = fs::remove_dir_all(&base);
    Ok(format!("all 10 subcommands reproduce {files} artifacts byte for byte across two runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("smoothed-process identity", smoothed_identity),
        ("Holder constants", holder_constants),
        ("growth certificates", condition_s_certificates),
        ("maximal-inequality constant", constant_a_check),
        ("exact maximal-inequality oracle", exact_oracle),
        ("Monte Carlo maximal-inequality harness", mc_harness),
        ("mixing series evaluator", zeta_evaluator),
        ("bracketing covers and integrals", bracketing),
        ("moment bound stability under mixing", moment_stability),
        ("equicontinuity decay", aec_decay),
        ("smoothed-process increment scaling", lipschitz_scaling),
        ("hypothesis pipeline verdicts", pipeline_verdicts),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
