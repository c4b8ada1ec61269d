//! Finite-sample diagnostics: modulus-of-continuity tables, increment
//! scaling of the smoothed process, a hypothesis checklist for weak
//! convergence of the sequential process, and a CUSUM statistic.
//!
//! Limits in `n` and `delta` cannot be taken numerically; tables report
//! finite grids and leave the trend to the reader. Suprema are over finite
//! nets, so the separability of the process never enters.

use serde::{Deserialize, Serialize};

use crate::arrays::{Marginal, Model, TriangularArrayRow};
use crate::bracketing::{bracketing_integral, build_brackets_halfline, interval_sym_diff, NFn};
use crate::error::{invalid, Error, Result};
use crate::fclasses::{
    distance_matrix, rho_p_diff, CenteringTable, ClassKind, FunctionClass, Member, SemimetricSpec,
};
use crate::growth::zeta;
use crate::process::{modulus, weighted_pairs, CenteredEval, Surface, TimeMetric};
use crate::rng::replicate_seed;
use crate::stats::{fit_loglog, merge_all, replicate_reduce, LineFit, Moments};
use crate::verify::{check_kappa, fit_moment_constant, MIN_MC_REPLICATES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// `Z_n(t, f)` under `|s - t| + rho(f, g)`.
    Sequential,
    /// `Z_n^s((0, t], f)` under `sqrt(|s - t|) + rho(f, g)`.
    Smoothed,
}

impl ProcessKind {
    fn metric(self) -> TimeMetric {
        match self {
            ProcessKind::Sequential => TimeMetric::Abs,
            ProcessKind::Smoothed => TimeMetric::SqrtAbs,
        }
    }
}

pub const DEFAULT_AEC_EPSILON: f64 = 0.75;

#[derive(Clone, Debug, PartialEq)]
pub struct AecConfig {
    pub model: Model,
    pub net: Vec<Member>,
    /// Exponent of the `rho_p` function semimetric.
    pub p: f64,
    pub process: ProcessKind,
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
    pub epsilon: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// One `(delta, n)` cell. `split1` and `split2` are the exceedance
/// probabilities of `epsilon / 2` by the time-direction and the
/// function-direction suprema; `p_hat <= split1 + split2` on every table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AecRow {
    pub delta: f64,
    pub n: usize,
    pub p_hat: f64,
    pub se: f64,
    pub split1: f64,
    pub split2: f64,
}

/// Surface of a process on the grid `i/n`, `i = 0..=n`.
fn process_surface(row: &TriangularArrayRow, net: &[Member], table: &CenteringTable) -> Surface {
    let n = row.n;
    let scale = 1.0 / (n as f64).sqrt();
    let times = (0..=n).map(|i| i as f64 / n as f64).collect();
    let values = net
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut acc = 0.0;
            let mut path = Vec::with_capacity(n + 1);
            path.push(0.0);
            for (x, m) in row.values.iter().zip(table.means(fi)) {
                acc += f.eval(*x) - m;
                path.push(acc * scale);
            }
            path
        })
        .collect();
    Surface { times, values }
}

const MONOTONE_SLACK: f64 = 1e-12;

pub fn aec_table(cfg: &AecConfig) -> Result<Vec<AecRow>> {
    if cfg.deltas.is_empty() || cfg.ns.is_empty() || cfg.net.is_empty() {
        return Err(invalid("grid", "delta grid, n grid and net must be nonempty"));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    if cfg.deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(invalid("delta", "must be finite and nonnegative"));
    }
    if cfg.replicates == 0 || cfg.ns.contains(&0) {
        return Err(invalid("replicates, n", "must be positive"));
    }
    cfg.model.validate()?;
    let mut order: Vec<usize> = (0..cfg.deltas.len()).collect();
    order.sort_by(|&a, &b| cfg.deltas[a].total_cmp(&cfg.deltas[b]));
    let metric = cfg.process.metric();
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let marginals = cfg.model.marginals(n)?;
        let table = CenteringTable::new(&cfg.net, &marginals);
        let dist = distance_matrix(&cfg.net, &SemimetricSpec::RhoP { p: cfg.p }, &marginals)?;
        let pairs = weighted_pairs(&dist);
        let seed_n = replicate_seed(cfg.seed, n as u64);
        let cells = cfg.deltas.len();
        let acc = replicate_reduce(
            cfg.replicates,
            || vec![Moments::default(); 3 * cells],
            |acc, r| {
                let row = TriangularArrayRow::generate(&cfg.model, n, replicate_seed(seed_n, r)).expect("validated model");
                let surface = process_surface(&row, &cfg.net, &table);
                let mut prev = 0.0;
                for &d in &order {
                    let m = modulus(&surface, &pairs, metric, cfg.deltas[d]);
                    assert!(m.full + MONOTONE_SLACK >= prev, "modulus decreased in delta");
                    assert!(
                        m.full <= m.split_time + m.split_function + MONOTONE_SLACK,
                        "modulus exceeds the sum of its split terms"
                    );
                    prev = m.full;
                    let hit = |v: f64, level: f64| if v > level { 1.0 } else { 0.0 };
                    acc[3 * d].push(hit(m.full, cfg.epsilon));
                    acc[3 * d + 1].push(hit(m.split_time, cfg.epsilon / 2.0));
                    acc[3 * d + 2].push(hit(m.split_function, cfg.epsilon / 2.0));
                }
            },
            |a, b| merge_all(a, &b),
        );
        for (d, &delta) in cfg.deltas.iter().enumerate() {
            rows.push(AecRow {
                delta,
                n,
                p_hat: acc[3 * d].mean(),
                se: acc[3 * d].std_error(),
                split1: acc[3 * d + 1].mean(),
                split2: acc[3 * d + 2].mean(),
            });
        }
    }
    Ok(rows)
}

pub type Interval = (f64, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzConfig {
    pub model: Model,
    pub n: usize,
    /// Set-direction pairs `(A, B)` evaluated on `set_member`.
    pub set_pairs: Vec<(Interval, Interval)>,
    pub set_member: Member,
    /// Function-direction pairs `(f, g)` evaluated on `function_set`.
    pub function_pairs: Vec<(Member, Member)>,
    pub function_set: Interval,
    pub p: f64,
    pub replicates: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementRow {
    /// `lambda(A △ B)` or `rho_p(f - g)`.
    pub distance: f64,
    /// `||increment||_{L_p}` estimate.
    pub norm: f64,
    pub se: f64,
    /// `norm / sqrt(distance)` or `norm / distance`; `None` at zero distance.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub c1: f64,
    pub c2: f64,
    pub set_rows: Vec<IncrementRow>,
    pub function_rows: Vec<IncrementRow>,
    /// Log-log fit of the set-direction norm against `lambda(A △ B)`.
    pub set_slope: Option<LineFit>,
    /// Zero-distance pairs whose increment was not zero.
    pub flagged: Vec<String>,
}

const ZERO_INCREMENT_TOL: f64 = 1e-12;

fn check_interval((u, v): Interval) -> Result<()> {
    if !(0.0 <= u && u <= v && v <= 1.0) {
        return Err(invalid("interval", format!("({u}, {v}] must satisfy 0 <= u <= v <= 1")));
    }
    Ok(())
}

pub fn lipschitz_increments(cfg: &LipschitzConfig) -> Result<LipschitzReport> {
    if !(cfg.p >= 1.0) {
        return Err(invalid("p", "must be >= 1"));
    }
    if cfg.replicates < 2 || cfg.n == 0 {
        return Err(invalid("replicates, n", "need n >= 1 and at least two replicates"));
    }
    cfg.model.validate()?;
    for (a, b) in &cfg.set_pairs {
        check_interval(*a)?;
        check_interval(*b)?;
    }
    check_interval(cfg.function_set)?;
    let mut members = vec![cfg.set_member.clone()];
    for (f, g) in &cfg.function_pairs {
        members.push(f.clone());
        members.push(g.clone());
    }
    let marginals = cfg.model.marginals(cfg.n)?;
    let table = CenteringTable::new(&members, &marginals);
    let (ns, nf) = (cfg.set_pairs.len(), cfg.function_pairs.len());
    let p = cfg.p;
    let acc = replicate_reduce(
        cfg.replicates,
        || vec![Moments::default(); ns + nf],
        |acc, r| {
            let row = TriangularArrayRow::generate(&cfg.model, cfg.n, replicate_seed(cfg.seed, r)).expect("validated model");
            let evals: Vec<CenteredEval> = members
                .iter()
                .enumerate()
                .map(|(k, f)| CenteredEval::new(&row, f, table.means(k)).expect("matching lengths"))
                .collect();
            let zs = |e: &CenteredEval, (u, v): Interval| e.eval_zs_interval(u, v).expect("checked interval");
            for (k, (a, b)) in cfg.set_pairs.iter().enumerate() {
                acc[k].push((zs(&evals[0], *a) - zs(&evals[0], *b)).abs().powf(p));
            }
            for k in 0..nf {
                let d = zs(&evals[1 + 2 * k], cfg.function_set) - zs(&evals[2 + 2 * k], cfg.function_set);
                acc[ns + k].push(d.abs().powf(p));
            }
        },
        |a, b| merge_all(a, &b),
    );
    let norm_of = |m: &Moments| {
        let norm = m.mean().max(0.0).powf(1.0 / p);
        let se = if norm > 0.0 {
            m.std_error() / (p * norm.powf(p - 1.0))
        } else {
            0.0
        };
        (norm, se)
    };
    let mut flagged = Vec::new();
    let mut make_row = |label: String, distance: f64, m: &Moments, scale: fn(f64) -> f64| {
        let (norm, se) = norm_of(m);
        let ratio = if distance > 0.0 {
            Some(norm / scale(distance))
        } else {
            if norm > ZERO_INCREMENT_TOL {
                flagged.push(format!("{label}: zero distance but increment norm {norm:e}"));
            }
            None
        };
        IncrementRow {
            distance,
            norm,
            se,
            ratio,
        }
    };
    let mut set_rows = Vec::with_capacity(ns);
    for (k, (a, b)) in cfg.set_pairs.iter().enumerate() {
        let d = interval_sym_diff(*a, *b);
        set_rows.push(make_row(format!("sets {a:?} {b:?}"), d, &acc[k], f64::sqrt));
    }
    let mut function_rows = Vec::with_capacity(nf);
    for (k, (f, g)) in cfg.function_pairs.iter().enumerate() {
        let d = rho_p_diff(f, g, &marginals, p)?.value;
        function_rows.push(make_row(format!("functions {} {}", f.label(), g.label()), d, &acc[ns + k], |x| x));
    }
    let max_ratio = |rows: &[IncrementRow]| rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = set_rows
        .iter()
        .filter(|r| r.distance > 0.0 && r.norm > 0.0)
        .map(|r| (r.distance, r.norm))
        .unzip();
    Ok(LipschitzReport {
        c1: max_ratio(&set_rows),
        c2: max_ratio(&function_rows),
        set_slope: fit_loglog(&xs, &ys),
        set_rows,
        function_rows,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub model: Model,
    pub class: FunctionClass,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    /// Bound `K` on `sup_f E|f(X)|^{nu (2 + lambda) / 2}`.
    pub moment_cap: f64,
    pub eta: f64,
    /// Block lengths used to fit the single-function moment bound.
    pub block_lengths: Vec<usize>,
    pub replicates: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// `R(delta)` and `J(delta)` of the growth function `gamma(m, delta)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaArtifacts {
    pub deltas: Vec<f64>,
    pub r: Vec<f64>,
    pub j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub hypotheses: Vec<Hypothesis>,
    /// Name of the first failing hypothesis; later ones are not run.
    pub halted_at: Option<String>,
    pub all_pass: bool,
    pub entropy: Option<NFn>,
    pub gamma: Option<GammaArtifacts>,
    /// Fitted `D` in `||S(i,j)(f_0)||_{L_nu} <= D sqrt(j - i + 1)`.
    pub d_hat: Option<f64>,
}

pub const GAMMA_DELTAS: [f64; 6] = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625];

fn distinct_marginals(marginals: &[Marginal]) -> Vec<Marginal> {
    let mut seen = std::collections::HashSet::new();
    marginals.iter().filter(|m| seen.insert(m.key())).copied().collect()
}

/// Bracketing count `N(eps)` of a class as a closed-form function of `eps`,
/// with a certificate that every bracket bound `b` takes values in `[0, 1]`
/// (so `E|b|^k <= E b^2` for all `k >= 2`).
fn class_entropy(class: &FunctionClass, marginals: &[Marginal]) -> Result<(NFn, String)> {
    let distinct = distinct_marginals(marginals);
    let zero = if class.include_zero { 2.0 } else { 1.0 };
    match &class.kind {
        ClassKind::FiniteExplicit { functions } => Ok((
            NFn::Constant {
                value: (functions.len() + usize::from(class.include_zero)) as f64,
            },
            "finite class: brackets of size zero".into(),
        )),
        _ if distinct.len() != 1 => Err(Error::Uncertifiable(
            "bracketing under non-identical marginal laws is not implemented".into(),
        )),
        ClassKind::HalflineIndicators => {
            let cover = build_brackets_halfline(0.1)?;
            Ok((
                NFn::CeilPower { c: zero, a: 2.0 },
                format!(
                    "quantile brackets are indicators, so every moment of a bound equals its mean; \
                     verified sample cover at eps = 0.1 with {} brackets, max size {:.6}",
                    cover.len(),
                    cover.higher_moment_size()
                ),
            ))
        }
        ClassKind::LipschitzBall => match distinct[0] {
            Marginal::Uniform01 => Ok((
                NFn::CeilPower {
                    c: zero / 3f64.sqrt(),
                    a: 1.0,
                },
                "bounds are increments of [0,1]-valued monotone members, so higher moments are dominated by the second".into(),
            )),
            _ => Err(Error::Uncertifiable(
                "bracketing of the Lipschitz ball is implemented for uniform marginals only".into(),
            )),
        },
    }
}

/// Runs the hypothesis checklist in order and halts at the first failure.
pub fn pipeline_check(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let mut report = PipelineReport {
        hypotheses: Vec::new(),
        halted_at: None,
        all_pass: false,
        entropy: None,
        gamma: None,
        d_hat: None,
    };
    let record = |report: &mut PipelineReport, name: &str, outcome: std::result::Result<String, String>| {
        let pass = outcome.is_ok();
        report.hypotheses.push(Hypothesis {
            name: name.into(),
            pass,
            detail: outcome.unwrap_or_else(|e| e),
        });
        if !pass {
            report.halted_at = Some(name.into());
        }
        pass
    };
    cfg.model.validate()?;
    let nu = cfg.nu;
    let lambda = cfg.lambda;
    if !(lambda > 0.0) || !(cfg.eta > 0.0 && cfg.eta <= 1.0) {
        return Err(invalid("lambda, eta", "need lambda > 0 and eta in (0, 1]"));
    }

    let even = if nu >= 2.0 && nu.fract() == 0.0 && (nu as u64) % 2 == 0 {
        Ok(format!("nu = {nu}"))
    } else {
        Err(format!("the mixing moment bound requires an even integer nu >= 2, got {nu}"))
    };
    if !record(&mut report, "even moment order", even) {
        return Ok(report);
    }

    let profile = cfg.model.mixing_profile()?;
    let a1 = match zeta(&profile, lambda, nu, 1e-10) {
        Ok(z) => Ok(format!(
            "sum_s s^(nu-2) alpha(s)^(lambda/(2+lambda)) = {:.6e} (tail bound {:.1e}, {} terms)",
            z.value, z.truncation_bound, z.terms
        )),
        Err(e) => Err(format!("weighted mixing series not certified finite: {e}")),
    };
    if !record(&mut report, "mixing series", a1) {
        return Ok(report);
    }

    let marginals = cfg.model.marginals(cfg.block_lengths.iter().copied().max().unwrap_or(1).max(1))?;
    let a2 = class_entropy(&cfg.class, &marginals).map_err(|e| e.to_string()).and_then(|(n_fn, collapse)| {
        report.entropy = Some(n_fn.clone());
        match bracketing_integral(&n_fn, lambda, nu, cfg.eta) {
            Ok(q) => Ok(format!(
                "int_0^eta eps^(-lambda/(2+lambda)) N(eps)^(1/nu) = {:.6} at eta = {}; {collapse}",
                q.value, cfg.eta
            )),
            Err(Error::Divergent { exponent }) => Err(format!(
                "bracketing integral diverges: lambda/(2+lambda) + a/nu = {:.6} >= 1 (integrand exponent {exponent})",
                lambda / (2.0 + lambda) + n_fn.leading_power() / nu
            )),
            Err(e) => Err(e.to_string()),
        }
    });
    if !record(&mut report, "bracketing integral", a2) {
        return Ok(report);
    }

    let k = nu * (2.0 + lambda) / 2.0;
    let envelope_moment = cfg.class.envelope_bound().powf(k);
    let cap = if envelope_moment <= cfg.moment_cap {
        Ok(format!("sup_f E|f|^{k:.4} <= sup|F|^{k:.4} = {envelope_moment} <= K = {}", cfg.moment_cap))
    } else {
        Err(format!(
            "envelope moment bound {envelope_moment} exceeds K = {}",
            cfg.moment_cap
        ))
    };
    if !record(&mut report, "moment cap", cap) {
        return Ok(report);
    }

    let kappa = check_kappa(cfg.kappa, nu, lambda)
        .map(|_| format!("kappa = {} in (0, min(1/2 - 1/nu, lambda/4))", cfg.kappa))
        .map_err(|e| e.to_string());
    if !record(&mut report, "kappa range", kappa) {
        return Ok(report);
    }

    let f0 = match &cfg.class.kind {
        ClassKind::FiniteExplicit { functions } => Member::Tabulated {
            index: 0,
            f: std::sync::Arc::new(functions.first().cloned().ok_or_else(|| Error::Degenerate("empty class".into()))?),
        },
        _ => cfg.class.member(0.5)?,
    };
    let reduction = if cfg.block_lengths.is_empty() || cfg.replicates < MIN_MC_REPLICATES {
        Err(format!(
            "need block lengths and at least {MIN_MC_REPLICATES} replicates to fit the single-function bound"
        ))
    } else {
        fit_moment_constant(&cfg.model, vec![f0.clone()], nu, lambda, &cfg.block_lengths, cfg.replicates, cfg.seed)
            .map_err(|e| e.to_string())
            .and_then(|fit| {
                let ratios: Vec<f64> = fit.rows.iter().map(|r| r.norm / (r.m as f64).sqrt()).collect();
                let d = ratios.iter().cloned().fold(0.0, f64::max);
                let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
                report.d_hat = Some(d);
                if d == 0.0 || d / lo <= crate::verify::STABILITY_BAND {
                    Ok(format!("||S(f_0)||_nu / sqrt(m) <= D = {d:.6} for f_0 = {}", f0.label()))
                } else {
                    Err(format!("||S(f_0)||_nu / sqrt(m) drifts by a factor {:.3}", d / lo))
                }
            })
    };
    if !record(&mut report, "single-function moment bound", reduction) {
        return Ok(report);
    }

    let n_fn = report.entropy.clone().expect("set by the bracketing step");
    let mut gamma = GammaArtifacts {
        deltas: GAMMA_DELTAS.to_vec(),
        r: Vec::new(),
        j: Vec::new(),
    };
    for &delta in &GAMMA_DELTAS {
        let root = delta.sqrt();
        let j = n_fn.eval(root).max(1.0).powf(2.0 / nu);
        let integral = bracketing_integral(&n_fn, lambda, nu, root)?.value;
        gamma.r.push(j * (delta + delta.powf(nu / 2.0)) + integral);
        gamma.j.push(j);
    }
    report.gamma = Some(gamma);
    report.all_pass = true;
    Ok(report)
}

/// `max_{i, f} |Z_n(i/n, f) - (i/n) Z_n(1, f)|`.
pub fn changepoint_cusum(row: &TriangularArrayRow, net: &[Member], table: &CenteringTable) -> Result<f64> {
    if net.is_empty() {
        return Err(invalid("net", "must be nonempty"));
    }
    let n = row.n as f64;
    let mut best: f64 = 0.0;
    for (k, f) in net.iter().enumerate() {
        let path = CenteredEval::new(row, f, table.means(k))?.z_path();
        let end = *path.last().expect("path includes t = 1");
        for (i, z) in path.iter().enumerate() {
            best = best.max((z - i as f64 / n * end).abs());
        }
    }
    Ok(best)
}
