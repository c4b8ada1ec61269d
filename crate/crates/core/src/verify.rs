//! Monte Carlo and exact checks of the maximal inequality, the moment bound
//! under mixing, the covariance inequality and the scaling of the chaining
//! bound.
//!
//! Left-hand sides are always maxima over finite nets (never above the true
//! supremum) and right-hand sides use analytic quantities, so a PASS is
//! evidence for the inequality and a FAIL is a counterexample signal.

use serde::Serialize;

use crate::arrays::{Model, TriangularArrayRow};
use crate::bracketing::{bracketing_integral, NFn};
use crate::error::{invalid, Error, Result};
use crate::fclasses::{central_moment, CenteringTable, Member};
use crate::growth::{check_condition_s, constant_a, zeta, Certificate, GrowthFunction};
use crate::rng::{replicate_seed, InnovationStream};
use crate::stats::{merge_all, replicate_reduce, Moments};

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_moments(m: &Moments, seed: u64) -> Self {
        Self {
            mean: m.mean(),
            std_error: m.std_error(),
            replicates: m.count(),
            seed,
        }
    }
}

pub const MIN_MC_REPLICATES: u64 = 1000;

fn check_replicates(got: u64) -> Result<()> {
    if got < MIN_MC_REPLICATES {
        return Err(Error::TooFewReplicates {
            got: got as usize,
            need: MIN_MC_REPLICATES as usize,
        });
    }
    Ok(())
}

/// `W_k(psi) = coefs[psi][k] * e_k` with `e_k` equal to `lo` or `hi` with
/// probability 1/2 each, independently over `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoValued {
    pub lo: f64,
    pub hi: f64,
    pub coefs: Vec<Vec<f64>>,
}

impl TwoValued {
    pub fn new(lo: f64, hi: f64, coefs: Vec<Vec<f64>>) -> Result<Self> {
        let n = coefs.first().map_or(0, Vec::len);
        if n == 0 || coefs.iter().any(|c| c.len() != n) {
            return Err(invalid("coefs", "need a nonempty family of equal-length rows"));
        }
        if ![lo, hi].iter().chain(coefs.iter().flatten()).all(|v| v.is_finite()) {
            return Err(invalid("coefs", "values must be finite"));
        }
        Ok(Self { lo, hi, coefs })
    }

    /// `count` Walsh sign patterns `(-1)^{popcount((k-1) & w)}`, `w = 0..count`.
    pub fn walsh(n: usize, count: usize, lo: f64, hi: f64) -> Result<Self> {
        let coefs = (0..count)
            .map(|w| {
                (0..n)
                    .map(|k| if (k & w).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Self::new(lo, hi, coefs)
    }

    pub fn rademacher_walsh(n: usize, count: usize) -> Result<Self> {
        Self::walsh(n, count, -1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.coefs[0].len()
    }

    fn increments(&self, pick_hi: impl Fn(usize) -> bool) -> Vec<Vec<f64>> {
        let e: Vec<f64> = (0..self.n())
            .map(|k| if pick_hi(k) { self.hi } else { self.lo })
            .collect();
        self.coefs
            .iter()
            .map(|c| c.iter().zip(&e).map(|(a, b)| a * b).collect())
            .collect()
    }
}

/// Centered evaluations of a net on rows of a model.
#[derive(Clone, Debug)]
pub struct ArraySource {
    pub model: Model,
    pub n: usize,
    pub net: Vec<Member>,
    table: CenteringTable,
}

impl ArraySource {
    pub fn new(model: Model, net: Vec<Member>, n: usize) -> Result<Self> {
        model.validate()?;
        if net.is_empty() {
            return Err(Error::Degenerate("empty net".into()));
        }
        let marginals = model.marginals(n)?;
        let table = CenteringTable::new(&net, &marginals);
        Ok(Self {
            model,
            n,
            net,
            table,
        })
    }

    pub fn row(&self, seed: u64) -> Result<TriangularArrayRow> {
        TriangularArrayRow::generate(&self.model, self.n, seed)
    }

    /// `z[f][k] = f(X_k) - E f(X_k)` for a given row.
    pub fn centered(&self, row: &TriangularArrayRow) -> Vec<Vec<f64>> {
        self.net
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                row.values
                    .iter()
                    .zip(self.table.means(fi))
                    .map(|(x, m)| f.eval(*x) - m)
                    .collect()
            })
            .collect()
    }
}

/// Where the increments `W_k(psi)` come from.
#[derive(Clone, Debug)]
pub enum IncrementSource {
    TwoValued(TwoValued),
    Array(ArraySource),
}

impl IncrementSource {
    pub fn n(&self) -> usize {
        match self {
            IncrementSource::TwoValued(t) => t.n(),
            IncrementSource::Array(a) => a.n,
        }
    }

    fn draw(&self, seed: u64) -> Vec<Vec<f64>> {
        match self {
            IncrementSource::TwoValued(t) => {
                let mut s = InnovationStream::new(seed);
                let coins: Vec<bool> = (0..t.n()).map(|_| s.coin()).collect();
                t.increments(|k| coins[k])
            }
            IncrementSource::Array(a) => {
                // parameters were validated when the source was built
                let row = a.row(seed).expect("validated model");
                a.centered(&row)
            }
        }
    }
}

/// Index pairs `(i, j)` (1-based, `i <= j`) at which moments are compared.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairGrid {
    /// Aligned blocks `(b 2^l, (b+1) 2^l]` inside `[1, n]`.
    Dyadic,
    All,
    Explicit(Vec<(usize, usize)>),
}

impl PairGrid {
    pub fn pairs(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        let pairs = match self {
            PairGrid::Dyadic => {
                let mut out = Vec::new();
                let mut len = 1;
                while len <= n {
                    out.extend((0..n / len).map(|b| (b * len + 1, (b + 1) * len)));
                    len *= 2;
                }
                out
            }
            PairGrid::All => (1..=n)
                .flat_map(|i| (i..=n).map(move |j| (i, j)))
                .collect(),
            PairGrid::Explicit(p) => p.clone(),
        };
        for &(i, j) in &pairs {
            if i == 0 || j > n || i > j {
                return Err(Error::IndexOutOfRange { index: j.max(i), n });
            }
        }
        Ok(pairs)
    }
}

/// `sup_psi |S(i,j)|^nu` and `sup_psi M(i,j)^nu` for each pair, one path.
fn path_stats(incs: &[Vec<f64>], pairs: &[(usize, usize)], nu: f64, out_s: &mut [f64], out_m: &mut [f64]) {
    out_s.iter_mut().for_each(|v| *v = 0.0);
    out_m.iter_mut().for_each(|v| *v = 0.0);
    for w in incs {
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let mut acc: f64 = 0.0;
            let mut best: f64 = 0.0;
            for v in &w[i - 1..j] {
                acc += v;
                best = best.max(acc.abs());
            }
            out_s[p] = out_s[p].max(acc.abs().powf(nu));
            out_m[p] = out_m[p].max(best.powf(nu));
        }
    }
}

/// Moments of the supremal sums and maxima at each pair.
#[derive(Clone, Debug)]
struct PairMoments {
    s: Vec<Moments>,
    m: Vec<Moments>,
}

fn mc_pair_moments(source: &IncrementSource, pairs: &[(usize, usize)], nu: f64, replicates: u64, seed: u64) -> PairMoments {
    let init = || PairMoments {
        s: vec![Moments::default(); pairs.len()],
        m: vec![Moments::default(); pairs.len()],
    };
    replicate_reduce(
        replicates,
        init,
        |acc, r| {
            let incs = source.draw(replicate_seed(seed, r));
            let (mut s, mut m) = (vec![0.0; pairs.len()], vec![0.0; pairs.len()]);
            path_stats(&incs, pairs, nu, &mut s, &mut m);
            for p in 0..pairs.len() {
                acc.s[p].push(s[p]);
                acc.m[p].push(m[p]);
            }
        },
        |a, b| {
            merge_all(&mut a.s, &b.s);
            merge_all(&mut a.m, &b.m);
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SumOrMax {
    Sum,
    Max,
}

/// Estimate of `E sup_psi |S(i,j)|^nu` or `E sup_psi M(i,j)^nu`.
pub fn mc_sup_moment(
    source: &IncrementSource,
    i: usize,
    j: usize,
    nu: f64,
    which: SumOrMax,
    replicates: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_replicates(replicates)?;
    if !(nu >= 1.0) {
        return Err(invalid("nu", "must be >= 1"));
    }
    let pairs = PairGrid::Explicit(vec![(i, j)]).pairs(source.n())?;
    let pm = mc_pair_moments(source, &pairs, nu, replicates, seed);
    let m = match which {
        SumOrMax::Sum => &pm.s[0],
        SumOrMax::Max => &pm.m[0],
    };
    Ok(McEstimate::from_moments(m, seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub s_moment: f64,
    pub s_se: f64,
    pub m_moment: f64,
    pub m_se: f64,
    /// `A g^alpha(j - i + 1)`.
    pub bound: f64,
    /// `bound + 3 se - m_moment`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalReport {
    pub nu: f64,
    pub alpha: f64,
    /// Slope of the fitted envelope `g(m) = c_hat m`.
    pub c_hat: f64,
    pub certificate: Certificate,
    pub a: f64,
    pub verdict: Verdict,
    pub min_margin: f64,
    pub rows: Vec<PairRow>,
    pub replicates: Option<u64>,
    pub seed: Option<u64>,
}

/// Standard errors above this fraction of the mean make a verdict
/// inconclusive.
pub const MAX_RELATIVE_SE: f64 = 0.2;
pub const SE_MULTIPLIER: f64 = 3.0;

struct PairEstimates {
    s: Vec<(f64, f64)>,
    m: Vec<(f64, f64)>,
}

/// Fit `g(m) = c m` so that `c m >= (upper bound on E sup|S|^nu)^{1/alpha}`
/// at every pair, then check the maxima against `A g^alpha`.
fn fit_then_verify(
    pairs: &[(usize, usize)],
    est: &PairEstimates,
    n: usize,
    nu: f64,
    alpha: f64,
) -> Result<MaximalReport> {
    let mut c_hat: f64 = 0.0;
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let (mean, se) = est.s[p];
        let ucb = mean + SE_MULTIPLIER * se;
        c_hat = c_hat.max(ucb.max(0.0).powf(1.0 / alpha) / (j - i + 1) as f64);
    }
    let g = GrowthFunction::linear(c_hat, n.max(2), alpha)?;
    let certificate = check_condition_s(&g)?;
    if !certificate.admissible {
        return Err(Error::InadmissibleIndex {
            q: certificate.q_min,
            alpha,
            threshold: certificate.threshold,
        });
    }
    let a = constant_a(alpha, nu, certificate.q_min)?;
    let mut inconclusive = false;
    let mut min_margin = f64::INFINITY;
    let rows: Vec<PairRow> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let ((s_moment, s_se), (m_moment, m_se)) = (est.s[p], est.m[p]);
            for (mean, se) in [est.s[p], est.m[p]] {
                inconclusive |= mean > 0.0 && se > MAX_RELATIVE_SE * mean;
            }
            let bound = a * g.at(j - i + 1).powf(alpha);
            let margin = bound + SE_MULTIPLIER * m_se - m_moment;
            min_margin = min_margin.min(margin);
            PairRow {
                i,
                j,
                s_moment,
                s_se,
                m_moment,
                m_se,
                bound,
                margin,
            }
        })
        .collect();
    let verdict = if min_margin < 0.0 {
        Verdict::Fail
    } else if inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(MaximalReport {
        nu,
        alpha,
        c_hat,
        certificate,
        a,
        verdict,
        min_margin,
        rows,
        replicates: None,
        seed: None,
    })
}

fn check_exponents(nu: f64, alpha: f64) -> Result<()> {
    if !(nu >= 1.0) || !nu.is_finite() {
        return Err(invalid("nu", "must be a finite real >= 1"));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid("alpha", "must be a finite real > 1"));
    }
    Ok(())
}

/// Monte Carlo fit-then-verify run of the maximal inequality.
pub fn verify_maximal_inequality(
    source: &IncrementSource,
    nu: f64,
    alpha: f64,
    grid: &PairGrid,
    replicates: u64,
    seed: u64,
) -> Result<MaximalReport> {
    check_exponents(nu, alpha)?;
    check_replicates(replicates)?;
    let pairs = grid.pairs(source.n())?;
    let pm = mc_pair_moments(source, &pairs, nu, replicates, seed);
    let est = PairEstimates {
        s: pm.s.iter().map(|m| (m.mean(), m.std_error())).collect(),
        m: pm.m.iter().map(|m| (m.mean(), m.std_error())).collect(),
    };
    let mut report = fit_then_verify(&pairs, &est, source.n(), nu, alpha)?;
    report.replicates = Some(replicates);
    report.seed = Some(seed);
    Ok(report)
}

pub const MAX_ORACLE_N: usize = 12;

/// Exact moments by enumerating all `2^n` innovation paths.
pub fn exact_pair_moments(tv: &TwoValued, nu: f64, grid: &PairGrid) -> Result<(Vec<(usize, usize)>, Vec<f64>, Vec<f64>)> {
    let n = tv.n();
    if n > MAX_ORACLE_N {
        return Err(invalid("n", format!("{n} exceeds the enumeration limit {MAX_ORACLE_N}")));
    }
    let pairs = grid.pairs(n)?;
    let paths = 1u64 << n;
    let weight = 1.0 / paths as f64;
    let (mut es, mut em) = (vec![0.0; pairs.len()], vec![0.0; pairs.len()]);
    let (mut s, mut m) = (vec![0.0; pairs.len()], vec![0.0; pairs.len()]);
    for path in 0..paths {
        let incs = tv.increments(|k| path >> k & 1 == 1);
        path_stats(&incs, &pairs, nu, &mut s, &mut m);
        for p in 0..pairs.len() {
            es[p] += weight * s[p];
            em[p] += weight * m[p];
        }
    }
    Ok((pairs, es, em))
}

/// Fit-then-verify with exact expectations; no randomness involved.
pub fn exact_small_oracle(tv: &TwoValued, nu: f64, alpha: f64, grid: &PairGrid) -> Result<MaximalReport> {
    check_exponents(nu, alpha)?;
    let (pairs, es, em) = exact_pair_moments(tv, nu, grid)?;
    let est = PairEstimates {
        s: es.into_iter().map(|v| (v, 0.0)).collect(),
        m: em.into_iter().map(|v| (v, 0.0)).collect(),
    };
    fit_then_verify(&pairs, &est, tv.n(), nu, alpha)
}

fn check_even(nu: f64) -> Result<()> {
    if !(nu >= 2.0) || nu.fract() != 0.0 || (nu as u64) % 2 != 0 {
        return Err(Error::OddMomentOrder(nu));
    }
    Ok(())
}

/// `max_h max_{l=2..nu} (E|h - Eh|^{l(2+lambda)/2})^{1/(2+lambda)}` over the
/// net and the marginal laws of a row.
pub fn moment_scale(source: &ArraySource, nu: f64, lambda: f64) -> Result<f64> {
    let marginals = source.model.marginals(source.n)?;
    let mut seen = std::collections::HashSet::new();
    let distinct: Vec<_> = marginals
        .iter()
        .filter(|m| seen.insert(m.key()))
        .collect();
    let mut tau: f64 = 0.0;
    for h in &source.net {
        for marginal in &distinct {
            for l in 2..=(nu as usize) {
                let k = l as f64 * (2.0 + lambda) / 2.0;
                let q = central_moment(h, marginal, k);
                tau = tau.max(q.value.max(0.0).powf(1.0 / (2.0 + lambda)));
            }
        }
    }
    Ok(tau)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub m: usize,
    /// `max_h ||S(i,j)(h)||_{L_nu}` estimate over the probed blocks.
    pub norm: f64,
    pub norm_se: f64,
    pub c_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentFit {
    pub nu: f64,
    pub lambda: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rows: Vec<MomentRow>,
    pub band_ratio: f64,
    pub stable: bool,
    pub replicates: u64,
    pub seed: u64,
}

/// Width of the stability band `max c_hat / min c_hat`.
pub const STABILITY_BAND: f64 = 4.0;

/// Fits `c_hat(m) = ||S||_{L_nu} / (sqrt(m) max(m^{-1/2}, tau))` over blocks
/// of length `m` at the start and the end of a row of length `max(m)`.
pub fn fit_moment_constant(
    model: &Model,
    net: Vec<Member>,
    nu: f64,
    lambda: f64,
    m_grid: &[usize],
    replicates: u64,
    seed: u64,
) -> Result<MomentFit> {
    check_even(nu)?;
    check_replicates(replicates)?;
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(invalid("m_grid", "need positive block lengths"));
    }
    let zeta = zeta(&model.mixing_profile()?, lambda, nu, 1e-10).map_err(|e| {
        Error::Uncertifiable(format!("weighted mixing series is not certified finite: {e}"))
    })?;
    let n = *m_grid.iter().max().expect("nonempty");
    let source = ArraySource::new(model.clone(), net, n)?;
    let tau = moment_scale(&source, nu, lambda)?;
    let mut pairs = Vec::new();
    for &m in m_grid {
        pairs.push((1, m));
        pairs.push((n - m + 1, n));
    }
    let members = source.net.len();
    let slots = pairs.len() * members;
    let moments = replicate_reduce(
        replicates,
        || vec![Moments::default(); slots],
        |acc, r| {
            let row = source.row(replicate_seed(seed, r)).expect("validated model");
            let z = source.centered(&row);
            for (f, zf) in z.iter().enumerate() {
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                for v in zf {
                    prefix.push(prefix.last().unwrap() + v);
                }
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    acc[p * members + f].push((prefix[j] - prefix[i - 1]).powf(nu));
                }
            }
        },
        |a, b| merge_all(a, &b),
    );
    let rows: Vec<MomentRow> = m_grid
        .iter()
        .enumerate()
        .map(|(g, &m)| {
            let mut best = (0.0, 0.0);
            for p in [2 * g, 2 * g + 1] {
                for f in 0..members {
                    let mo = &moments[p * members + f];
                    let norm = mo.mean().max(0.0).powf(1.0 / nu);
                    if norm > best.0 {
                        // delta method for mean^{1/nu}
                        let se = mo.std_error() / (nu * mo.mean().powf(1.0 - 1.0 / nu));
                        best = (norm, se);
                    }
                }
            }
            let mf = m as f64;
            let scale = mf.sqrt() * mf.powf(-0.5).max(tau);
            MomentRow {
                m,
                norm: best.0,
                norm_se: best.1,
                c_hat: best.0 / scale,
            }
        })
        .collect();
    let positive: Vec<f64> = rows.iter().map(|r| r.c_hat).filter(|c| *c > 0.0).collect();
    let band_ratio = if positive.is_empty() {
        1.0
    } else {
        positive.iter().cloned().fold(0.0, f64::max) / positive.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(MomentFit {
        nu,
        lambda,
        tau,
        zeta: zeta.value,
        rows,
        band_ratio,
        stable: band_ratio <= STABILITY_BAND,
        replicates,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub indices: Vec<usize>,
    pub split: usize,
    pub gap: usize,
    pub alpha_at_gap: f64,
    pub moment_bound: f64,
    /// `|E g(joint) - E g(decoupled)|` estimate.
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub replicates: u64,
    pub seed: u64,
}

/// Compares `|E g(X_{i_1..i_m}) - E g(decoupled)|` for the product functional
/// `g = prod_k h_k(x_k)` with `4 M^{1/(1+d)} alpha(gap)^{d/(1+d)}`,
/// `d = lambda / 2`. The decoupled expectation draws the coordinates after
/// `split` from an independent row.
pub fn check_covariance_inequality(
    model: &Model,
    factors: &[Member],
    indices: &[usize],
    split: usize,
    lambda: f64,
    replicates: u64,
    seed: u64,
) -> Result<CovarianceReport> {
    check_replicates(replicates)?;
    model.validate()?;
    if factors.len() != indices.len() || indices.len() < 2 {
        return Err(invalid("indices", "need at least two indices, one factor each"));
    }
    if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("indices", "must be strictly increasing and 1-based"));
    }
    if split == 0 || split >= indices.len() {
        return Err(invalid("split", format!("{split} must lie in 1..{}", indices.len())));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    let gap = indices[split] - indices[split - 1];
    let n = *indices.last().expect("nonempty");
    let d = lambda / 2.0;
    let moment_bound = factors.iter().map(|h| h.sup_abs()).product::<f64>().powf(1.0 + d);
    let alpha_at_gap = model.mixing_profile()?.alpha(gap);
    let rhs = 4.0 * moment_bound.powf(1.0 / (1.0 + d)) * alpha_at_gap.powf(d / (1.0 + d));
    let product = |first: &[f64], second: &[f64]| {
        factors
            .iter()
            .zip(indices)
            .enumerate()
            .map(|(k, (h, &i))| h.eval(if k < split { first[i - 1] } else { second[i - 1] }))
            .product::<f64>()
    };
    let diff = replicate_reduce(
        replicates,
        Moments::default,
        |acc, r| {
            let rs = replicate_seed(seed, r);
            let a = TriangularArrayRow::generate(model, n, replicate_seed(rs, 0)).expect("validated model");
            let b = TriangularArrayRow::generate(model, n, replicate_seed(rs, 1)).expect("validated model");
            acc.push(product(&a.values, &a.values) - product(&a.values, &b.values));
        },
        |a, b| a.merge(&b),
    );
    let lhs = diff.mean().abs();
    let lhs_se = diff.std_error();
    let margin = rhs + SE_MULTIPLIER * lhs_se - lhs;
    Ok(CovarianceReport {
        indices: indices.to_vec(),
        split,
        gap,
        alpha_at_gap,
        moment_bound,
        lhs,
        lhs_se,
        rhs,
        margin,
        pass: margin >= 0.0,
        replicates,
        seed,
    })
}

/// Exponent restrictions on `kappa` for the chaining bound.
pub fn kappa_upper(nu: f64, lambda: f64) -> f64 {
    (0.5 - 1.0 / nu).min(lambda / 4.0)
}

pub fn check_kappa(kappa: f64, nu: f64, lambda: f64) -> Result<()> {
    let upper = kappa_upper(nu, lambda);
    if !(kappa > 0.0 && kappa < upper) {
        return Err(Error::KappaOutOfRange { kappa, upper });
    }
    Ok(())
}

/// Inputs of the chaining bound that do not depend on `m` or `delta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainingSpec {
    pub n_fn: NFn,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub c: f64,
}

impl ChainingSpec {
    pub fn new(n_fn: NFn, nu: f64, lambda: f64, kappa: f64, c: f64) -> Result<Self> {
        if !(nu > 2.0) {
            return Err(invalid("nu", "must exceed 2"));
        }
        check_kappa(kappa, nu, lambda)?;
        if !(c >= 0.0) {
            return Err(invalid("c", "must be nonnegative"));
        }
        Ok(Self {
            n_fn,
            nu,
            lambda,
            kappa,
            c,
        })
    }

    /// `C [m (N^{2/nu}(eta) (m^{-kappa} + delta + delta^{nu/2}) + I(eta))^2]^{nu/2}`
    /// with `I(eta) = int_0^eta N^{1/nu}(e) e^{-lambda/(2+lambda)} de`.
    pub fn rhs(&self, m: usize, delta: f64, eta: f64) -> Result<f64> {
        if m == 0 || !(delta >= 0.0) {
            return Err(invalid("m, delta", "need m >= 1 and delta >= 0"));
        }
        let integral = bracketing_integral(&self.n_fn, self.lambda, self.nu, eta)?.value;
        let mf = m as f64;
        let n_eta = self.n_fn.eval(eta).max(1.0);
        let inner = n_eta.powf(2.0 / self.nu) * (mf.powf(-self.kappa) + delta + delta.powf(self.nu / 2.0)) + integral;
        Ok(self.c * (mf * inner * inner).powf(self.nu / 2.0))
    }
}

/// `sup |S(x) - S(y)|` over `0 <= x < y <= 1` with `y - x <= h`, where
/// `S(x) = #{k : u_k <= x} - m x` for a sorted uniform sample `u`.
///
/// This is the supremum over all half-line indicators at once, not over a
/// net.
pub fn halfline_window_sup(sorted: &[f64], h: f64) -> f64 {
    let m = sorted.len();
    let mf = m as f64;
    let mut best: f64 = 0.0;
    // windows (u_k - 0, u_l]: (l - m u_l) - (k - m u_k) + 1 for u_l - u_k <= h
    let up: Vec<f64> = (0..m).map(|l| l as f64 - mf * sorted[l]).collect();
    let mut window = SlidingMax::default();
    let mut end = 0;
    for k in 0..m {
        while end < m && sorted[end] - sorted[k] <= h {
            window.push(end, up[end]);
            end += 1;
        }
        window.evict_before(k);
        best = best.max(window.max() - up[k] + 1.0);
    }
    // windows (u_a, u_{b+1} - 0) holding points a+1..b, with u_0 = 0 and
    // u_{m+1} = 1, capped at length h
    let at = |i: usize| -> f64 {
        match i {
            0 => 0.0,
            i if i > m => 1.0,
            i => sorted[i - 1],
        }
    };
    let down: Vec<f64> = (0..=m).map(|b| mf * at(b + 1) - b as f64).collect();
    let mut window = SlidingMax::default();
    let mut end = 0;
    for a in 0..=m {
        while end <= m && at(end + 1) - at(a) < h {
            window.push(end, down[end]);
            end += 1;
        }
        window.evict_before(a);
        if end > a {
            best = best.max(window.max() - (mf * at(a) - a as f64));
        }
        if end <= m {
            best = best.max(mf * h - (end - a) as f64);
        }
    }
    best
}

/// Maximum over a window whose ends only move forward.
#[derive(Default)]
struct SlidingMax {
    queue: std::collections::VecDeque<(usize, f64)>,
}

impl SlidingMax {
    fn push(&mut self, index: usize, value: f64) {
        while self.queue.back().is_some_and(|&(_, v)| v <= value) {
            self.queue.pop_back();
        }
        self.queue.push_back((index, value));
    }

    fn evict_before(&mut self, index: usize) {
        while self.queue.front().is_some_and(|&(i, _)| i < index) {
            self.queue.pop_front();
        }
    }

    fn max(&self) -> f64 {
        self.queue.front().map_or(f64::NEG_INFINITY, |&(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub m: usize,
    pub delta: f64,
    pub eta: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub c_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `max_m c_hat / c_hat(smallest m)` per delta.
    pub growth: Vec<(f64, f64)>,
    /// `max c_hat / min c_hat` per delta, over nonzero entries.
    pub spread: Vec<(f64, f64)>,
    pub bounded: bool,
    pub replicates: u64,
    pub seed: u64,
}

/// Scaling check of the chaining bound for the half-line indicators on
/// independent uniform rows, where the supremum over `rho(f - g) <= delta`
/// with `rho = rho_{nu(2+lambda)/2}` is computed exactly. Uses `C = 1` and
/// `eta = sqrt(delta)`; the verdict asks that `c_hat` not grow with `m` by
/// more than the stability band.
pub fn scaling_check(
    spec: &ChainingSpec,
    m_grid: &[usize],
    delta_grid: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<ScalingReport> {
    check_replicates(replicates)?;
    if m_grid.is_empty() || delta_grid.is_empty() || m_grid.contains(&0) {
        return Err(invalid("grid", "need nonempty m and delta grids"));
    }
    if delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(invalid("delta", "must lie in (0, 1]"));
    }
    let p = spec.nu * (2.0 + spec.lambda) / 2.0;
    let n = *m_grid.iter().max().expect("nonempty");
    let cells = m_grid.len() * delta_grid.len();
    let moments = replicate_reduce(
        replicates,
        || vec![Moments::default(); cells],
        |acc, r| {
            let mut s = InnovationStream::new(replicate_seed(seed, r));
            let u: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
            for (mi, &m) in m_grid.iter().enumerate() {
                let mut sorted = u[..m].to_vec();
                sorted.sort_by(f64::total_cmp);
                for (di, &delta) in delta_grid.iter().enumerate() {
                    // rho(f_x - f_y) = |x - y|^{1/p} under the uniform law
                    let sup = halfline_window_sup(&sorted, delta.powf(p));
                    acc[mi * delta_grid.len() + di].push(sup.powf(spec.nu));
                }
            }
        },
        |a, b| merge_all(a, &b),
    );
    let mut rows = Vec::with_capacity(cells);
    for (mi, &m) in m_grid.iter().enumerate() {
        for (di, &delta) in delta_grid.iter().enumerate() {
            let mo = &moments[mi * delta_grid.len() + di];
            let eta = delta.sqrt();
            let rhs = spec.rhs(m, delta, eta)?;
            let lhs = mo.mean();
            rows.push(ScalingRow {
                m,
                delta,
                eta,
                lhs,
                lhs_se: mo.std_error(),
                rhs,
                c_hat: lhs / rhs,
            });
        }
    }
    let mut growth = Vec::new();
    let mut spread = Vec::new();
    let mut bounded = true;
    let m_min = *m_grid.iter().min().expect("nonempty");
    for &delta in delta_grid {
        let cs: Vec<&ScalingRow> = rows.iter().filter(|r| r.delta == delta && r.c_hat > 0.0).collect();
        if cs.is_empty() {
            continue;
        }
        let max = cs.iter().map(|r| r.c_hat).fold(0.0, f64::max);
        let min = cs.iter().map(|r| r.c_hat).fold(f64::INFINITY, f64::min);
        let base = cs.iter().find(|r| r.m == m_min).map_or(min, |r| r.c_hat);
        growth.push((delta, max / base));
        spread.push((delta, max / min));
        bounded &= max / base <= STABILITY_BAND;
    }
    Ok(ScalingReport {
        rows,
        growth,
        spread,
        bounded,
        replicates,
        seed,
    })
}
