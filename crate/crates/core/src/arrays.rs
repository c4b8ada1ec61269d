//! Triangular-array rows with known strong-mixing profiles.
//!
//! Three generators are shipped: independent rows (optionally with
//! time-varying Gaussian marginals), `m`-dependent rows built from a moving
//! window of uniform innovations, and a time-varying Gaussian AR(1). Each
//! model exposes its per-index marginal law (used for exact centering) and an
//! analytic mixing profile; [`estimate_alpha_lower`] gives an empirical lower
//! bound on the mixing coefficient for cross-checking.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::InnovationStream;

/// A deterministic function on rescaled time `u = i/n in [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamFn {
    Constant { value: f64 },
    Linear { start: f64, end: f64 },
    Step { before: f64, after: f64, at: f64 },
    Sine { level: f64, amplitude: f64, periods: f64 },
}

impl ParamFn {
    pub fn constant(value: f64) -> Self {
        ParamFn::Constant { value }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ParamFn::Constant { value } => value,
            ParamFn::Linear { start, end } => start + (end - start) * u,
            ParamFn::Step { before, after, at } => {
                if u < at {
                    before
                } else {
                    after
                }
            }
            ParamFn::Sine {
                level,
                amplitude,
                periods,
            } => level + amplitude * (std::f64::consts::TAU * periods * u).sin(),
        }
    }

    /// Upper bound on `sup_{u in [0,1]} |f(u)|`.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            ParamFn::Constant { value } => value.abs(),
            ParamFn::Linear { start, end } => start.abs().max(end.abs()),
            ParamFn::Step { before, after, .. } => before.abs().max(after.abs()),
            ParamFn::Sine {
                level, amplitude, ..
            } => level.abs() + amplitude.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IidMarginal {
    Uniform01,
    Gauss { mean: ParamFn, sd: ParamFn },
}

/// Model descriptor of a row generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Model {
    Iid { marginal: IidMarginal },
    MDependent { m: usize },
    TvAr1 { coef: ParamFn, innovation_sd: f64 },
}

/// Law of a single entry `X_{i,n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform01,
    Gaussian { mean: f64, sd: f64 },
}

impl Marginal {
    pub(crate) fn key(&self) -> (u8, u64, u64) {
        match *self {
            Marginal::Uniform01 => (0, 0, 0),
            Marginal::Gaussian { mean, sd } => (1, mean.to_bits(), sd.to_bits()),
        }
    }
}

impl Model {
    pub fn iid_uniform() -> Self {
        Model::Iid {
            marginal: IidMarginal::Uniform01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Iid { .. } | Model::MDependent { .. } => Ok(()),
            Model::TvAr1 {
                coef,
                innovation_sd,
            } => {
                if !(*innovation_sd > 0.0) || !innovation_sd.is_finite() {
                    return Err(invalid("innovation_sd", "must be a positive real"));
                }
                if coef.sup_abs() >= 1.0 {
                    return Err(invalid(
                        "coef",
                        format!("sup |a(u)| = {} must be < 1", coef.sup_abs()),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Analytic mixing profile of the model (an upper bound on `alpha(t)`).
    pub fn mixing_profile(&self) -> Result<MixingProfile> {
        self.validate()?;
        Ok(match self {
            Model::Iid { .. } => MixingProfile::zero_beyond(0),
            Model::MDependent { m } => MixingProfile::zero_beyond(*m),
            Model::TvAr1 { coef, .. } => MixingProfile::geometric(1.0, coef.sup_abs())?,
        })
    }

    /// Marginal law of `X_{i,n}` for `i = 1..=n`.
    pub fn marginals(&self, n: usize) -> Result<Vec<Marginal>> {
        if n == 0 {
            return Err(invalid("n", "row length must be positive"));
        }
        let nf = n as f64;
        match self {
            Model::Iid {
                marginal: IidMarginal::Uniform01,
            }
            | Model::MDependent { .. } => Ok(vec![Marginal::Uniform01; n]),
            Model::Iid {
                marginal: IidMarginal::Gauss { mean, sd },
            } => (1..=n)
                .map(|i| {
                    let u = i as f64 / nf;
                    let s = sd.eval(u);
                    if !(s > 0.0) {
                        return Err(Error::NonPositiveScale { index: i, value: s });
                    }
                    Ok(Marginal::Gaussian {
                        mean: mean.eval(u),
                        sd: s,
                    })
                })
                .collect(),
            Model::TvAr1 {
                coef,
                innovation_sd,
            } => {
                let coefs = ar_coefficients(coef, n)?;
                let mut var = 0.0;
                Ok(coefs
                    .iter()
                    .map(|a| {
                        var = a * a * var + innovation_sd * innovation_sd;
                        Marginal::Gaussian {
                            mean: 0.0,
                            sd: var.sqrt(),
                        }
                    })
                    .collect())
            }
        }
    }
}

fn ar_coefficients(coef: &ParamFn, n: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    (1..=n)
        .map(|i| {
            let a = coef.eval(i as f64 / nf);
            if !(a.abs() < 1.0) {
                Err(Error::NonStationaryCoefficient { index: i, value: a })
            } else {
                Ok(a)
            }
        })
        .collect()
}

/// One row `X_{1,n}, ..., X_{n,n}` of a simulated array.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularArrayRow {
    pub n: usize,
    pub values: Vec<f64>,
    pub model: Model,
    pub seed: u64,
}

impl AsRef<[f64]> for TriangularArrayRow {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl TriangularArrayRow {
    pub fn generate(model: &Model, n: usize, seed: u64) -> Result<Self> {
        match model {
            Model::Iid { marginal } => gen_iid(n, marginal, seed),
            Model::MDependent { m } => gen_m_dependent(n, *m, seed),
            Model::TvAr1 {
                coef,
                innovation_sd,
            } => gen_tvar1(n, coef, *innovation_sd, seed),
        }
    }

    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        self.model.marginals(self.n)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("n", "row length must be positive"))
    } else {
        Ok(())
    }
}

pub fn gen_iid(n: usize, marginal: &IidMarginal, seed: u64) -> Result<TriangularArrayRow> {
    check_n(n)?;
    let mut stream = InnovationStream::new(seed);
    let values = match marginal {
        IidMarginal::Uniform01 => (0..n).map(|_| stream.uniform()).collect(),
        IidMarginal::Gauss { mean, sd } => {
            let nf = n as f64;
            let mut out = Vec::with_capacity(n);
            for i in 1..=n {
                let u = i as f64 / nf;
                let s = sd.eval(u);
                if !(s > 0.0) {
                    return Err(Error::NonPositiveScale { index: i, value: s });
                }
                out.push(mean.eval(u) + s * stream.normal());
            }
            out
        }
    };
    Ok(TriangularArrayRow {
        n,
        values,
        model: Model::Iid {
            marginal: marginal.clone(),
        },
        seed,
    })
}

/// `X_i = frac(e_i + ... + e_{i+m})` with iid uniform innovations `e`.
///
/// A sum of independent uniforms taken modulo one is again uniform, so every
/// entry is exactly Uniform(0,1) while entries more than `m` apart are
/// independent.
pub fn gen_m_dependent(n: usize, m: usize, seed: u64) -> Result<TriangularArrayRow> {
    check_n(n)?;
    let mut stream = InnovationStream::new(seed);
    let innovations: Vec<f64> = (0..n + m).map(|_| stream.uniform()).collect();
    let values = innovations
        .windows(m + 1)
        .map(|w| w.iter().sum::<f64>().fract())
        .collect();
    Ok(TriangularArrayRow {
        n,
        values,
        model: Model::MDependent { m },
        seed,
    })
}

/// `X_i = a(i/n) X_{i-1} + sd * e_i`, `X_0 = 0`, standard normal `e_i`.
pub fn gen_tvar1(
    n: usize,
    coef: &ParamFn,
    innovation_sd: f64,
    seed: u64,
) -> Result<TriangularArrayRow> {
    check_n(n)?;
    let model = Model::TvAr1 {
        coef: coef.clone(),
        innovation_sd,
    };
    if !(innovation_sd > 0.0) || !innovation_sd.is_finite() {
        return Err(invalid("innovation_sd", "must be a positive real"));
    }
    let coefs = ar_coefficients(coef, n)?;
    let mut stream = InnovationStream::new(seed);
    let mut x = 0.0;
    let values = coefs
        .iter()
        .map(|a| {
            x = a * x + innovation_sd * stream.normal();
            x
        })
        .collect();
    Ok(TriangularArrayRow {
        n,
        values,
        model,
        seed,
    })
}

/// Tail law of a mixing profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingKind {
    /// `alpha(t) = 0` for `t > m`.
    ExactZeroBeyond { m: usize },
    /// `alpha(t) <= c * r^t`.
    Geometric { c: f64, r: f64 },
    /// Explicit values `alpha(1), alpha(2), ...`; no tail law.
    Tabulated { values: Vec<f64> },
}

/// Upper bound on the strong-mixing sequence `t -> alpha(t)`.
///
/// Values are capped at 1/4, the universal bound on
/// `|P(A n B) - P(A)P(B)|`; `alpha(0) = 1` by convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub kind: MixingKind,
}

pub const ALPHA_CAP: f64 = 0.25;

impl MixingProfile {
    pub fn zero_beyond(m: usize) -> Self {
        Self {
            kind: MixingKind::ExactZeroBeyond { m },
        }
    }

    pub fn geometric(c: f64, r: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid("c", "must be a finite nonnegative real"));
        }
        if !(0.0..1.0).contains(&r) {
            return Err(invalid("r", format!("{r} must lie in [0, 1)")));
        }
        Ok(Self {
            kind: MixingKind::Geometric { c, r },
        })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid("values", format!("alpha value {v} outside [0, 1]")));
        }
        Ok(Self {
            kind: MixingKind::Tabulated { values },
        })
    }

    pub fn alpha(&self, t: usize) -> f64 {
        if t == 0 {
            return 1.0;
        }
        match &self.kind {
            MixingKind::ExactZeroBeyond { m } => {
                if t <= *m {
                    ALPHA_CAP
                } else {
                    0.0
                }
            }
            MixingKind::Geometric { c, r } => (c * r.powi(t as i32)).min(ALPHA_CAP),
            // beyond the table the last value bounds a nonincreasing sequence
            MixingKind::Tabulated { values } => values
                .get(t - 1)
                .or(values.last())
                .copied()
                .unwrap_or(ALPHA_CAP),
        }
    }
}

/// Family of past/future events enumerated by [`estimate_alpha_lower`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventFamily {
    /// Single cells of the discretized window.
    Cells,
    /// All products of contiguous bin ranges (contains `Cells`).
    Rectangles,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    /// `max |P(A n B) - P(A)P(B)|` over the enumerated events.
    pub value: f64,
    /// Standard error of the maximizing covariance under independence.
    pub null_se: f64,
    pub events_per_side: usize,
    pub replicates: usize,
}

pub const MIN_ALPHA_REPLICATES: usize = 100;
const MAX_WINDOW: usize = 3;

/// Restricted-event lower bound on `alpha_n(t)`.
///
/// The past window is the `window` coordinates ending at the split point
/// `k = (n - t - window) / 2 + window`, the future window the `window`
/// coordinates starting at `k + t`. Each coordinate is discretized into
/// `bins` equal-probability bins from its pooled empirical quantiles.
pub fn estimate_alpha_lower<R: AsRef<[f64]>>(
    rows: &[R],
    t: usize,
    bins: usize,
    window: usize,
    family: EventFamily,
) -> Result<AlphaEstimate> {
    if rows.len() < MIN_ALPHA_REPLICATES {
        return Err(Error::TooFewReplicates {
            got: rows.len(),
            need: MIN_ALPHA_REPLICATES,
        });
    }
    if t == 0 {
        return Err(invalid("t", "lag must be at least 1"));
    }
    if bins < 2 {
        return Err(invalid("bins", "need at least 2 bins"));
    }
    if window == 0 || window > MAX_WINDOW {
        return Err(invalid("window", format!("must lie in 1..={MAX_WINDOW}")));
    }
    let n = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != n) {
        return Err(invalid("rows", "replicate rows differ in length"));
    }
    if n < 2 * window + t {
        return Err(invalid("t", format!("row of length {n} too short for lag {t}")));
    }
    // 0-based: past = [k - window, k), future = [k - 1 + t, k - 1 + t + window)
    let k = (n - t - window) / 2 + window;
    let past: Vec<usize> = (k - window..k).collect();
    let future: Vec<usize> = (k - 1 + t..k - 1 + t + window).collect();

    let cuts = |coord: usize| -> Vec<f64> {
        let mut col: Vec<f64> = rows.iter().map(|r| r.as_ref()[coord]).collect();
        col.sort_by(f64::total_cmp);
        (1..bins)
            .map(|j| col[(j * col.len() / bins).min(col.len() - 1)])
            .collect()
    };
    let past_cuts: Vec<Vec<f64>> = past.iter().map(|&c| cuts(c)).collect();
    let future_cuts: Vec<Vec<f64>> = future.iter().map(|&c| cuts(c)).collect();
    let cell = |row: &[f64], coords: &[usize], cuts: &[Vec<f64>]| -> usize {
        coords.iter().zip(cuts).fold(0, |acc, (&c, cs)| {
            let b = cs.iter().filter(|&&q| row[c] > q).count();
            acc * bins + b
        })
    };

    let cells = bins.pow(window as u32);
    let mut joint = vec![0u64; cells * cells];
    for r in rows {
        let row = r.as_ref();
        let a = cell(row, &past, &past_cuts);
        let b = cell(row, &future, &future_cuts);
        joint[a * cells + b] += 1;
    }
    let total = rows.len() as f64;
    let events = enumerate_events(bins, window, family);

    let mut pa = vec![0.0; events.len()];
    let mut pb = vec![0.0; events.len()];
    for (e, members) in events.iter().enumerate() {
        for a in 0..cells {
            for b in 0..cells {
                let c = joint[a * cells + b] as f64;
                if members[a] {
                    pa[e] += c;
                }
                if members[b] {
                    pb[e] += c;
                }
            }
        }
        pa[e] /= total;
        pb[e] /= total;
    }

    let mut best = (0.0, 0.0);
    for (ea, ma) in events.iter().enumerate() {
        for (eb, mb) in events.iter().enumerate() {
            let mut both = 0u64;
            for a in (0..cells).filter(|&a| ma[a]) {
                for b in (0..cells).filter(|&b| mb[b]) {
                    both += joint[a * cells + b];
                }
            }
            let cov = (both as f64 / total - pa[ea] * pb[eb]).abs();
            if cov > best.0 {
                let se = (pa[ea] * (1.0 - pa[ea]) * pb[eb] * (1.0 - pb[eb]) / total).sqrt();
                best = (cov, se);
            }
        }
    }
    Ok(AlphaEstimate {
        value: best.0,
        null_se: best.1,
        events_per_side: events.len(),
        replicates: rows.len(),
    })
}

/// Membership masks over the `bins^window` cells.
fn enumerate_events(bins: usize, window: usize, family: EventFamily) -> Vec<Vec<bool>> {
    let ranges: Vec<(usize, usize)> = match family {
        EventFamily::Cells => (0..bins).map(|b| (b, b)).collect(),
        EventFamily::Rectangles => (0..bins)
            .flat_map(|lo| (lo..bins).map(move |hi| (lo, hi)))
            .collect(),
    };
    let cells = bins.pow(window as u32);
    let combos = ranges.len().pow(window as u32);
    (0..combos)
        .map(|mut code| {
            let mut rect = Vec::with_capacity(window);
            for _ in 0..window {
                rect.push(ranges[code % ranges.len()]);
                code /= ranges.len();
            }
            rect.reverse();
            (0..cells)
                .map(|mut c| {
                    let mut inside = true;
                    for &(lo, hi) in rect.iter().rev() {
                        let b = c % bins;
                        c /= bins;
                        inside &= (lo..=hi).contains(&b);
                    }
                    inside
                })
                .collect()
        })
        .collect()
}
