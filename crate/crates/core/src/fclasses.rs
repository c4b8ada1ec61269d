//! Function classes, their `rho_p` seminorms, finite nets and the
//! difference family `F_delta`.
//!
//! Suprema over a class are always replaced by maxima over a finite net.
//! A net maximum never exceeds the true supremum, so upper-bound
//! inequalities checked on nets remain genuine checks while equicontinuity
//! diagnostics computed on nets are lower bounds.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::arrays::Marginal;
use crate::error::{invalid, Error, Result};
use crate::quad::{adaptive, Quadrature};

/// Piecewise-linear function through `(knots[k], values[k])`, constant
/// outside the knot range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFn {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl TabulatedFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(invalid("knots", "need equally many knots and values (>= 1)"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("knots", "must be strictly increasing"));
        }
        if values.iter().chain(&knots).any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Self { knots, values })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            knots: vec![0.0],
            values: vec![c],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.knots.partition_point(|&t| t <= x);
        if k == 0 {
            return self.values[0];
        }
        if k == self.knots.len() {
            return self.values[k - 1];
        }
        let (x0, x1) = (self.knots[k - 1], self.knots[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassKind {
    /// `f_x = 1_{(-inf, x]}`, `x in [0, 1]`.
    HalflineIndicators,
    /// `f_t(x) = clip(t x, 0, 1)`, `t in [0, 1]`.
    LipschitzBall,
    FiniteExplicit { functions: Vec<TabulatedFn> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    #[serde(flatten)]
    pub kind: ClassKind,
    /// Adjoin the zero function to every net.
    #[serde(default)]
    pub include_zero: bool,
}

impl FunctionClass {
    pub fn halfline() -> Self {
        Self {
            kind: ClassKind::HalflineIndicators,
            include_zero: false,
        }
    }

    pub fn lipschitz_ball() -> Self {
        Self {
            kind: ClassKind::LipschitzBall,
            include_zero: false,
        }
    }

    pub fn finite(functions: Vec<TabulatedFn>) -> Self {
        Self {
            kind: ClassKind::FiniteExplicit { functions },
            include_zero: false,
        }
    }

    pub fn with_zero(mut self) -> Self {
        self.include_zero = true;
        self
    }

    /// `F(x) >= sup_f |f(x)|`.
    pub fn envelope(&self, x: f64) -> f64 {
        match &self.kind {
            ClassKind::HalflineIndicators | ClassKind::LipschitzBall => 1.0,
            ClassKind::FiniteExplicit { functions } => {
                functions.iter().fold(0.0, |m, f| m.max(f.eval(x).abs()))
            }
        }
    }

    /// `sup_x F(x)`.
    pub fn envelope_bound(&self) -> f64 {
        match &self.kind {
            ClassKind::HalflineIndicators | ClassKind::LipschitzBall => 1.0,
            ClassKind::FiniteExplicit { functions } => {
                functions.iter().fold(0.0, |m, f| m.max(f.sup_abs()))
            }
        }
    }

    pub fn member(&self, parameter: f64) -> Result<Member> {
        if !(0.0..=1.0).contains(&parameter) {
            return Err(invalid("parameter", format!("{parameter} outside [0, 1]")));
        }
        match &self.kind {
            ClassKind::HalflineIndicators => Ok(Member::Halfline(parameter)),
            ClassKind::LipschitzBall => Ok(Member::Lipschitz(parameter)),
            ClassKind::FiniteExplicit { .. } => Err(Error::Unsupported(
                "finite classes are indexed by position, not by a real parameter".into(),
            )),
        }
    }

    pub fn is_one_parameter(&self) -> bool {
        !matches!(self.kind, ClassKind::FiniteExplicit { .. })
    }

    /// `points` equispaced parameters on `[0, 1]`, or every function of a
    /// finite class; the zero function is appended when requested.
    pub fn parameter_grid(&self, points: usize) -> Result<Vec<Member>> {
        let mut net = match &self.kind {
            ClassKind::FiniteExplicit { functions } => functions
                .iter()
                .enumerate()
                .map(|(index, f)| Member::Tabulated {
                    index,
                    f: Arc::new(f.clone()),
                })
                .collect(),
            _ => {
                if points < 2 {
                    return Err(invalid("points", "a parameter grid needs at least two points"));
                }
                let last = (points - 1) as f64;
                (0..points)
                    .map(|i| self.member(i as f64 / last))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if self.include_zero {
            net.push(Member::Zero);
        }
        Ok(net)
    }
}

/// A single member of a class.
#[derive(Clone, Debug, PartialEq)]
pub enum Member {
    Zero,
    Halfline(f64),
    Lipschitz(f64),
    Tabulated { index: usize, f: Arc<TabulatedFn> },
}

impl Member {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Member::Zero => 0.0,
            Member::Halfline(t) => {
                if x <= *t {
                    1.0
                } else {
                    0.0
                }
            }
            Member::Lipschitz(t) => (t * x).clamp(0.0, 1.0),
            Member::Tabulated { f, .. } => f.eval(x),
        }
    }

    /// Real parameter (or list position) identifying the member.
    pub fn parameter(&self) -> f64 {
        match self {
            Member::Zero => f64::NAN,
            Member::Halfline(t) | Member::Lipschitz(t) => *t,
            Member::Tabulated { index, .. } => *index as f64,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Member::Zero => "zero".into(),
            Member::Halfline(t) => format!("halfline({t})"),
            Member::Lipschitz(t) => format!("lipschitz({t})"),
            Member::Tabulated { index, .. } => format!("tabulated[{index}]"),
        }
    }

    /// `sup_x |f(x)|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Member::Zero => 0.0,
            Member::Halfline(_) => 1.0,
            Member::Lipschitz(t) => {
                if *t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Member::Tabulated { f, .. } => f.sup_abs(),
        }
    }

    /// Points where the member is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Member::Zero => vec![],
            Member::Halfline(t) => vec![*t],
            Member::Lipschitz(t) => {
                if *t > 0.0 {
                    vec![0.0, 1.0 / t]
                } else {
                    vec![]
                }
            }
            Member::Tabulated { f, .. } => f.knots.clone(),
        }
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn cdf(marginal: &Marginal, x: f64) -> f64 {
    match *marginal {
        Marginal::Uniform01 => x.clamp(0.0, 1.0),
        Marginal::Gaussian { mean, sd } => std_normal_cdf((x - mean) / sd),
    }
}

/// Quadrature error above which a value is flagged low-confidence.
pub const CONFIDENCE_TOL: f64 = 1e-9;
const GAUSS_HALF_WIDTH: f64 = 12.0;

/// `E g(X)` by adaptive quadrature, split at the given breakpoints.
fn expect<G: Fn(f64) -> f64>(g: G, marginal: &Marginal, breaks: &[f64]) -> Quadrature {
    let (lo, hi, weight): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *marginal {
        Marginal::Uniform01 => (0.0, 1.0, Box::new(|_| 1.0)),
        Marginal::Gaussian { mean, sd } => (
            mean - GAUSS_HALF_WIDTH * sd,
            mean + GAUSS_HALF_WIDTH * sd,
            Box::new(move |x| std_normal_pdf((x - mean) / sd) / sd),
        ),
    };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = Quadrature {
        value: 0.0,
        error: 0.0,
    };
    for w in cuts.windows(2) {
        let q = adaptive(|x| g(x) * weight(x), w[0], w[1], 1e-15, 1e-13, 200);
        total.value += q.value;
        total.error += q.error;
    }
    total
}

/// `E f(X)` under `marginal`; closed form where available.
pub fn member_mean(member: &Member, marginal: &Marginal) -> Quadrature {
    let exact = |value| Quadrature { value, error: 0.0 };
    match (member, marginal) {
        (Member::Zero, _) => exact(0.0),
        (Member::Halfline(t), m) => exact(cdf(m, *t)),
        (Member::Lipschitz(t), Marginal::Uniform01) if *t <= 1.0 => exact(0.5 * t),
        (Member::Lipschitz(t), Marginal::Gaussian { mean, sd }) => {
            if *t == 0.0 {
                return exact(0.0);
            }
            // Y = tX ~ N(m, s^2); E clip(Y, 0, 1) = E[Y; 0 < Y < 1] + P(Y >= 1)
            let (m, s) = (t * mean, t * sd);
            let (a, b) = (-m / s, (1.0 - m) / s);
            let inner = m * (std_normal_cdf(b) - std_normal_cdf(a))
                + s * (std_normal_pdf(a) - std_normal_pdf(b));
            exact(inner + 1.0 - std_normal_cdf(b))
        }
        _ => expect(|x| member.eval(x), marginal, &member.breakpoints()),
    }
}

/// `E |f(X) - E f(X)|^k`.
pub fn central_moment(member: &Member, marginal: &Marginal, k: f64) -> Quadrature {
    let mean = member_mean(member, marginal).value;
    match member {
        Member::Zero => Quadrature {
            value: 0.0,
            error: 0.0,
        },
        Member::Halfline(t) => {
            let p = cdf(marginal, *t);
            Quadrature {
                value: p * (1.0 - p).powf(k) + (1.0 - p) * p.powf(k),
                error: 0.0,
            }
        }
        _ => expect(|x| (member.eval(x) - mean).abs().powf(k), marginal, &member.breakpoints()),
    }
}

/// A seminorm value with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoValue {
    pub value: f64,
    /// Set when a numerical fallback could not certify `CONFIDENCE_TOL`.
    pub low_confidence: bool,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid("p", format!("{p} must be a finite real >= 1")));
    }
    Ok(())
}

fn sup_over<F: Fn(&Marginal) -> Quadrature>(marginals: &[Marginal], p: f64, moment: F) -> Result<RhoValue> {
    if marginals.is_empty() {
        return Err(invalid("marginals", "need at least one marginal law"));
    }
    let mut seen: HashMap<(u8, u64, u64), ()> = HashMap::new();
    let mut value: f64 = 0.0;
    let mut low_confidence = false;
    for m in marginals {
        if seen.insert(m.key(), ()).is_some() {
            continue;
        }
        let q = moment(m);
        low_confidence |= q.error > CONFIDENCE_TOL;
        value = value.max(q.value.max(0.0).powf(1.0 / p));
    }
    Ok(RhoValue {
        value,
        low_confidence,
    })
}

/// `rho_p(f) = sup_i ||f(X_i)||_{L_p}` over the supplied marginal laws.
pub fn rho_p(member: &Member, marginals: &[Marginal], p: f64) -> Result<RhoValue> {
    check_p(p)?;
    sup_over(marginals, p, |m| {
        let exact = |value| Quadrature { value, error: 0.0 };
        match (member, m) {
            (Member::Zero, _) => exact(0.0),
            (Member::Halfline(t), m) => exact(cdf(m, *t)),
            (Member::Lipschitz(t), Marginal::Uniform01) if *t <= 1.0 => {
                exact(t.powf(p) / (p + 1.0))
            }
            _ => expect(|x| member.eval(x).abs().powf(p), m, &member.breakpoints()),
        }
    })
}

/// `rho_p(f - g)`.
pub fn rho_p_diff(f: &Member, g: &Member, marginals: &[Marginal], p: f64) -> Result<RhoValue> {
    check_p(p)?;
    sup_over(marginals, p, |m| {
        let exact = |value| Quadrature { value, error: 0.0 };
        match (f, g, m) {
            (Member::Halfline(a), Member::Halfline(b), m) => {
                exact((cdf(m, a.max(*b)) - cdf(m, a.min(*b))).abs())
            }
            (Member::Lipschitz(a), Member::Lipschitz(b), Marginal::Uniform01)
                if *a <= 1.0 && *b <= 1.0 =>
            {
                exact((a - b).abs().powf(p) / (p + 1.0))
            }
            _ => {
                let mut breaks = f.breakpoints();
                breaks.extend(g.breakpoints());
                expect(|x| (f.eval(x) - g.eval(x)).abs().powf(p), m, &breaks)
            }
        }
    })
}

/// Semimetric on a net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SemimetricSpec {
    /// `rho_p(f - g)` over the model's marginals.
    RhoP { p: f64 },
    /// Explicit symmetric matrix indexed by net position.
    Tabulated { matrix: Vec<Vec<f64>> },
}

/// Pairwise distances of a net.
#[derive(Clone, Debug, PartialEq)]
pub struct DistMatrix {
    k: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(k: usize, mut f: F) -> Self {
        let mut d = vec![0.0; k * k];
        for i in 0..k {
            for j in i + 1..k {
                let v = f(i, j);
                d[i * k + j] = v;
                d[j * k + i] = v;
            }
        }
        Self { k, d }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.k + j]
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Exhaustive check of the semimetric axioms.
    pub fn check_axioms(&self, tol: f64) -> std::result::Result<(), String> {
        let k = self.k;
        for i in 0..k {
            if self.get(i, i).abs() > tol {
                return Err(format!("d({i},{i}) = {}", self.get(i, i)));
            }
            for j in 0..k {
                if self.get(i, j) != self.get(j, i) {
                    return Err(format!("asymmetric at ({i},{j})"));
                }
                if self.get(i, j) < 0.0 {
                    return Err(format!("negative at ({i},{j})"));
                }
                for l in 0..k {
                    if self.get(i, l) > self.get(i, j) + self.get(j, l) + tol {
                        return Err(format!("triangle inequality fails at ({i},{j},{l})"));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn distance_matrix(
    net: &[Member],
    spec: &SemimetricSpec,
    marginals: &[Marginal],
) -> Result<DistMatrix> {
    match spec {
        SemimetricSpec::RhoP { p } => {
            check_p(*p)?;
            let mut err = None;
            let m = DistMatrix::from_fn(net.len(), |i, j| {
                match rho_p_diff(&net[i], &net[j], marginals, *p) {
                    Ok(v) => v.value,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(m),
            }
        }
        SemimetricSpec::Tabulated { matrix } => {
            if matrix.len() != net.len() || matrix.iter().any(|r| r.len() != net.len()) {
                return Err(invalid("matrix", "must be square with one row per net member"));
            }
            for (i, row) in matrix.iter().enumerate() {
                if row[i] != 0.0 {
                    return Err(invalid("matrix", "diagonal must be zero"));
                }
                for (j, v) in row.iter().enumerate() {
                    if *v != matrix[j][i] || !(*v >= 0.0) {
                        return Err(invalid("matrix", "must be symmetric and nonnegative"));
                    }
                }
            }
            Ok(DistMatrix::from_fn(net.len(), |i, j| matrix[i][j]))
        }
    }
}

fn all_uniform(marginals: &[Marginal]) -> bool {
    marginals.iter().all(|m| matches!(m, Marginal::Uniform01))
}

/// Finite `delta`-net of a class under `rho_p` over the given marginals.
///
/// One-parameter classes get a parameter grid on `[0, 1]` whose consecutive
/// members are within `delta` of each other; the grid is equispaced when the
/// seminorm has a closed form, otherwise it is built by bisection. Finite
/// classes are returned whole.
pub fn delta_net(
    class: &FunctionClass,
    p: f64,
    marginals: &[Marginal],
    delta: f64,
) -> Result<Vec<Member>> {
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    check_p(p)?;
    let mut net = match &class.kind {
        ClassKind::FiniteExplicit { functions } => functions
            .iter()
            .enumerate()
            .map(|(index, f)| Member::Tabulated {
                index,
                f: Arc::new(f.clone()),
            })
            .collect(),
        ClassKind::HalflineIndicators | ClassKind::LipschitzBall => {
            let at = |t: f64| class.member(t).expect("parameter in range");
            let dist = |a: f64, b: f64| -> Result<f64> {
                Ok(rho_p_diff(&at(a), &at(b), marginals, p)?.value)
            };
            let diameter = dist(0.0, 1.0)?;
            if delta >= diameter {
                vec![at(0.0)]
            } else {
                let spacing = if all_uniform(marginals) {
                    match class.kind {
                        ClassKind::HalflineIndicators => Some(delta.powf(p)),
                        _ => Some(delta * (p + 1.0).powf(1.0 / p)),
                    }
                } else {
                    None
                };
                let params = match spacing {
                    Some(s) => {
                        let k = (1.0 / s - 1e-9).ceil().max(1.0) as usize;
                        (0..=k).map(|j| j as f64 / k as f64).collect()
                    }
                    None => bisection_grid(&dist, delta)?,
                };
                let net: Vec<Member> = params.iter().map(|&t| at(t)).collect();
                verify_cover(&net, &dist, delta)?;
                net
            }
        }
    };
    if class.include_zero {
        net.push(Member::Zero);
    }
    Ok(net)
}

fn bisection_grid<D: Fn(f64, f64) -> Result<f64>>(dist: &D, delta: f64) -> Result<Vec<f64>> {
    let mut params = vec![0.0];
    let mut cur = 0.0;
    while cur < 1.0 {
        if dist(cur, 1.0)? <= delta {
            params.push(1.0);
            break;
        }
        let (mut lo, mut hi) = (cur, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dist(cur, mid)? <= delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo <= cur {
            return Err(Error::Degenerate(format!(
                "cannot advance past parameter {cur} at radius {delta}"
            )));
        }
        params.push(lo);
        cur = lo;
    }
    Ok(params)
}

/// Every parameter between consecutive net points is within `delta` of one
/// of them (checked at sampled interior points).
fn verify_cover<D: Fn(f64, f64) -> Result<f64>>(
    net: &[Member],
    dist: &D,
    delta: f64,
) -> Result<()> {
    for w in net.windows(2) {
        let (a, b) = (w[0].parameter(), w[1].parameter());
        for frac in [0.25, 0.5, 0.75] {
            let t = a + frac * (b - a);
            let near = dist(a, t)?.min(dist(t, b)?);
            if near > delta * (1.0 + 1e-9) {
                return Err(Error::Degenerate(format!(
                    "net fails to cover parameter {t}: distance {near} > {delta}"
                )));
            }
        }
    }
    Ok(())
}

/// Ordered net pairs `(i, j)` with `d(i, j) <= delta`, diagonal included.
pub fn diff_pairs(dist: &DistMatrix, delta: f64) -> Vec<(usize, usize)> {
    let slack = 1e-12 * delta.abs().max(1.0);
    let k = dist.len();
    (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .filter(|&(i, j)| i == j || dist.get(i, j) <= delta + slack)
        .collect()
}

/// `E f(X_{i,n})` for every net member and index.
#[derive(Clone, Debug)]
pub struct CenteringTable {
    means: Vec<Vec<f64>>,
    pub low_confidence: bool,
}

impl CenteringTable {
    pub fn new(net: &[Member], marginals: &[Marginal]) -> Self {
        let mut cache: HashMap<(usize, (u8, u64, u64)), f64> = HashMap::new();
        let mut low_confidence = false;
        let means = net
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                marginals
                    .iter()
                    .map(|m| {
                        *cache.entry((fi, m.key())).or_insert_with(|| {
                            let q = member_mean(f, m);
                            low_confidence |= q.error > CONFIDENCE_TOL;
                            q.value
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            means,
            low_confidence,
        }
    }

    pub fn means(&self, member: usize) -> &[f64] {
        &self.means[member]
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::InnovationStream;

    const U: [Marginal; 1] = [Marginal::Uniform01];

    #[test]
    fn rho_examples() {
        let v = rho_p(&Member::Halfline(0.25), &U, 2.0).unwrap();
        assert!((v.value - 0.5).abs() < 1e-15);
        for p in [1.0, 2.0, 3.5, 8.0] {
            assert_eq!(rho_p(&Member::Zero, &U, p).unwrap().value, 0.0);
            assert!((rho_p(&Member::Halfline(1.0), &U, p).unwrap().value - 1.0).abs() < 1e-15);
        }
        assert!(rho_p(&Member::Halfline(0.5), &U, 0.5).is_err());
    }

    #[test]
    fn analytic_and_quadrature_agree() {
        let g = [Marginal::Gaussian { mean: 0.3, sd: 0.7 }];
        for t in [0.0, 0.2, 0.9, 1.0] {
            let m = Member::Lipschitz(t);
            let closed = member_mean(&m, &g[0]).value;
            let numeric = expect(|x| m.eval(x), &g[0], &m.breakpoints()).value;
            assert!((closed - numeric).abs() < 1e-10, "{t}: {closed} vs {numeric}");
            let closed = rho_p(&m, &U, 3.0).unwrap().value;
            let numeric = expect(|x| m.eval(x).powf(3.0), &U[0], &[]).value.powf(1.0 / 3.0);
            assert!((closed - numeric).abs() < 1e-12);
        }
        let tab = Member::Tabulated {
            index: 0,
            f: Arc::new(TabulatedFn::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()),
        };
        let lip = Member::Lipschitz(1.0);
        assert!(rho_p_diff(&tab, &lip, &U, 2.0).unwrap().value < 1e-12);
        assert!((member_mean(&tab, &U[0]).value - 0.5).abs() < 1e-13);
    }

    #[test]
    fn central_moments() {
        let h = Member::Halfline(0.3);
        let closed = central_moment(&h, &U[0], 3.0).value;
        let numeric = expect(|x| (h.eval(x) - 0.3).abs().powi(3), &U[0], &[0.3]).value;
        assert!((closed - numeric).abs() < 1e-12);
        let l = Member::Lipschitz(0.8);
        let v = central_moment(&l, &U[0], 2.0).value;
        // Var(0.8 U) = 0.64 / 12
        assert!((v - 0.64 / 12.0).abs() < 1e-12);
        assert_eq!(central_moment(&Member::Zero, &U[0], 4.0).value, 0.0);
    }

    #[test]
    fn halfline_net_spacing() {
        let net = delta_net(&FunctionClass::halfline(), 2.0, &U, 0.1).unwrap();
        assert_eq!(net.len(), 101);
        let dist = distance_matrix(&net, &SemimetricSpec::RhoP { p: 2.0 }, &U).unwrap();
        for i in 0..net.len() - 1 {
            assert!(dist.get(i, i + 1) <= 0.1 + 1e-12);
        }
        let one = delta_net(&FunctionClass::halfline(), 2.0, &U, 1.0).unwrap();
        assert_eq!(one.len(), 1);
        let tabs = vec![TabulatedFn::constant(1.0), TabulatedFn::constant(-2.0)];
        for delta in [1e-3, 0.5, 10.0] {
            let net = delta_net(&FunctionClass::finite(tabs.clone()), 2.0, &U, delta).unwrap();
            assert_eq!(net.len(), 2);
        }
        assert!(delta_net(&FunctionClass::halfline(), 2.0, &U, 0.0).is_err());
    }

    #[test]
    fn bisection_net_under_gaussian_marginals() {
        let g = [
            Marginal::Gaussian { mean: 0.0, sd: 1.0 },
            Marginal::Gaussian { mean: 0.5, sd: 0.5 },
        ];
        let net = delta_net(&FunctionClass::halfline(), 2.0, &g, 0.2).unwrap();
        let dist = distance_matrix(&net, &SemimetricSpec::RhoP { p: 2.0 }, &g).unwrap();
        for i in 0..net.len() - 1 {
            assert!(dist.get(i, i + 1) <= 0.2 + 1e-9);
        }
        assert_eq!(net.last().unwrap().parameter(), 1.0);
    }

    #[test]
    fn diff_pairs_examples() {
        let class = FunctionClass::halfline();
        let net: Vec<Member> = (0..=10).map(|k| class.member(k as f64 / 10.0).unwrap()).collect();
        let dist = distance_matrix(&net, &SemimetricSpec::RhoP { p: 2.0 }, &U).unwrap();
        let diag = diff_pairs(&dist, 0.0);
        assert_eq!(diag, (0..11).map(|i| (i, i)).collect::<Vec<_>>());
        assert_eq!(diff_pairs(&dist, dist.diameter()).len(), 121);
        let pairs = diff_pairs(&dist, 0.32);
        // |x - x'| <= 0.1 on the grid: the diagonal plus both neighbours
        assert_eq!(pairs.len(), 11 + 2 * 10);
        for (i, j) in pairs {
            assert!((i as i64 - j as i64).abs() <= 1);
        }
    }

    #[test]
    fn seminorm_axioms_on_nets() {
        let g = [Marginal::Gaussian { mean: 0.2, sd: 0.8 }];
        for (class, marg) in [
            (FunctionClass::halfline().with_zero(), &U[..]),
            (FunctionClass::lipschitz_ball(), &U[..]),
            (FunctionClass::lipschitz_ball(), &g[..]),
        ] {
            let net = delta_net(&class, 2.0, marg, 0.15).unwrap();
            let dist = distance_matrix(&net, &SemimetricSpec::RhoP { p: 2.0 }, marg).unwrap();
            dist.check_axioms(1e-12).unwrap();
        }
    }

    #[test]
    fn envelope_dominates() {
        let tabs = vec![
            TabulatedFn::new(vec![0.0, 0.5, 1.0], vec![0.0, -3.0, 2.0]).unwrap(),
            TabulatedFn::constant(1.5),
        ];
        let classes = [
            FunctionClass::halfline().with_zero(),
            FunctionClass::lipschitz_ball(),
            FunctionClass::finite(tabs),
        ];
        let mut s = InnovationStream::new(17);
        for class in &classes {
            let net = delta_net(class, 2.0, &U, 0.1).unwrap();
            for _ in 0..10_000 {
                let x = 3.0 * s.normal();
                let env = class.envelope(x);
                assert!(env <= class.envelope_bound());
                for f in &net {
                    assert!(f.eval(x).abs() <= env && f.eval(x).is_finite());
                }
            }
        }
    }

    #[test]
    fn tabulated_semimetric_is_validated() {
        let net = vec![Member::Halfline(0.1), Member::Halfline(0.2)];
        let ok = SemimetricSpec::Tabulated {
            matrix: vec![vec![0.0, 0.3], vec![0.3, 0.0]],
        };
        assert_eq!(distance_matrix(&net, &ok, &U).unwrap().get(0, 1), 0.3);
        let bad = SemimetricSpec::Tabulated {
            matrix: vec![vec![0.0, 0.3], vec![0.2, 0.0]],
        };
        assert!(distance_matrix(&net, &bad, &U).is_err());
    }
}
