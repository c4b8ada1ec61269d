//! Growth functions satisfying the subadditivity-type condition used by the
//! maximal inequality, the constant `A` of that inequality, the `gamma(m, delta)`
//! family and the weighted mixing series `zeta`.

use serde::Serialize;

use crate::arrays::{MixingKind, MixingProfile};
use crate::error::{invalid, Error, Result};

/// Closed-form origin of a tabulated growth function.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthForm {
    Tabulated,
    Linear { c: f64 },
    Gamma { c: f64, kappa: f64, r: f64, j: f64 },
}

impl GrowthForm {
    /// Index `Q` known analytically for the form, if any.
    pub fn analytic_q(&self) -> Option<f64> {
        match *self {
            GrowthForm::Tabulated => None,
            GrowthForm::Linear { .. } => Some(1.0),
            GrowthForm::Gamma { kappa, .. } => Some(2f64.powf(2.0 * kappa)),
        }
    }
}

/// `g(1), ..., g(N)` together with the exponent `alpha` it is paired with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthFunction {
    values: Vec<f64>,
    pub alpha: f64,
    pub form: GrowthForm,
}

impl GrowthFunction {
    pub fn new(values: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("{alpha} must be a finite real > 1")));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("values", "NaN entry"));
        }
        Ok(Self {
            values,
            alpha,
            form: GrowthForm::Tabulated,
        })
    }

    pub fn from_fn<F: Fn(usize) -> f64>(n_max: usize, alpha: f64, g: F) -> Result<Self> {
        Self::new((1..=n_max).map(g).collect(), alpha)
    }

    pub fn linear(c: f64, n_max: usize, alpha: f64) -> Result<Self> {
        let mut g = Self::from_fn(n_max, alpha, |m| c * m as f64)?;
        g.form = GrowthForm::Linear { c };
        Ok(g)
    }

    pub fn domain_max(&self) -> usize {
        self.values.len()
    }

    /// `g(m)` for `1 <= m <= N`; `g(0) = 0`.
    pub fn at(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.values[m - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Negative { m: usize },
    Decreasing { m: usize },
    /// `g(j) = 0` while `g(i) + g(j - i) > 0`: no finite index works.
    ZeroDenominator { i: usize, j: usize },
}

/// Result of checking the condition on `{1, ..., N}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub q_min: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub admissible: bool,
    #[serde(rename = "N")]
    pub n: usize,
    pub violations: Vec<Violation>,
}

/// `2^{(alpha - 1) / alpha}`, the supremum of admissible indices.
pub fn index_threshold(alpha: f64) -> f64 {
    2f64.powf((alpha - 1.0) / alpha)
}

/// Relative margin by which `q` must undercut the threshold; values that
/// equal it up to rounding are treated as on the boundary.
const BOUNDARY_RTOL: f64 = 1e-12;

pub fn is_admissible_index(q: f64, alpha: f64) -> bool {
    let t = index_threshold(alpha);
    q >= 1.0 && q < t * (1.0 - BOUNDARY_RTOL)
}

/// Exhaustive scan of `g(i) + g(j - i) <= Q g(j)` over `1 <= i < j <= N`.
pub fn check_condition_s(g: &GrowthFunction) -> Result<Certificate> {
    let n = g.domain_max();
    if n < 2 {
        return Err(invalid("g", "domain must contain at least 1 and 2"));
    }
    let mut violations = Vec::new();
    for m in 1..=n {
        if g.at(m) < 0.0 {
            violations.push(Violation::Negative { m });
        }
        if m > 1 && g.at(m) < g.at(m - 1) {
            violations.push(Violation::Decreasing { m });
        }
    }
    let mut q: f64 = 1.0;
    for j in 2..=n {
        let gj = g.at(j);
        for i in 1..=j / 2 {
            let num = g.at(i) + g.at(j - i);
            if gj == 0.0 {
                if num > 0.0 {
                    violations.push(Violation::ZeroDenominator { i, j });
                }
                continue;
            }
            q = q.max(num / gj);
        }
    }
    // exactly additive tabulations such as `C m` round to a few ulps above 1
    if q - 1.0 <= 8.0 * f64::EPSILON {
        q = 1.0;
    }
    let threshold = index_threshold(g.alpha);
    Ok(Certificate {
        q_min: q,
        alpha: g.alpha,
        threshold,
        admissible: violations.is_empty() && is_admissible_index(q, g.alpha),
        n,
        violations,
    })
}

/// `A = (1 - Q^{alpha/nu} / 2^{(alpha-1)/nu})^{-nu}`.
pub fn constant_a(alpha: f64, nu: f64, q: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("{alpha} must be a finite real > 1")));
    }
    if !(nu >= 1.0) || !nu.is_finite() {
        return Err(invalid("nu", format!("{nu} must be a finite real >= 1")));
    }
    if !is_admissible_index(q, alpha) {
        return Err(Error::InadmissibleIndex {
            q,
            alpha,
            threshold: index_threshold(alpha),
        });
    }
    let ratio = q.powf(alpha / nu) / 2f64.powf((alpha - 1.0) / nu);
    Ok((1.0 - ratio).powf(-nu))
}

/// Parameters of `gamma(m, delta) = C m (R(delta) + J(delta) m^{-kappa})^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaSpec {
    pub c: f64,
    pub kappa: f64,
    pub nu: f64,
}

impl GammaSpec {
    pub fn new(c: f64, kappa: f64, nu: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid("c", "must be a finite nonnegative real"));
        }
        if !(nu > 2.0) {
            return Err(invalid("nu", format!("{nu} must exceed 2")));
        }
        let upper = 0.5 - 1.0 / nu;
        if !(kappa > 0.0 && kappa < upper) {
            return Err(Error::KappaOutOfRange { kappa, upper });
        }
        Ok(Self { c, kappa, nu })
    }

    /// `gamma(m, delta)` from the values `R(delta)` and `J(delta)`.
    pub fn eval(&self, m: usize, r: f64, j: f64) -> f64 {
        let m = m as f64;
        let inner = r + j * m.powf(-self.kappa);
        self.c * m * inner * inner
    }

    /// `m -> gamma(m, delta)` on `{1, ..., N}`.
    pub fn growth(&self, n_max: usize, r: f64, j: f64, alpha: f64) -> Result<GrowthFunction> {
        if !(r >= 0.0 && j >= 0.0) {
            return Err(invalid("R, J", "must be nonnegative"));
        }
        let mut g = GrowthFunction::from_fn(n_max, alpha, |m| self.eval(m, r, j))?;
        g.form = GrowthForm::Gamma {
            c: self.c,
            kappa: self.kappa,
            r,
            j,
        };
        Ok(g)
    }
}

/// `gamma(m, delta)` with `R` and `J` given as functions of `delta`.
pub fn gamma<R: Fn(f64) -> f64, J: Fn(f64) -> f64>(
    m: usize,
    delta: f64,
    spec: &GammaSpec,
    r: R,
    j: J,
) -> Result<f64> {
    if m == 0 || !(delta > 0.0) {
        return Err(invalid("m, delta", "need m >= 1 and delta > 0"));
    }
    let (rv, jv) = (r(delta), j(delta));
    if !(rv >= 0.0 && jv >= 0.0) {
        return Err(invalid("R, J", "must be nonnegative"));
    }
    Ok(spec.eval(m, rv, jv))
}

/// `h = 2 (g + l)`; the index of a sum is at most the larger of the two.
pub fn combine_h(g: &GrowthFunction, l: &GrowthFunction) -> Result<GrowthFunction> {
    if g.alpha != l.alpha {
        return Err(invalid(
            "alpha",
            format!("growth functions pair with different exponents {} and {}", g.alpha, l.alpha),
        ));
    }
    let n = g.domain_max().min(l.domain_max());
    GrowthFunction::from_fn(n, g.alpha, |m| 2.0 * (g.at(m) + l.at(m)))
}

/// `2^{1-d} (x + y)^d`, the bound on `x^d + y^d` for `d in (0, 1]`.
pub fn holder_bound(x: f64, y: f64, d: f64) -> f64 {
    2f64.powf(1.0 - d) * (x + y).powf(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZetaValue {
    pub value: f64,
    /// Rigorous bound on the omitted tail.
    pub truncation_bound: f64,
    pub terms: usize,
}

const ZETA_MAX_TERMS: usize = 100_000_000;

fn check_even_order(nu: f64) -> Result<()> {
    if !(nu >= 2.0) || nu.fract() != 0.0 || (nu as u64) % 2 != 0 {
        return Err(Error::OddMomentOrder(nu));
    }
    Ok(())
}

/// `sum_{s >= 1} s^{nu-2} alpha(s)^{lambda/(2+lambda)}`.
pub fn zeta(profile: &MixingProfile, lambda: f64, nu: f64, tol: f64) -> Result<ZetaValue> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must be a finite positive real"));
    }
    check_even_order(nu)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let w = lambda / (2.0 + lambda);
    let term = |s: usize| (s as f64).powf(nu - 2.0) * profile.alpha(s).powf(w);
    match profile.kind {
        MixingKind::ExactZeroBeyond { m } => Ok(ZetaValue {
            value: (1..=m).map(term).sum(),
            truncation_bound: 0.0,
            terms: m,
        }),
        MixingKind::Geometric { c, r } => {
            if c == 0.0 || r == 0.0 {
                return Ok(ZetaValue {
                    value: 0.0,
                    truncation_bound: 0.0,
                    terms: 0,
                });
            }
            // majorant s^{nu-2} (c r^s)^w; beyond S consecutive terms shrink
            // by at most ((S+2)/(S+1))^{nu-2} r^w
            let q = r.powf(w);
            let majorant = |s: usize| (s as f64).powf(nu - 2.0) * (c * r.powi(s as i32)).powf(w);
            let mut value = 0.0;
            for s in 1..=ZETA_MAX_TERMS {
                value += term(s);
                let ratio = ((s + 2) as f64 / (s + 1) as f64).powf(nu - 2.0) * q;
                if ratio < 1.0 {
                    let tail = majorant(s + 1) / (1.0 - ratio);
                    if tail < tol {
                        return Ok(ZetaValue {
                            value,
                            truncation_bound: tail,
                            terms: s,
                        });
                    }
                }
            }
            Err(Error::Uncertifiable(format!(
                "tail bound did not fall below {tol} within {ZETA_MAX_TERMS} terms"
            )))
        }
        MixingKind::Tabulated { .. } => Err(Error::Uncertifiable(
            "tabulated mixing profile carries no tail law; convergence cannot be certified".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::InnovationStream;
    use proptest::prelude::*;

    #[test]
    fn certificate_examples() {
        let lin = GrowthFunction::linear(3.5, 100, 2.0).unwrap();
        let c = check_condition_s(&lin).unwrap();
        assert_eq!(c.q_min, 1.0);
        assert!(c.admissible);
        assert_eq!(lin.form.analytic_q(), Some(1.0));

        let sqrt = GrowthFunction::from_fn(100, 2.0, |m| (m as f64).sqrt()).unwrap();
        let c = check_condition_s(&sqrt).unwrap();
        assert!((c.q_min - 2f64.sqrt()).abs() < 1e-12);
        assert!(!c.admissible);

        let sq = GrowthFunction::from_fn(10, 2.0, |m| (m * m) as f64).unwrap();
        assert_eq!(check_condition_s(&sq).unwrap().q_min, 1.0);

        let bad = GrowthFunction::new(vec![0.0, 1.0, 0.0], 2.0).unwrap();
        let c = check_condition_s(&bad).unwrap();
        assert!(c.violations.contains(&Violation::Decreasing { m: 3 }));
        assert!(c.violations.contains(&Violation::ZeroDenominator { i: 1, j: 3 }));
        assert!(!c.admissible);

        assert!(check_condition_s(&GrowthFunction::new(vec![1.0], 2.0).unwrap()).is_err());
        assert!(GrowthFunction::new(vec![1.0, f64::NAN], 2.0).is_err());
        let json = serde_json::to_value(check_condition_s(&lin).unwrap()).unwrap();
        for key in ["q_min", "alpha", "threshold", "admissible", "N", "violations"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn constant_a_values() {
        // exact value of (1 - 2^{-1/4})^{-4}, evaluated at 40 digits
        let a = constant_a(2.0, 4.0, 1.0).unwrap();
        assert!((a - 1560.558813).abs() < 1e-5, "{a}");
        let t = index_threshold(2.0);
        assert!(matches!(constant_a(2.0, 4.0, t), Err(Error::InadmissibleIndex { .. })));
        assert!(constant_a(2.0, 4.0, 0.99).is_err());
        assert!(constant_a(2.0, 4.0, t * (1.0 - 1e-9)).is_ok());
        let mut prev = 0.0;
        for k in 0..200 {
            let q = 1.0 + (t - 1.0) * k as f64 / 200.0;
            let a = constant_a(2.0, 4.0, q).unwrap();
            assert!(a > prev && a.is_finite());
            prev = a;
        }
        assert!(constant_a(2.0, 4.0, t * (1.0 - 1e-10)).unwrap() > 1e20);
    }

    #[test]
    fn constant_a_grows_with_nu() {
        for alpha in [1.5, 2.0, 3.0] {
            let mut prev = 0.0;
            for nu in [1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
                let a = constant_a(alpha, nu, 1.0).unwrap();
                assert!(a >= prev);
                prev = a;
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let spec = GammaSpec::new(2.0, 0.2, 4.0).unwrap();
        let lin = spec.growth(200, 0.7, 0.0, 2.0).unwrap();
        assert_eq!(check_condition_s(&lin).unwrap().q_min, 1.0);
        let pure = spec.growth(200, 0.0, 1.3, 2.0).unwrap();
        let c = check_condition_s(&pure).unwrap();
        assert!(c.q_min <= 2f64.powf(0.4) + 1e-9);
        assert_eq!(pure.form.analytic_q(), Some(2f64.powf(0.4)));
        assert!(matches!(GammaSpec::new(1.0, 0.25, 4.0), Err(Error::KappaOutOfRange { .. })));
        assert!(GammaSpec::new(1.0, 0.0, 4.0).is_err());
        let r = |d: f64| d.sqrt();
        let j = |_: f64| 1.0;
        // gamma(m)/m -> C R(delta)^2, and R(delta) -> 0 with delta
        let mut last_limit = f64::INFINITY;
        for delta in [0.1, 0.01, 0.001] {
            let limit = 2.0 * r(delta).powi(2);
            let mut prev_gap = f64::INFINITY;
            for k in (4..=40).step_by(4) {
                let m = 1usize << k;
                let gap = gamma(m, delta, &spec, r, j).unwrap() / m as f64 - limit;
                assert!(gap >= 0.0 && gap < prev_gap);
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-2);
            assert!(limit < last_limit);
            last_limit = limit;
        }
        assert!(gamma(0, 0.1, &spec, r, j).is_err());
    }

    #[test]
    fn combine_examples() {
        let spec = GammaSpec::new(1.0, 0.2, 4.0).unwrap();
        let g = spec.growth(200, 0.4, 0.9, 2.0).unwrap();
        let zero = GrowthFunction::from_fn(200, 2.0, |_| 0.0).unwrap();
        let h = combine_h(&g, &zero).unwrap();
        assert_eq!(h.at(17), 2.0 * g.at(17));
        assert_eq!(check_condition_s(&h).unwrap().q_min, check_condition_s(&g).unwrap().q_min);
        let l = GrowthFunction::linear(0.3, 200, 2.0).unwrap();
        let two = combine_h(&GrowthFunction::linear(2.0, 200, 2.0).unwrap(), &l).unwrap();
        assert_eq!(check_condition_s(&two).unwrap().q_min, 1.0);
        let mixed = combine_h(&g, &l).unwrap();
        assert!(check_condition_s(&mixed).unwrap().q_min <= 2f64.powf(0.4) + 1e-9);
        let other = GrowthFunction::linear(1.0, 200, 3.0).unwrap();
        assert!(combine_h(&g, &other).is_err());
    }

    #[test]
    fn zeta_examples() {
        for (r, lambda) in [(0.2, 2.0), (0.1, 0.5), (0.25, 2.0 / 3.0)] {
            let p = MixingProfile::geometric(1.0, r).unwrap();
            let z = zeta(&p, lambda, 2.0, 1e-13).unwrap();
            let q = r.powf(lambda / (2.0 + lambda));
            assert!((z.value - q / (1.0 - q)).abs() < 1e-10);
        }
        let z = zeta(&MixingProfile::zero_beyond(3), 2.0, 4.0, 1e-12).unwrap();
        let exact: f64 = (1..=3).map(|s| (s * s) as f64 * 0.25f64.sqrt()).sum();
        assert_eq!(z.value, exact);
        assert_eq!(z.truncation_bound, 0.0);
        assert_eq!(zeta(&MixingProfile::zero_beyond(0), 2.0, 4.0, 1e-12).unwrap().value, 0.0);
        assert_eq!(zeta(&MixingProfile::geometric(1.0, 0.0).unwrap(), 2.0, 4.0, 1e-12).unwrap().value, 0.0);
        let tab = MixingProfile::tabulated(vec![0.2, 0.1]).unwrap();
        assert!(matches!(zeta(&tab, 2.0, 4.0, 1e-9), Err(Error::Uncertifiable(_))));
        assert!(matches!(zeta(&MixingProfile::zero_beyond(1), 2.0, 3.0, 1e-9), Err(Error::OddMomentOrder(_))));
        let slow = zeta(&MixingProfile::geometric(1.0, 0.9).unwrap(), 2.0 / 3.0, 6.0, 1e-8).unwrap();
        assert!(slow.truncation_bound < 1e-8 && slow.value.is_finite());
    }

    #[test]
    fn random_gamma_certificates() {
        let mut s = InnovationStream::new(42);
        for _ in 0..100 {
            let nu = 2.5 + 6.0 * s.uniform();
            let kappa = (0.5 - 1.0 / nu) * (0.01 + 0.98 * s.uniform());
            let spec = GammaSpec::new(5.0 * s.uniform(), kappa, nu).unwrap();
            let g = spec.growth(200, 3.0 * s.uniform(), 3.0 * s.uniform(), 2.0).unwrap();
            let c = check_condition_s(&g).unwrap();
            assert!(c.q_min <= 2f64.powf(2.0 * kappa) + 1e-9);
            assert!(g.values().windows(2).all(|w| w[1] >= w[0]));
        }
    }

    proptest! {
        #[test]
        fn holder_lemma(x in 0.0f64..1e3, y in 0.0f64..1e3, d in 0.0001f64..0.9999) {
            prop_assert!(x.powf(d) + y.powf(d) <= holder_bound(x, y, d) + 1e-12 * (1.0 + holder_bound(x, y, d)));
            prop_assert!((2.0 * x.powf(d) - holder_bound(x, x, d)).abs() <= 1e-12 * (1.0 + x.powf(d)));
        }

        #[test]
        fn closure_under_addition(c1 in 0.0f64..5.0, c2 in 0.0f64..5.0, r in 0.0f64..2.0, j in 0.0f64..2.0, k in 0.01f64..0.99) {
            let kappa = 0.25 * k;
            let g = GammaSpec::new(c1, kappa, 4.0).unwrap().growth(120, r, j, 2.0).unwrap();
            let h = GrowthFunction::linear(c2, 120, 2.0).unwrap();
            let sum = GrowthFunction::from_fn(120, 2.0, |m| g.at(m) + h.at(m)).unwrap();
            let (qg, qh) = (check_condition_s(&g).unwrap().q_min, check_condition_s(&h).unwrap().q_min);
            prop_assert!(check_condition_s(&sum).unwrap().q_min <= qg.max(qh) + 1e-9);
        }

        #[test]
        fn gamma_nondecreasing(m in 1usize..10_000, r in 0.0f64..3.0, j in 0.0f64..3.0, k in 0.01f64..0.99, nu in 2.1f64..12.0) {
            let spec = GammaSpec::new(1.0, (0.5 - 1.0 / nu) * k, nu).unwrap();
            prop_assert!(spec.eval(m + 1, r, j) >= spec.eval(m, r, j));
        }

        #[test]
        fn constant_a_domain(alpha in 1.01f64..6.0, q in 0.5f64..2.5) {
            let inside = q >= 1.0 && q < index_threshold(alpha) * (1.0 - 1e-12);
            prop_assert_eq!(constant_a(alpha, 4.0, q).is_ok(), inside);
        }
    }
}
