//! Bracketing covers, bracketing and entropy integrals, and greedy covering
//! numbers for interval-by-function index sets.

use serde::{Deserialize, Serialize};

use crate::arrays::Marginal;
use crate::error::{invalid, Error, Result};
use crate::fclasses::{ClassKind, DistMatrix, FunctionClass, Member};
use crate::quad::{power_singular, Quadrature};

/// Brackets `a_k = 1_{(-inf, x_k]}`, `b_k = 1_{(x_k, x_{k+1}]}` for the
/// half-line indicators under the uniform law on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketingCover {
    pub epsilon: f64,
    /// `0 = x_0 < ... < x_N = 1`.
    pub knots: Vec<f64>,
}

/// `ceil(1 / eps^2)`, robust to `1 / eps^2` landing just above an integer.
fn halfline_count(eps: f64) -> usize {
    let raw = 1.0 / (eps * eps);
    let near = raw.round();
    let k = if (raw - near).abs() <= 1e-9 * near { near } else { raw.ceil() };
    (k as usize).max(1)
}

impl BracketingCover {
    /// Number of brackets `N = |approx| = |bounds|`.
    pub fn len(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn approx(&self, k: usize) -> Member {
        Member::Halfline(self.knots[k])
    }

    /// `b_k(x)`.
    pub fn bound(&self, k: usize, x: f64) -> f64 {
        if x > self.knots[k] && x <= self.knots[k + 1] {
            1.0
        } else {
            0.0
        }
    }

    /// `rho_2(b_k)` under the uniform law.
    pub fn bound_norm(&self, k: usize) -> f64 {
        (self.knots[k + 1] - self.knots[k]).sqrt()
    }

    /// Bracket index paired with `f_x`.
    pub fn bracket_of(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.len() - 1)
    }

    /// `sup_b max_l (E b^{l (2 + lambda) / 2})^{1/2}`; for indicator bounds
    /// every power of `b` equals `b`, so this is `max_k rho_2(b_k)`.
    pub fn higher_moment_size(&self) -> f64 {
        (0..self.len()).map(|k| self.bound_norm(k)).fold(0.0, f64::max)
    }

    /// Checks `rho_2(b) <= eps` and `|f_x - a| <= b` pointwise for members at
    /// every knot and bracket midpoint, on a grid containing the knots, the
    /// midpoints and `extra` equispaced points.
    pub fn verify(&self, extra: usize) -> Result<()> {
        let tol = self.epsilon * 1e-12;
        for k in 0..self.len() {
            if self.bound_norm(k) > self.epsilon + tol {
                return Err(Error::Degenerate(format!(
                    "bound {k} has size {} > {}",
                    self.bound_norm(k),
                    self.epsilon
                )));
            }
        }
        let mut grid: Vec<f64> = self.knots.clone();
        grid.extend(self.knots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        grid.extend((0..=extra).map(|i| i as f64 / extra.max(1) as f64));
        grid.extend([-0.5, 1.5]);
        let mut params = self.knots.clone();
        params.extend(self.knots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for x in params {
            self.check_member(x, &grid)?;
        }
        Ok(())
    }

    pub fn check_member(&self, x: f64, grid: &[f64]) -> Result<()> {
        let k = self.bracket_of(x);
        let (f, a) = (Member::Halfline(x), self.approx(k));
        for &y in grid {
            if (f.eval(y) - a.eval(y)).abs() > self.bound(k, y) {
                return Err(Error::Degenerate(format!(
                    "bracket {k} fails to dominate f_{x} at {y}"
                )));
            }
        }
        Ok(())
    }
}

/// Equispaced bracketing cover of the half-line indicators at size `eps`.
pub fn build_brackets_halfline(eps: f64) -> Result<BracketingCover> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("epsilon", "must be a finite positive real"));
    }
    let n = if eps >= 1.0 { 1 } else { halfline_count(eps) };
    let cover = BracketingCover {
        epsilon: eps,
        knots: (0..=n).map(|k| k as f64 / n as f64).collect(),
    };
    cover.verify(1000)?;
    Ok(cover)
}

/// Constructive upper bound on the bracketing number `N_[](eps, F, rho_2)`.
pub fn bracketing_number(class: &FunctionClass, eps: f64, marginal: &Marginal) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let extra = usize::from(class.include_zero);
    let n = match (&class.kind, marginal) {
        // quantile brackets work for any continuous law
        (ClassKind::HalflineIndicators, _) => {
            if eps >= 1.0 {
                1
            } else {
                halfline_count(eps)
            }
        }
        // b = f_{t'} - f_t has rho_2 = (t' - t) / sqrt(3)
        (ClassKind::LipschitzBall, Marginal::Uniform01) => {
            let raw = 1.0 / (3f64.sqrt() * eps);
            (raw - 1e-9 * raw).ceil().max(1.0) as usize
        }
        (ClassKind::FiniteExplicit { functions }, _) => functions.len(),
        (ClassKind::LipschitzBall, _) => {
            return Err(Error::Unsupported(
                "bracketing of the Lipschitz ball is implemented for uniform marginals only".into(),
            ))
        }
    };
    Ok(n + extra)
}

/// Bracketing or covering number as a function of the radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NFn {
    Constant { value: f64 },
    /// `c * eps^{-a}`.
    Power { c: f64, a: f64 },
    /// `ceil(c * eps^{-a})`, the form of constructive counts.
    CeilPower { c: f64, a: f64 },
}

impl NFn {
    pub fn eval(&self, eps: f64) -> f64 {
        match *self {
            NFn::Constant { value } => value,
            NFn::Power { c, a } => c * eps.powf(-a),
            NFn::CeilPower { c, a } => (c * eps.powf(-a)).ceil(),
        }
    }

    /// Power `a` with `N(eps) ~ eps^{-a}` as `eps -> 0`.
    pub fn leading_power(&self) -> f64 {
        match *self {
            NFn::Constant { .. } => 0.0,
            NFn::Power { a, .. } | NFn::CeilPower { a, .. } => a,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NFn::Constant { value } => value >= 1.0 && value.is_finite(),
            NFn::Power { c, a } | NFn::CeilPower { c, a } => c > 0.0 && a >= 0.0 && c.is_finite() && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("N", format!("{self:?} is not a valid count function")))
        }
    }
}

/// Steps of `ceil(c eps^{-a})` summed exactly before switching to the
/// bracketed power-law tail.
const STEP_SUM_TERMS: usize = 1_000_000;

/// `int_0^upper eps^{-w} N(eps)^{1/r} d eps`.
pub fn singular_integral(n_fn: &NFn, w: f64, r: f64, upper: f64) -> Result<Quadrature> {
    n_fn.validate()?;
    if !(upper > 0.0) || !(r > 0.0) || !(w < 1.0) {
        return Err(invalid("integral", "need upper > 0, r > 0 and w < 1"));
    }
    let exponent = -w - n_fn.leading_power() / r;
    if exponent <= -1.0 {
        return Err(Error::Divergent { exponent });
    }
    let f = |e: f64| e.powf(-w) * n_fn.eval(e).powf(1.0 / r);
    match *n_fn {
        NFn::Constant { value } => Ok(Quadrature {
            value: value.powf(1.0 / r) * upper.powf(1.0 - w) / (1.0 - w),
            error: 0.0,
        }),
        NFn::Power { .. } => power_singular(f, exponent, upper),
        NFn::CeilPower { c, a } if a == 0.0 => singular_integral(&NFn::Constant { value: c.ceil().max(1.0) }, w, r, upper),
        NFn::CeilPower { c, a } => Ok(ceil_power_integral(c, a, w, r, upper, exponent)),
    }
}

fn ceil_power_integral(c: f64, a: f64, w: f64, r: f64, upper: f64, exponent: f64) -> Quadrature {
    let base = |lo: f64, hi: f64| (hi.powf(1.0 - w) - lo.powf(1.0 - w)) / (1.0 - w);
    // N(eps) = k exactly on [(c/k)^{1/a}, (c/(k-1))^{1/a})
    let edge = |k: usize| (c / k as f64).powf(1.0 / a);
    let k0 = (c * upper.powf(-a)).ceil().max(1.0) as usize;
    let mut value = 0.0;
    let mut hi = upper;
    let k_end = k0 + STEP_SUM_TERMS;
    for k in k0..k_end {
        let lo = edge(k).min(hi);
        value += (k as f64).powf(1.0 / r) * base(lo, hi);
        hi = lo;
    }
    // below eps_K: c eps^{-a} <= N <= c eps^{-a} (1 + 1/K)
    let e = hi;
    let tail_low = c.powf(1.0 / r) * e.powf(exponent + 1.0) / (exponent + 1.0);
    let tail_high = tail_low * (1.0 + 1.0 / (k_end - 1) as f64).powf(1.0 / r);
    Quadrature {
        value: value + 0.5 * (tail_low + tail_high),
        error: 0.5 * (tail_high - tail_low) + 1e-14 * value.abs(),
    }
}

/// `int_0^eta eps^{-lambda/(2+lambda)} N^{1/nu}(eps) d eps`.
pub fn bracketing_integral(n_fn: &NFn, lambda: f64, nu: f64, eta: f64) -> Result<Quadrature> {
    if !(lambda > 0.0) || !(nu > 0.0) {
        return Err(invalid("lambda, nu", "must be positive"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", format!("{eta} outside (0, 1]")));
    }
    singular_integral(n_fn, lambda / (2.0 + lambda), nu, eta)
}

/// `int_0^diameter N(eps)^{1/p} d eps`.
pub fn entropy_integral(n_fn: &NFn, p: f64, diameter: f64) -> Result<Quadrature> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("{p} must exceed 1")));
    }
    singular_integral(n_fn, 0.0, p, diameter)
}

/// Closed-form convergence verdict of the bracketing integral when
/// `N(eps) ~ eps^{-a}`.
pub fn bracketing_converges(lambda: f64, nu: f64, a: f64) -> bool {
    lambda / (2.0 + lambda) + a / nu < 1.0
}

/// Verdicts of [`bracketing_converges`] on a grid.
pub fn feasibility_region(lambdas: &[f64], nus: &[f64], a: f64) -> Vec<(f64, f64, bool)> {
    lambdas
        .iter()
        .flat_map(|&l| nus.iter().map(move |&n| (l, n, bracketing_converges(l, n, a))))
        .collect()
}

/// `lambda((u,v] △ (u',v'])`.
pub fn interval_sym_diff(a: (f64, f64), b: (f64, f64)) -> f64 {
    let overlap = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    (a.1 - a.0) + (b.1 - b.0) - 2.0 * overlap
}

/// Intervals `(i/k, j/k]` for `0 <= i < j <= k`.
pub fn interval_grid(k: usize) -> Vec<(f64, f64)> {
    let kf = k as f64;
    (0..k)
        .flat_map(|i| (i + 1..=k).map(move |j| (i as f64 / kf, j as f64 / kf)))
        .collect()
}

/// Greedy cover: scan the points, opening a new center whenever the point
/// is farther than `eps` from all existing ones. Centers end up more than
/// `eps` apart, so the count is at most the covering number at `eps / 2`.
pub fn greedy_cover<D: Fn(usize, usize) -> f64>(len: usize, dist: D, eps: f64) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::new();
    for p in 0..len {
        if !centers.iter().any(|&c| dist(p, c) <= eps) {
            centers.push(p);
        }
    }
    centers
}

/// Greedy cover count of `intervals x net` under
/// `sqrt(lambda(A △ B)) + rho(f, g)`.
pub fn covering_number_tau_s(intervals: &[(f64, f64)], net: &DistMatrix, eps: f64) -> Result<usize> {
    if intervals.is_empty() || net.is_empty() {
        return Err(invalid("grid", "interval grid and net must be nonempty"));
    }
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let k = net.len();
    let dist = |p: usize, q: usize| {
        interval_sym_diff(intervals[p / k], intervals[q / k]).sqrt() + net.get(p % k, q % k)
    };
    Ok(greedy_cover(intervals.len() * k, dist, eps).len())
}
