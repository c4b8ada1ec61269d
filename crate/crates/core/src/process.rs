//! Partial sums, running maxima, the sequential empirical process and its
//! smoothed set-indexed version, evaluated exactly on a single row.

use crate::arrays::TriangularArrayRow;
use crate::error::{invalid, Error, Result};
use crate::fclasses::Member;

/// Largest `i <= n` with `i / n <= t`.
///
/// Plain `floor(n * t)` can land one below `i` when `t = i / n` is not
/// representable, which would shift every jump of `Z_n`.
pub fn grid_floor(n: usize, t: f64) -> usize {
    let nf = n as f64;
    let mut i = ((nf * t).floor().max(0.0) as usize).min(n);
    while i < n && ((i + 1) as f64) / nf <= t {
        i += 1;
    }
    while i > 0 && (i as f64) / nf > t {
        i -= 1;
    }
    i
}

/// Centered evaluations `z_i = f(X_i) - E f(X_i)` of one member on one row.
#[derive(Clone, Debug)]
pub struct CenteredEval {
    z: Vec<f64>,
    prefix: Vec<f64>,
}

impl CenteredEval {
    /// `means[i]` must be `E f(X_{i+1,n})`, as produced by a centering table.
    pub fn new(row: &TriangularArrayRow, f: &Member, means: &[f64]) -> Result<Self> {
        if means.len() != row.n {
            return Err(invalid("means", format!("need {} entries, got {}", row.n, means.len())));
        }
        Self::from_centered(
            row.values
                .iter()
                .zip(means)
                .map(|(x, m)| f.eval(*x) - m)
                .collect(),
        )
    }

    pub fn from_centered(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(invalid("z", "row must be nonempty"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite centered value".into()));
        }
        let mut prefix = Vec::with_capacity(z.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &z {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { z, prefix })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        let n = self.n();
        for index in [i, j] {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        Ok(())
    }

    /// `sum_{k=i}^{j} z_k` (1-based), zero when `j < i`.
    pub fn partial_sum(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(if j < i {
            0.0
        } else {
            self.prefix[j] - self.prefix[i - 1]
        })
    }

    /// `max_{k=i..j} |S(i, k)|`, zero when `j < i`.
    pub fn running_max(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        let mut acc: f64 = 0.0;
        let mut best: f64 = 0.0;
        for v in self.z.get(i - 1..j).unwrap_or(&[]) {
            acc += v;
            best = best.max(acc.abs());
        }
        Ok(best)
    }

    fn scale(&self) -> f64 {
        1.0 / (self.n() as f64).sqrt()
    }

    /// `Z_n(t, f) = n^{-1/2} S(1, floor(n t))`.
    pub fn eval_z(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(self.prefix[grid_floor(self.n(), t)] * self.scale())
    }

    /// `Z_n(1, f)`.
    pub fn g_n(&self) -> f64 {
        self.prefix[self.n()] * self.scale()
    }

    /// Smoothed process on `(u, v]` from the closed interpolation form:
    /// whole cells strictly inside plus two fractional boundary cells.
    pub fn eval_zs_interval(&self, u: f64, v: f64) -> Result<f64> {
        check_interval(u, v)?;
        let n = self.n();
        let (nu, nv) = (n as f64 * u, n as f64 * v);
        let (a, b) = (grid_floor(n, u), grid_floor(n, v));
        let z = |i: usize| if i <= n { self.z[i - 1] } else { 0.0 };
        let sum = if a == b {
            // both endpoints in the same cell: one fragment of length nv - nu
            (nv - nu) * z(a + 1)
        } else {
            let inner = if b >= a + 2 {
                self.prefix[b] - self.prefix[a + 1]
            } else {
                0.0
            };
            let left = ((a + 1) as f64).min(nv) - nu;
            let right = nv - nu.max(b as f64);
            inner + left * z(a + 1) + right * z(b + 1)
        };
        Ok(sum * self.scale())
    }

    /// Smoothed process on `(u, v]` from the cell weights
    /// `|(i-1, i] ∩ (nu, nv]|`, one cell at a time.
    pub fn eval_zs_weights(&self, u: f64, v: f64) -> Result<f64> {
        check_interval(u, v)?;
        let (nu, nv) = (self.n() as f64 * u, self.n() as f64 * v);
        let sum: f64 = cell_weights(self.n(), nu, nv)
            .zip(&self.z)
            .map(|(w, z)| w * z)
            .sum();
        Ok(sum * self.scale())
    }

    /// Smoothed process on a finite union of disjoint intervals.
    pub fn eval_zs_union(&self, intervals: &[(f64, f64)]) -> Result<f64> {
        let mut sorted = intervals.to_vec();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(invalid("intervals", "must be pairwise disjoint"));
        }
        sorted
            .iter()
            .map(|&(u, v)| self.eval_zs_interval(u, v))
            .sum()
    }

    /// `Z_n(i/n, f)` for `i = 0..=n`.
    pub fn z_path(&self) -> Vec<f64> {
        let s = self.scale();
        self.prefix.iter().map(|p| p * s).collect()
    }
}

/// Lengths `|(i-1, i] ∩ (lo, hi]|` for `i = 1..=n`.
pub fn cell_weights(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| {
        let right = (i as f64).min(hi);
        let left = ((i - 1) as f64).max(lo);
        (right - left).max(0.0)
    })
}

fn check_unit(name: &'static str, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(name, format!("{t} outside [0, 1]")));
    }
    Ok(())
}

fn check_interval(u: f64, v: f64) -> Result<()> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    if u > v {
        return Err(invalid("u", format!("left end {u} exceeds right end {v}")));
    }
    Ok(())
}

/// How distance in the time coordinate is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeMetric {
    /// `|s - t|`, for `Z_n(t, f)`.
    Abs,
    /// `sqrt(|s - t|)`, i.e. `sqrt(λ((0,s] △ (0,t]))`, for the smoothed process
    /// indexed by initial intervals.
    SqrtAbs,
}

impl TimeMetric {
    pub fn dist(self, s: f64, t: f64) -> f64 {
        match self {
            TimeMetric::Abs => (s - t).abs(),
            TimeMetric::SqrtAbs => (s - t).abs().sqrt(),
        }
    }

    /// Largest `|s - t|` with `dist <= r`.
    fn window(self, r: f64) -> f64 {
        match self {
            TimeMetric::Abs => r,
            TimeMetric::SqrtAbs => r * r,
        }
    }
}

/// Evaluations `values[f][k]` of a process on net member `f` at `times[k]`.
#[derive(Clone, Debug)]
pub struct Surface {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times", "grid must be strictly increasing"));
        }
        if values.iter().any(|row| row.len() != times.len()) {
            return Err(invalid("values", "one value per grid time is required"));
        }
        Ok(Self { times, values })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulus {
    /// `max |P(s,f) - P(t,g)|` over `tau((s,f),(t,g)) <= delta`.
    pub full: f64,
    /// Same function, `dist(s,t) <= delta`.
    pub split_time: f64,
    /// Same time, `rho(f,g) <= delta`.
    pub split_function: f64,
    /// No admissible pair existed.
    pub empty: bool,
}

const WINDOW_SLACK: f64 = 1e-12;

/// Sliding max and min of `g` over `{l : |t_l - t_k| <= w}` for every `k`.
fn window_extrema(times: &[f64], g: &[f64], w: f64) -> (Vec<f64>, Vec<f64>) {
    use std::collections::VecDeque;
    let len = times.len();
    let (mut maxs, mut mins) = (Vec::with_capacity(len), Vec::with_capacity(len));
    let (mut qmax, mut qmin): (VecDeque<usize>, VecDeque<usize>) = (VecDeque::new(), VecDeque::new());
    let mut hi = 0;
    for k in 0..len {
        while hi < len && times[hi] - times[k] <= w + WINDOW_SLACK {
            while qmax.back().is_some_and(|&b| g[b] <= g[hi]) {
                qmax.pop_back();
            }
            qmax.push_back(hi);
            while qmin.back().is_some_and(|&b| g[b] >= g[hi]) {
                qmin.pop_back();
            }
            qmin.push_back(hi);
            hi += 1;
        }
        let lo_t = times[k] - w - WINDOW_SLACK;
        while qmax.front().is_some_and(|&f| times[f] < lo_t) {
            qmax.pop_front();
        }
        while qmin.front().is_some_and(|&f| times[f] < lo_t) {
            qmin.pop_front();
        }
        maxs.push(g[qmax[0]]);
        mins.push(g[qmin[0]]);
    }
    (maxs, mins)
}

/// Modulus of continuity of a surface under `tau = dist_time + rho`.
///
/// `pairs` lists net pairs `(f, g)` with their `rho` distance; only pairs
/// with `rho <= delta` contribute. The time coordinate is handled with a
/// sliding window, so the cost is linear in the grid size per pair.
pub fn modulus(
    surface: &Surface,
    pairs: &[(usize, usize, f64)],
    metric: TimeMetric,
    delta: f64,
) -> Modulus {
    let mut out = Modulus {
        full: 0.0,
        split_time: 0.0,
        split_function: 0.0,
        empty: true,
    };
    if surface.times.is_empty() || !(delta >= 0.0) {
        return out;
    }
    let times = &surface.times;
    let mut self_done = vec![false; surface.values.len()];
    for &(f, g, rho) in pairs {
        if rho > delta + WINDOW_SLACK {
            continue;
        }
        out.empty = false;
        let (vf, vg) = (&surface.values[f], &surface.values[g]);
        let (maxs, mins) = window_extrema(times, vg, metric.window((delta - rho).max(0.0)));
        for k in 0..times.len() {
            out.full = out.full.max((vf[k] - mins[k]).max(maxs[k] - vf[k]));
            out.split_function = out.split_function.max((vf[k] - vg[k]).abs());
        }
        if !self_done[f] {
            self_done[f] = true;
            let (maxs, mins) = window_extrema(times, vf, metric.window(delta));
            for k in 0..times.len() {
                out.split_time = out.split_time.max((vf[k] - mins[k]).max(maxs[k] - vf[k]));
            }
        }
    }
    out
}

/// Net pairs with their distances, in the form [`modulus`] expects.
pub fn weighted_pairs(dist: &crate::fclasses::DistMatrix) -> Vec<(usize, usize, f64)> {
    let k = dist.len();
    (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, dist.get(i, j)))
        .collect()
}

/// Exhaustive modulus over arbitrary index points: `max |value[a] - value[b]|`
/// over all `a, b` with `dist(a, b) <= delta`. Quadratic; used as a
/// reference and for index sets without time structure.
pub fn modulus_exhaustive<D: Fn(usize, usize) -> f64>(values: &[f64], dist: D, delta: f64) -> (f64, bool) {
    let mut best: f64 = 0.0;
    let mut empty = true;
    for a in 0..values.len() {
        for b in 0..values.len() {
            if dist(a, b) <= delta + WINDOW_SLACK {
                empty = false;
                best = best.max((values[a] - values[b]).abs());
            }
        }
    }
    (best, empty)
}
