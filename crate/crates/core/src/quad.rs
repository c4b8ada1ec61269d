//! Adaptive Gauss-Kronrod quadrature and integrals with a power-law
//! singularity at the origin.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quadrature {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Quadrature {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Globally adaptive GK15 on `[a, b]`: bisect the worst piece until the
/// summed error estimate is below `max(abs_tol, rel_tol * |value|)` or
/// `max_pieces` is reached.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
        };
    }
    let mut heap = BinaryHeap::new();
    let q = gk15(&f, a, b);
    let (mut value, mut error) = (q.value, q.error);
    heap.push(Piece { a, b, q });
    while error > abs_tol.max(rel_tol * value.abs()) && heap.len() < max_pieces {
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.q.value;
        error += left.error + right.error - worst.q.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            q: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            q: right,
        });
    }
    // re-sum to shed accumulated cancellation
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    Quadrature {
        value: pieces.iter().map(|p| p.q.value).sum(),
        error: pieces.iter().map(|p| p.q.error).sum(),
    }
}

/// Number of geometric pieces `[eta 2^-(k+1), eta 2^-k]` before the
/// analytic tail takes over.
pub const GEOMETRIC_LEVELS: i32 = 40;

/// `int_0^upper f(e) de` for an integrand behaving like `c * e^exponent`
/// near zero.
///
/// The range is split geometrically down to `upper * 2^-40`; each piece is
/// integrated adaptively and the remainder `[0, upper * 2^-40]` is taken from
/// the power law fitted at its right end. The returned error adds the piece
/// estimates and the mismatch between power-law fits at `e` and `e/2`.
pub fn power_singular<F: Fn(f64) -> f64>(f: F, exponent: f64, upper: f64) -> Result<Quadrature> {
    if exponent <= -1.0 {
        return Err(Error::Divergent { exponent });
    }
    let mut value = 0.0;
    let mut error = 0.0;
    let mut hi = upper;
    for _ in 0..GEOMETRIC_LEVELS {
        let lo = 0.5 * hi;
        let q = adaptive(&f, lo, hi, 1e-15, 1e-13, 400);
        value += q.value;
        error += q.error;
        hi = lo;
    }
    let e = hi;
    let c1 = f(e) / e.powf(exponent);
    let c2 = f(0.5 * e) / (0.5 * e).powf(exponent);
    let tail = c1 * e.powf(exponent + 1.0) / (exponent + 1.0);
    let mismatch = if c1 != 0.0 { ((c1 - c2) / c1).abs() } else { 0.0 };
    value += tail;
    error += tail.abs() * mismatch;
    Ok(Quadrature { value, error })
}
