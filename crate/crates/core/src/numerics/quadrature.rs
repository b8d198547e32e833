//! Globally adaptive Gauss–Kronrod (7/15) quadrature on (0, 1).
//!
//! Nodes are interior, so integrable endpoint singularities are handled by
//! repeated bisection of the worst interval. Near 1 the nodes can only get
//! within machine epsilon of the endpoint, so a singularity there is best
//! moved to 0 by substituting 1 - x.

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_INTERVALS: usize = 4000;

struct Piece {
    lo: f64,
    hi: f64,
    estimate: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Piece> {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(centre - dx) + f(centre + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    let estimate = k * half;
    if !estimate.is_finite() {
        return Err(Error::Quadrature(format!(
            "integrand not finite on [{lo:e}, {hi:e}]"
        )));
    }
    Ok(Piece {
        lo,
        hi,
        estimate,
        error: ((k - g) * half).abs(),
    })
}

/// ∫₀¹ f with absolute tolerance 1e-10.
pub fn quad_01<F: FnMut(f64) -> f64>(integrand: F) -> Result<f64> {
    quad_01_with(integrand, DEFAULT_ABS_TOL, 0.0, DEFAULT_MAX_INTERVALS)
}

/// ∫₀¹ f, stopping once the error estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn quad_01_with<F: FnMut(f64) -> f64>(
    mut integrand: F,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let first = kronrod(&mut integrand, 0.0, 1.0)?;
    let mut total = first.estimate;
    let mut error = first.error;
    heap.push(first);

    while error > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} after {max_intervals} intervals"
            )));
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Quadrature("interval cannot be bisected further".into()));
        }
        let left = kronrod(&mut integrand, worst.lo, mid)?;
        let right = kronrod(&mut integrand, mid, worst.hi)?;
        total += left.estimate + right.estimate - worst.estimate;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // recompute from the pieces to drop accumulated update round-off
    Ok(heap.iter().map(|p| p.estimate).sum())
}
