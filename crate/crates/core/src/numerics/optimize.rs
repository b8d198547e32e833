//! Deterministic bounded grid search in two dimensions.

use crate::error::{Error, Result};

/// Closed search interval for one coordinate; `lo == hi` pins it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn fixed(value: f64) -> Self {
        Self { lo: value, hi: value }
    }

    fn lattice(&self, from: f64, to: f64, step: f64) -> Vec<f64> {
        let from = from.max(self.lo);
        let to = to.min(self.hi);
        if to <= from {
            return vec![from];
        }
        let n = ((to - from) / step + 1e-9).floor() as usize;
        let mut points: Vec<f64> = (0..=n).map(|i| from + i as f64 * step).collect();
        if let Some(last) = points.last_mut() {
            if *last > to {
                *last = to;
            }
        }
        if to - points[points.len() - 1] > 1e-12 {
            points.push(to);
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMinimum {
    pub point: (f64, f64),
    pub value: f64,
    pub evaluations: usize,
}

struct Incumbent {
    point: (f64, f64),
    value: f64,
}

fn scan<F>(xs: &[f64], ys: &[f64], f: &mut F, best: &mut Option<Incumbent>, evals: &mut usize)
where
    F: FnMut(f64, f64) -> f64,
{
    for &x in xs {
        for &y in ys {
            let v = f(x, y);
            *evals += 1;
            if !v.is_finite() {
                continue;
            }
            // strict improvement keeps the lowest (x, y) among ties
            let better = match best {
                None => true,
                Some(b) => v < b.value,
            };
            if better {
                *best = Some(Incumbent { point: (x, y), value: v });
            }
        }
    }
}

/// Coarse lattice scan followed by `refine_rounds` rounds of local
/// refinement: each round shrinks the step tenfold and rescans a window of
/// one previous step around the incumbent. Ties go to the lowest first
/// coordinate, then the lowest second coordinate.
pub fn grid_minimize<F>(
    axes: [Axis; 2],
    mut objective: F,
    coarse_step: f64,
    refine_rounds: usize,
) -> Result<GridMinimum>
where
    F: FnMut(f64, f64) -> f64,
{
    if !(coarse_step > 0.0 && coarse_step.is_finite()) {
        return Err(Error::Optimization(format!("invalid step {coarse_step}")));
    }
    let [ax, ay] = axes;
    let mut evals = 0;
    let mut best = None;
    scan(
        &ax.lattice(ax.lo, ax.hi, coarse_step),
        &ay.lattice(ay.lo, ay.hi, coarse_step),
        &mut objective,
        &mut best,
        &mut evals,
    );
    let Some(mut incumbent) = best else {
        return Err(Error::Optimization(
            "objective is not finite anywhere on the search lattice".into(),
        ));
    };

    let mut step = coarse_step;
    for _ in 0..refine_rounds {
        let fine = step / 10.0;
        let (cx, cy) = incumbent.point;
        let xs = ax.lattice(cx - step, cx + step, fine);
        let ys = ay.lattice(cy - step, cy + step, fine);
        let mut round = Some(incumbent);
        scan(&xs, &ys, &mut objective, &mut round, &mut evals);
        incumbent = round.expect("incumbent carried into the round");
        step = fine;
    }
    Ok(GridMinimum {
        point: incumbent.point,
        value: incumbent.value,
        evaluations: evals,
    })
}

/// Minimizes `objective` over `[lo, 1]²`.
pub fn grid_minimize_2d<F>(
    objective: F,
    lo: f64,
    coarse_step: f64,
    refine_rounds: usize,
) -> Result<GridMinimum>
where
    F: FnMut(f64, f64) -> f64,
{
    if !(0.0..1.0).contains(&lo) {
        return Err(Error::Optimization(format!("lower bound {lo} not in [0, 1)")));
    }
    let axis = Axis::new(lo, 1.0);
    grid_minimize([axis, axis], objective, coarse_step, refine_rounds)
}
