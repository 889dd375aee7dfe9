//! Globally adaptive 1-D quadrature with the 7/15-point Gauss–Kronrod pair.
//!
//! The panel with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs, rel·|I|)`. Panels are summed in ascending
//! order of their left endpoint so results are reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}")]
    NotConverged { estimate: f64, error: f64 },
    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    /// Upper bound on the number of panels.
    pub max_panels: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 1e-15, max_panels: 4000 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Panel, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: center });
    }
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for (j, (&x, &w)) in KRONROD_NODES[..7].iter().zip(&KRONROD_WEIGHTS[..7]).enumerate() {
        let (xl, xr) = (center - half * x, center + half * x);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(QuadratureError::NonFinite { at: xl });
        }
        if !fr.is_finite() {
            return Err(QuadratureError::NonFinite { at: xr });
        }
        kronrod += w * (fl + fr);
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * (fl + fr);
        }
    }
    Ok(Panel { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() })
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// interior point first. `points` must be sorted; duplicates are ignored.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tolerance) -> Result<Integral, QuadratureError> {
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod(&mut f, w[0], w[1])?);
        }
    }
    let mut evaluations = 15 * heap.len();
    let mut running = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    loop {
        if running.1 <= tol.target(running.0) {
            let mut panels: Vec<Panel> = heap.into_vec();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            let (value, error) = panels.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            return Ok(Integral { value, error, evaluations });
        }
        let worst = match heap.peek() {
            Some(p) => *p,
            None => return Ok(Integral { value: 0.0, error: 0.0, evaluations }),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if heap.len() >= tol.max_panels || mid <= worst.a || mid >= worst.b {
            return Err(QuadratureError::NotConverged { estimate: running.0, error: running.1 });
        }
        heap.pop();
        let left = gauss_kronrod(&mut f, worst.a, mid)?;
        let right = gauss_kronrod(&mut f, mid, worst.b)?;
        running.0 += left.value + right.value - worst.value;
        running.1 += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
    }
}

/// Convenience wrapper: `points` are the interval ends plus optional interior
/// breakpoints, which are clipped to `(a, b)` and sorted.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    let mut points = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    integrate(f, &points, tol)
}
