//! One-dimensional quadrature rules: adaptive Gauss–Kronrod, composite
//! Gauss–Legendre, trapezoid and Gregory-corrected uniform rules.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values a quadrature rule can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

// Kronrod 15-point nodes on [0, 1] (symmetric), with the embedded 7-point
// Gauss weights at the odd positions.
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
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).magnitude())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to the
/// given absolute tolerance. `breaks` are interior points the integrand may
/// be non-smooth at; they seed the initial partition.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    if !(a < b) {
        return Err(Error::argument(format!("integration interval [{a}, {b}] is empty")));
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    struct Seg<T> {
        a: f64,
        b: f64,
        value: T,
        err: f64,
    }
    let mut segs: Vec<Seg<T>> = cuts
        .windows(2)
        .map(|w| {
            let (value, err) = gk15(&mut f, w[0], w[1]);
            Seg { a: w[0], b: w[1], value, err }
        })
        .collect();

    const MAX_SEGMENTS: usize = 20_000;
    loop {
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        if total_err <= abs_tol {
            break;
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::numeric(format!(
                "adaptive quadrature on [{a}, {b}] did not reach tolerance {abs_tol:e} (estimate {total_err:e})"
            )));
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty partition");
        let seg = segs.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval collapsed to adjacent floats; accept what we have.
            segs.push(Seg { err: 0.0, ..seg });
            continue;
        }
        let (lv, le) = gk15(&mut f, seg.a, mid);
        let (rv, re) = gk15(&mut f, mid, seg.b);
        segs.push(Seg { a: seg.a, b: mid, value: lv, err: le });
        segs.push(Seg { a: mid, b: seg.b, value: rv, err: re });
    }
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(segs.iter().fold(T::zero(), |acc, s| acc + s.value))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule: `panels` equal panels of `order` nodes.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * width * (xi + 1.0));
                weights.push(0.5 * width * wi);
            }
        }
        CompositeRule { nodes, weights }
    }

    pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

/// Trapezoid weights for `points` equally spaced nodes with spacing `h`.
pub fn trapezoid_weights(points: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; points];
    if let Some(first) = w.first_mut() {
        *first = 0.5 * h;
    }
    if let Some(last) = w.last_mut() {
        *last = 0.5 * h;
    }
    if points == 1 {
        w[0] = 0.0;
    }
    w
}

/// Fourth-order Gregory end-corrected weights on a uniform grid
/// (h·[3/8, 7/6, 23/24, 1, …, 1, 23/24, 7/6, 3/8]). Needs at least 6 points.
pub fn gregory_weights(points: usize, h: f64) -> Vec<f64> {
    assert!(points >= 6, "Gregory rule needs at least 6 nodes");
    let mut w = vec![h; points];
    let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for (k, e) in ends.iter().enumerate() {
        w[k] = e * h;
        w[points - 1 - k] = e * h;
    }
    w
}
