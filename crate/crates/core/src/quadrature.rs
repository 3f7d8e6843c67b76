//! Quadrature on [0, 1]: fixed Gauss–Legendre composite rules (optionally
//! graded towards the origin) and an adaptive Gauss–Kronrod 7-15 integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A tabulated rule `sum_i w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// Gauss–Legendre of the given order on each panel between `breaks`.
    pub fn on_breaks(breaks: &[f64], order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * breaks.len());
        let mut weights = Vec::with_capacity(order * breaks.len());
        for p in breaks.windows(2) {
            let (a, b) = (p[0], p[1]);
            let h = 0.5 * (b - a);
            let c = 0.5 * (b + a);
            for (xi, wi) in gx.iter().zip(&gw) {
                nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Uniform panels on [0, 1].
    pub fn uniform(panels: usize, order: usize) -> Self {
        Self::on_breaks(&uniform_breaks(panels), order)
    }

    /// Panels graded geometrically towards 0, then uniform on [ratio, 1].
    pub fn graded(levels: usize, ratio: f64, panels: usize, order: usize) -> Self {
        Self::on_breaks(&graded_breaks(levels, ratio, panels), order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

pub fn uniform_breaks(panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| i as f64 / panels as f64).collect()
}

/// `0, r^L, ..., r^2, r` followed by a uniform split of `[r, 1]`.
pub fn graded_breaks(levels: usize, ratio: f64, panels: usize) -> Vec<f64> {
    let mut b = vec![0.0];
    for l in (1..=levels).rev() {
        b.push(ratio.powi(l as i32));
    }
    for i in 1..=panels {
        b.push(ratio + (1.0 - ratio) * i as f64 / panels as f64);
    }
    b
}

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss–Kronrod 7-15 quadrature over the panels
/// delimited by `breaks`, bisecting the worst panel until the summed error
/// estimate falls below `abs_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (value, err) = gk15(&f, w[0], w[1]);
        total_err += err;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    while !(total_err <= abs_tol) {
        if heap.len() >= max_panels {
            return Err(Error::QuadratureFailure {
                achieved: total_err,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval exhausted at machine resolution.
            return Err(Error::QuadratureFailure {
                achieved: total_err,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, m);
        let (v2, e2) = gk15(&f, m, worst.b);
        total_err += e1 + e2 - worst.err;
        heap.push(Piece {
            a: worst.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: worst.b,
            value: v2,
            err: e2,
        });
        // refresh to avoid drift of the running sum
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    // Sum smallest first for accuracy.
    let mut v: Vec<f64> = heap.into_iter().map(|p| p.value).collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    Ok(v.iter().sum())
}
