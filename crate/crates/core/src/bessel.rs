//! Bessel functions of the first kind of real order, and their zeros.
//!
//! Three regimes:
//! - power series for small arguments,
//! - Miller backward recurrence normalised by
//!   `(x/2)^f = sum_k c_k J_{f+2k}(x)` in the middle range,
//! - Hankel asymptotic expansion for `x` well beyond the order.
//!
//! Orders in `(-1, 0)` are reached by one downward recurrence step from
//! orders `f` and `f + 1` with `f = nu + 1 > 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 2.0;

fn hankel_threshold(nu: f64) -> f64 {
    25.0 + nu * nu
}

/// `J_nu(x)` for `nu > -1` and `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    bessel_j_pair(nu, x).0
}

/// `(J_nu(x), J_{nu+1}(x))` for `nu > -1` and `x >= 0`.
pub fn bessel_j_pair(nu: f64, x: f64) -> (f64, f64) {
    assert!(nu > -1.0, "order must exceed -1, got {nu}");
    assert!(
        x >= 0.0 && x.is_finite(),
        "argument must be finite and >= 0, got {x}"
    );
    if nu < 0.0 {
        let f = nu + 1.0;
        if x == 0.0 {
            // J_nu(0) diverges for negative non-integer order; J_{nu+1}(0) = 0.
            return (f64::INFINITY, 0.0);
        }
        let (jf, jf1) = bessel_j_pair(f, x);
        return ((2.0 * f / x) * jf - jf1, jf);
    }
    if x == 0.0 {
        return (if nu == 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    if x < SERIES_LIMIT {
        (series(nu, x), series(nu + 1.0, x))
    } else if x >= hankel_threshold(nu + 1.0) {
        (hankel(nu, x), hankel(nu + 1.0, x))
    } else {
        miller(nu, x)
    }
}

fn series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = h.powf(nu) / libm::tgamma(nu + 1.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    let z8 = 8.0 * x;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * z8);
        if a.abs() > prev || a == 0.0 {
            break;
        }
        prev = a.abs();
        // a_k / x^k with alternating signs per pair
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let w = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

fn miller(f: f64, x: f64) -> (f64, f64) {
    let top = (x + 30.0 + 3.0 * x.sqrt() + f).ceil() as usize;
    let n_start = top + (top % 2);
    let mut j_next = 0.0; // J_{f+n+1}
    let mut j_cur = 1e-280; // J_{f+n}
    let mut norm = 0.0;
    let out0;
    let mut out1 = 0.0;
    let coeff = |k: usize| -> f64 {
        // c_k = (f + 2k) Gamma(f + k) / k!, c_0 = Gamma(f + 1)
        if k == 0 {
            libm::tgamma(f + 1.0)
        } else {
            let kf = k as f64;
            (f + 2.0 * kf) * (libm::lgamma(f + kf) - libm::lgamma(kf + 1.0)).exp()
        }
    };
    let mut n = n_start;
    loop {
        if n % 2 == 0 {
            norm += coeff(n / 2) * j_cur;
        }
        if n == 1 {
            out1 = j_cur;
        }
        if n == 0 {
            out0 = j_cur;
            break;
        }
        let j_prev = (2.0 * (f + n as f64) / x) * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        n -= 1;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            out1 *= 1e-250;
        }
    }
    let scale = (0.5 * x).powf(f) / norm;
    (out0 * scale, out1 * scale)
}

/// McMahon's large-zero expansion of `j_{nu,k}`.
pub fn mcmahon_zero(nu: f64, k: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let beta = (k as f64 + 0.5 * nu - 0.25) * PI;
    let b8 = 8.0 * beta;
    beta - (mu - 1.0) / b8
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
        - 32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) / (15.0 * b8.powi(5))
}

/// The first `count` positive zeros of `J_nu`, `nu >= 0`.
pub fn bessel_zeros(nu: f64, count: usize) -> Result<Vec<f64>> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!(
            "zeros only for nonnegative order, got {nu}"
        )));
    }
    let mut zeros = Vec::with_capacity(count);
    let step = 0.5;
    let mut a = nu.max(1.0);
    let mut fa = bessel_j(nu, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j(nu, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            zeros.push(bisect(nu, a, b, fa));
        }
        a = b;
        fa = fb;
        if a > 1e6 {
            return Err(Error::Domain(format!(
                "zero search for order {nu} ran away"
            )));
        }
    }
    Ok(zeros)
}

fn bisect(nu: f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = bessel_j(nu, m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Zeros of `J_nu` with the order they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselTable {
    pub order: f64,
    pub zeros: Vec<f64>,
}

impl BesselTable {
    pub fn new(order: f64, count: usize) -> Result<Self> {
        Ok(Self {
            order,
            zeros: bessel_zeros(order, count)?,
        })
    }

    /// Largest `|J_nu|` over the stored zeros.
    pub fn max_residual(&self) -> f64 {
        self.zeros
            .iter()
            .map(|z| bessel_j(self.order, *z).abs())
            .fold(0.0, f64::max)
    }
}
