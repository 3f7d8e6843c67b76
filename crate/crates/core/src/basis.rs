//! Eigenfunction families on [0, 1], indexed by storage position.

use std::f64::consts::{PI, SQRT_2};

use crate::bessel::bessel_j_pair;

/// `N x^a J_o(j x^kappa)` family, optionally preceded by the constant mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselBasis {
    /// Order `o` of the Bessel function in the eigenfunctions.
    pub order: f64,
    pub kappa: f64,
    /// Power `a` of the prefactor `x^a`.
    pub power: f64,
    pub zeros: Vec<f64>,
    pub normalizers: Vec<f64>,
    /// Storage index 0 is the constant function 1.
    pub constant_ground: bool,
}

impl BesselBasis {
    fn slot(&self, k: usize) -> Option<usize> {
        if self.constant_ground {
            k.checked_sub(1)
        } else {
            Some(k)
        }
    }

    /// `x^a J_o(z)`, `x J_o'...` pieces share one Bessel pair evaluation.
    fn eval(&self, k: usize, x: f64) -> (f64, f64) {
        let Some(i) = self.slot(k) else {
            return (1.0, 0.0);
        };
        let n = self.normalizers[i];
        let j = self.zeros[i];
        if x <= 0.0 {
            return self.limit_at_zero(i);
        }
        let z = j * x.powf(self.kappa);
        let (jo, jo1) = bessel_j_pair(self.order, z);
        let xa = x.powf(self.power);
        let value = n * xa * jo;
        let ao = self.power + self.kappa * self.order;
        let xd = n * xa * (ao * jo - self.kappa * z * jo1);
        (value, xd)
    }

    fn limit_at_zero(&self, i: usize) -> (f64, f64) {
        // x^a J_o(j x^k) ~ x^{a + k o} (j/2)^o / Gamma(o + 1)
        let e = self.power + self.kappa * self.order;
        let lead = self.normalizers[i] * (0.5 * self.zeros[i]).powf(self.order)
            / libm::tgamma(self.order + 1.0);
        if e.abs() < 1e-14 {
            (lead, 0.0)
        } else if e > 0.0 {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// `1, sqrt2 cos(k pi x)`, k >= 1.
    Cosine,
    /// `sqrt2 sin((k + 1) pi x)` at storage index k.
    Sine,
    Bessel(BesselBasis),
}

impl Basis {
    pub fn value(&self, k: usize, x: f64) -> f64 {
        match self {
            Basis::Cosine => {
                if k == 0 {
                    1.0
                } else {
                    SQRT_2 * (k as f64 * PI * x).cos()
                }
            }
            Basis::Sine => SQRT_2 * ((k + 1) as f64 * PI * x).sin(),
            Basis::Bessel(b) => b.eval(k, x).0,
        }
    }

    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        match self {
            Basis::Cosine => {
                let w = k as f64 * PI;
                -SQRT_2 * w * (w * x).sin()
            }
            Basis::Sine => {
                let w = (k + 1) as f64 * PI;
                SQRT_2 * w * (w * x).cos()
            }
            Basis::Bessel(b) => {
                let (_, xd) = b.eval(k, x);
                if x > 0.0 {
                    xd / x
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// `(phi_k(x), x phi_k'(x))`, stable near the origin.
    pub fn value_and_x_derivative(&self, k: usize, x: f64) -> (f64, f64) {
        match self {
            Basis::Bessel(b) => b.eval(k, x),
            _ => (self.value(k, x), x * self.derivative(k, x)),
        }
    }

    /// Synthesises `sum_k c_k phi_k(x)`.
    pub fn synthesize(&self, coeffs: &[f64], x: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| if *c == 0.0 { 0.0 } else { c * self.value(k, x) })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_derivative_matches_difference() {
        let b = Basis::Sine;
        let h = 1e-6;
        for k in 0..5 {
            let x = 0.37;
            let fd = (b.value(k, x + h) - b.value(k, x - h)) / (2.0 * h);
            assert!((fd - b.derivative(k, x)).abs() < 1e-6 * (k + 1) as f64 * 10.0);
        }
    }

    #[test]
    fn cosine_ground_is_constant() {
        assert_eq!(Basis::Cosine.value(0, 0.3), 1.0);
        assert_eq!(Basis::Cosine.derivative(0, 0.3), 0.0);
    }
}
