//! Truncated Taylor series in one variable, order 8.
//!
//! A jet `J` at `x0` stores `c[k] = f^(k)(x0) / k!`. Arithmetic on jets
//! propagates all derivatives up to order [`Jet::ORDER`] exactly (up to
//! rounding), which is how every profile gets consistent derivatives.

use core::ops::{Add, Div, Mul, Neg, Sub};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

const N: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; N],
}

const FACT: [f64; N] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0];

impl Jet {
    pub const ORDER: usize = N - 1;

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable `x0 + t`.
    pub fn variable(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        c[1] = 1.0;
        Jet { c }
    }

    /// Builds a jet from plain derivative values `f^(k)(x0)`.
    pub fn from_derivatives(d: &[f64; N]) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            c[k] = d[k] / FACT[k];
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `k`-th derivative; `k` above [`Jet::ORDER`] panics.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * FACT[k]
    }

    pub fn scale(self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Jet { c }
    }

    pub fn recip(self) -> Self {
        let mut q = [0.0; N];
        q[0] = 1.0 / self.c[0];
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.c[j] * q[k - j];
            }
            q[k] = -s / self.c[0];
        }
        Jet { c: q }
    }

    pub fn exp(self) -> Self {
        let mut g = [0.0; N];
        g[0] = self.c[0].exp();
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * g[k - j];
            }
            g[k] = s / k as f64;
        }
        Jet { c: g }
    }

    /// `self^p` for a positive leading value.
    pub fn powf(self, p: f64) -> Self {
        let f0 = self.c[0];
        let mut g = [0.0; N];
        g[0] = f0.powf(p);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * self.c[j] * g[k - j];
            }
            g[k] = s / (k as f64 * f0);
        }
        Jet { c: g }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn tanh(self) -> Self {
        // Expand around the sign of the argument so exp never overflows.
        let sign = if self.c[0] >= 0.0 { 1.0 } else { -1.0 };
        let e = (self.scale(-2.0 * sign)).exp();
        let one = Jet::constant(1.0);
        ((one - e) / (one + e)).scale(sign)
    }

    /// Evaluates a polynomial with coefficients `coef[0] + coef[1] x + ...`.
    pub fn polynomial(self, coef: &[f64]) -> Self {
        let mut acc = Jet::constant(0.0);
        for &a in coef.iter().rev() {
            acc = acc * self + Jet::constant(a);
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..N {
            c[k] += o.c[k];
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..N {
            c[k] -= o.c[k];
        }
        Jet { c }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn exp_derivatives_are_exp() {
        let j = Jet::variable(0.3).scale(2.0).exp();
        for k in 0..=8 {
            let expect = 2f64.powi(k as i32) * (0.6f64).exp();
            assert!(close(j.derivative(k), expect, 1e-13), "k={k}");
        }
    }

    #[test]
    fn tanh_matches_closed_form_derivatives() {
        for &x in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            let t = Jet::variable(x).tanh();
            let th = x.tanh();
            let sech2 = 1.0 - th * th;
            assert!(close(t.derivative(0), th, 1e-14));
            assert!(close(t.derivative(1), sech2, 1e-14));
            assert!(close(t.derivative(2), -2.0 * th * sech2, 1e-13));
            assert!(close(t.derivative(3), (6.0 * th * th - 2.0) * sech2, 1e-12));
        }
    }

    #[test]
    fn powf_and_recip_agree() {
        let x = Jet::variable(1.7) * Jet::variable(1.7) + Jet::constant(0.5);
        let a = x.powf(-1.0);
        let b = x.recip();
        for k in 0..=8 {
            assert!(close(a.c[k], b.c[k], 1e-12), "k={k}");
        }
    }

    #[test]
    fn polynomial_derivatives() {
        // 1 + 2x + 3x^2 at x = 2: value 17, first 14, second 6.
        let p = Jet::variable(2.0).polynomial(&[1.0, 2.0, 3.0]);
        assert_eq!(p.derivative(0), 17.0);
        assert_eq!(p.derivative(1), 14.0);
        assert_eq!(p.derivative(2), 6.0);
        assert_eq!(p.derivative(3), 0.0);
    }
}
