//! Truncated Taylor series ("jets") in one variable.
//!
//! A jet of order `n` holds `c_0..=c_n` with `f(x_0 + h) = Σ c_k h^k + O(h^{n+1})`.
//! Elementary functions use the usual power-series recurrences, so
//! composing them yields exact higher derivatives without symbolic work.

use std::ops::{Add, Mul, Neg, Sub};

pub const JET_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; JET_CAP],
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order < JET_CAP, "jet order {order} exceeds capacity");
        let mut c = [0.0; JET_CAP];
        c[0] = value;
        Jet { order, c }
    }

    /// The identity function expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient `f^{(k)}(x0) / k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c[..=self.order] {
            *v *= s;
        }
        self
    }

    pub fn add_const(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    /// Same jet with the constant term removed.
    pub fn increment(mut self) -> Self {
        self.c[0] = 0.0;
        self
    }

    pub fn exp(&self) -> Self {
        let mut b = Self::constant(self.c[0].exp(), self.order);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * b.c[k - j];
            }
            b.c[k] = acc / k as f64;
        }
        b
    }

    /// `exp(a) - 1`, keeping the constant term accurate for small `a_0`.
    pub fn exp_m1(&self) -> Self {
        let mut b = self.exp();
        b.c[0] = self.c[0].exp_m1();
        b
    }

    pub fn ln(&self) -> Self {
        let a0 = self.c[0];
        let mut b = Self::constant(a0.ln(), self.order);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * b.c[j] * self.c[k - j];
            }
            b.c[k] = (self.c[k] - acc / k as f64) / a0;
        }
        b
    }

    pub fn powf(&self, r: f64) -> Self {
        let a0 = self.c[0];
        let mut b = Self::constant(a0.powf(r), self.order);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (r * j as f64 - (k - j) as f64) * self.c[j] * b.c[k - j];
            }
            b.c[k] = acc / (k as f64 * a0);
        }
        b
    }

    pub fn powi(&self, k: usize) -> Self {
        let mut out = Self::constant(1.0, self.order);
        for _ in 0..k {
            out = out * *self;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.order, rhs.order);
        for k in 0..=self.order {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
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
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.order, rhs.order);
        let mut out = Jet::constant(0.0, self.order);
        for k in 0..=self.order {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = acc;
        }
        out
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Partial Bell polynomials `B_{n,k}` of the derivatives of `g` at the
/// jet's expansion point, for `k = 0..=n` where `n = g.order()`.
pub fn bell_row(g: &Jet) -> Vec<f64> {
    let n = g.order();
    let delta = g.increment();
    let nf = factorial(n);
    let mut out = vec![0.0; n + 1];
    let mut pow = Jet::constant(1.0, n);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = nf / factorial(k) * pow.coeff(n);
        pow = pow * delta;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn exp_of_variable_gives_exp_derivatives() {
        let j = Jet::variable(0.3, 6).exp();
        for k in 0..=6 {
            assert!(close(j.derivative(k), 0.3f64.exp(), 1e-14));
        }
    }

    #[test]
    fn ln_and_powf_match_closed_forms() {
        let x = 1.7;
        let l = Jet::variable(x, 5).ln();
        // d^k/dx^k ln x = (-1)^{k-1} (k-1)! / x^k
        for k in 1..=5 {
            let want = (-1f64).powi(k as i32 - 1) * factorial(k - 1) / x.powi(k as i32);
            assert!(close(l.derivative(k), want, 1e-13), "k={k}");
        }
        let r = -0.37;
        let p = Jet::variable(x, 5).powf(r);
        let mut falling = 1.0;
        for k in 0..=5 {
            let want = falling * x.powf(r - k as f64);
            assert!(close(p.derivative(k), want, 1e-13), "k={k}");
            falling *= r - k as f64;
        }
    }

    #[test]
    fn composition_matches_chain_rule() {
        // f(x) = (1 + x^2)^{-1/2}
        let x = 0.8;
        let j = (Jet::variable(x, 3) * Jet::variable(x, 3)).add_const(1.0).powf(-0.5);
        let want1 = -x * (1.0 + x * x).powf(-1.5);
        let want2 = (2.0 * x * x - 1.0) * (1.0 + x * x).powf(-2.5);
        assert!(close(j.derivative(1), want1, 1e-14));
        assert!(close(j.derivative(2), want2, 1e-14));
    }

    #[test]
    fn exp_m1_keeps_small_constant_accurate() {
        let j = Jet::variable(1e-12, 2).exp_m1();
        assert!(close(j.value(), 1e-12, 1e-15));
        assert!(close(j.derivative(2), 1.0, 1e-11));
    }

    #[test]
    fn bell_polynomials_of_exp() {
        // all derivatives of e^t at 0 are 1, so B_{n,k}(1, 1, ...) = S(n, k)
        let g = Jet::variable(0.0, 5).exp();
        let row = bell_row(&g);
        let stirling2 = [0.0, 1.0, 15.0, 25.0, 10.0, 1.0];
        for k in 0..=5 {
            assert!(close(row[k], stirling2[k], 1e-12), "k={k}");
        }
    }
}
