//! Mixing ("frailty") variables for Marshall–Olkin sampling.
//!
//! * Positive stable with Laplace transform `exp(-t^α)`: Kanter's
//!   representation (Chambers–Mallows–Stuck for the totally skewed case),
//!   `S = sin(αΘ)/sin(Θ)^{1/α} · (sin((1-α)Θ)/E)^{(1-α)/α}`, Θ ~ U(0, π), E ~ Exp(1).
//! * Exponentially tilted stable with Laplace transform
//!   `exp(-v((1 + t)^α - 1))`: split into `m = ⌈v⌉` i.i.d. pieces with
//!   parameter `v/m`, each drawn by rejection from the untilted stable and
//!   accepted with probability `e^{-S}` (acceptance ≥ e^{-1}), as in Hofert (2011).
//! * Log-series with parameter `p`: Kemp's (1981) LK algorithm.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("gamma shape must be positive").sample(rng)
}

pub fn positive_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = Open01.sample(rng);
    let theta = PI * u;
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * theta).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

pub fn tilted_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64, v: f64) -> f64 {
    if alpha >= 1.0 {
        return v;
    }
    if v <= 0.0 {
        return 0.0;
    }
    let m = v.ceil().max(1.0);
    let piece = v / m;
    let scale = piece.powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..m as u64 {
        loop {
            let s = scale * positive_stable(rng, alpha);
            let u: f64 = Open01.sample(rng);
            if u <= (-s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

/// Log-series variate on {1, 2, ...} with `P(k) = -p^k / (k ln(1 - p))`.
/// `ln_one_minus_p` is passed in directly so `p` close to 1 stays accurate.
pub fn log_series<R: Rng + ?Sized>(rng: &mut R, p: f64, ln_one_minus_p: f64) -> f64 {
    let v: f64 = Open01.sample(rng);
    if v >= p {
        return 1.0;
    }
    let u: f64 = Open01.sample(rng);
    let q = -(ln_one_minus_p * u).exp_m1();
    if v <= q * q {
        (1.0 + v.ln() / q.ln()).floor()
    } else if v <= q {
        2.0
    } else {
        1.0
    }
}
