//! Multivariate tail-dependence coefficients.
//!
//! Lower: `λ_l = lim_{u→0} P(all d below u) / P(first d-1 below u)`; for a
//! generator ψ this is `d/(d-1) · lim ψ'(dt)/ψ'((d-1)t)` as `t → ∞`.
//! Upper: the analogous limit at `u → 1`, an alternating binomial sum
//! over the diagonal section of the copula.

use super::generator::Family;
use crate::error::{Error, Result};

pub fn lower(family: Family, theta: f64, d: usize) -> f64 {
    match family {
        Family::Clayton if theta > 0.0 => ((d as f64 - 1.0) / d as f64).powf(1.0 / theta),
        _ => 0.0,
    }
}

pub fn upper(family: Family, theta: f64, d: usize) -> f64 {
    match family {
        Family::Gumbel if theta > 1.0 => {
            // with ψ(t) = exp(-t^α) the diagonal section is u^{n^α}, which
            // turns the limit into a ratio of alternating binomial sums
            let alpha = 1.0 / theta;
            let sum = |n: usize, upto: usize| -> f64 {
                (1..=upto).map(|i| binom(n, i) * sign(i) * (i as f64).powf(alpha)).sum()
            };
            let num = sum(d, d);
            let den = sum(d - 1, d - 1);
            (num / den).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

/// Which tail a family is calibrated on.
pub fn natural(family: Family, theta: f64, d: usize) -> f64 {
    match family {
        Family::Clayton => lower(family, theta, d),
        _ => upper(family, theta, d),
    }
}

/// Parameter giving the requested coefficient (lower tail for Clayton,
/// upper tail for Gumbel), by bisection on `ln θ`.
pub fn inverse(family: Family, target: f64, d: usize) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("tail-dependence target {target} must lie in (0, 1)")));
    }
    if d < 2 {
        return Err(Error::InvalidParameter("tail dependence needs d >= 2".into()));
    }
    let (mut lo, mut hi) = match family {
        Family::Clayton => (1e-8f64.ln(), 1e8f64.ln()),
        // for d ≥ 3 the Gumbel coefficient jumps away from 0 as soon as θ > 1
        Family::Gumbel => (1e-12, 1e8f64.ln()),
        Family::Frank => {
            return Err(Error::Unsupported("the Frank family has no tail dependence".into()));
        }
    };
    let f = |lt: f64| natural(family, lt.exp(), d) - target;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::InvalidParameter(format!("tail-dependence {target} is unattainable for {family} in d = {d}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn sign(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
