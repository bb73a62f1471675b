//! Archimedean generators and their derivatives.
//!
//! | family  | ψ(t)                        | ψ⁻¹(u)                          | θ range |
//! |---------|-----------------------------|---------------------------------|---------|
//! | Clayton | (1 + t)^(-1/θ)              | u^(-θ) - 1                      | θ > 0   |
//! | Gumbel  | exp(-t^(1/θ))               | (-ln u)^θ                       | θ ≥ 1   |
//! | Frank   | -ln(1 - (1 - e^(-θ)) e^(-t))/θ | -ln((e^(-θu) - 1)/(e^(-θ) - 1)) | θ ≠ 0   |
//!
//! Higher derivatives of ψ are closed form:
//!
//! * Clayton: `|ψ^(k)(t)| = Π_{j<k} (1/θ + j) · (1 + t)^(-1/θ - k)`.
//! * Gumbel, with `α = 1/θ`: `(-1)^k ψ^(k)(t) = ψ(t) t^(-k) Σ_j a_kj t^(αj)` where
//!   `a_{k+1,j} = α a_{k,j-1} + (k - αj) a_{k,j}`, `a_00 = 1`. Every coefficient is
//!   nonnegative for `α ≤ 1`, so the sum is evaluated in log space without cancellation.
//! * Frank: `(-1)^k ψ^(k)(t) = Li_{1-k}(w)/θ` with `w = (1 - e^(-θ)) e^(-t)` and
//!   `Li_{-n}(w) = Σ_{j=0}^n j! S(n+1, j+1) (w/(1-w))^(j+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

const TABLE_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Clayton,
    Gumbel,
    Frank,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Frank => "frank",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    family: Family,
    theta: f64,
    /// Gumbel: `a_kj`; Frank: `j! S(n+1, j+1)`; empty for Clayton.
    table: Vec<Vec<f64>>,
}

impl PartialEq for Generator {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.theta == other.theta
    }
}

impl Generator {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && match family {
                Family::Clayton => theta > 0.0,
                Family::Gumbel => theta >= 1.0,
                Family::Frank => theta != 0.0,
            };
        if !ok {
            return Err(Error::InvalidParameter(format!("theta = {theta} is not valid for the {family} family")));
        }
        let table = match family {
            Family::Clayton => Vec::new(),
            Family::Gumbel => gumbel_table(1.0 / theta, TABLE_ORDER),
            Family::Frank => frank_table(TABLE_ORDER),
        };
        Ok(Generator { family, theta, table })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// True when `(-1)^k ψ^(k) ≥ 0` for every k, i.e. valid in any dimension.
    pub fn is_completely_monotone(&self) -> bool {
        !(self.family == Family::Frank && self.theta < 0.0)
    }

    pub fn psi(&self, t: f64) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Clayton => (-t.ln_1p() / th).exp(),
            Family::Gumbel => (-t.powf(1.0 / th)).exp(),
            Family::Frank => {
                let w = -(-th).exp_m1() * (-t).exp();
                if w.abs() < 0.5 {
                    -(-w).ln_1p() / th
                } else {
                    -self.frank_one_minus_w(t).ln() / th
                }
            }
        }
    }

    pub fn psi_inv(&self, u: f64) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Clayton => (-th * u.ln()).exp_m1(),
            Family::Gumbel => (-u.ln()).powf(th),
            Family::Frank => -((-th * u).exp_m1() / (-th).exp_m1()).ln(),
        }
    }

    /// Derivative of ψ⁻¹ (negative on (0, 1)).
    pub fn psi_inv_prime(&self, u: f64) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Clayton => -th * u.powf(-th - 1.0),
            Family::Gumbel => -th * (-u.ln()).powf(th - 1.0) / u,
            Family::Frank => -th / (th * u).exp_m1(),
        }
    }

    pub fn ln_abs_psi_inv_prime(&self, u: f64) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Clayton => th.ln() - (th + 1.0) * u.ln(),
            Family::Gumbel => th.ln() + (th - 1.0) * (-u.ln()).ln() - u.ln(),
            Family::Frank => (th / (th * u).exp_m1()).ln(),
        }
    }

    /// `(ln |ψ^(k)(t)|, sign of ψ^(k)(t))`.
    pub fn ln_abs_psi_deriv(&self, k: usize, t: f64) -> (f64, f64) {
        let cm_sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        match self.family {
            Family::Clayton => {
                let r = 1.0 / self.theta;
                let mut acc = -(r + k as f64) * t.ln_1p();
                for j in 0..k {
                    acc += (r + j as f64).ln();
                }
                (acc, cm_sign)
            }
            Family::Gumbel => {
                let alpha = 1.0 / self.theta;
                if k == 0 {
                    return (-t.powf(alpha), 1.0);
                }
                if t <= 0.0 {
                    return (f64::INFINITY, cm_sign);
                }
                let lt = t.ln();
                let extra;
                let row: &[f64] = if k < self.table.len() {
                    &self.table[k]
                } else {
                    extra = gumbel_table(alpha, k).pop().unwrap_or_default();
                    &extra
                };
                let terms = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a > 0.0)
                    .map(|(j, &a)| a.ln() + alpha * j as f64 * lt);
                (-t.powf(alpha) - k as f64 * lt + log_sum_exp(terms), cm_sign)
            }
            Family::Frank => {
                let v = self.psi_deriv(k, t);
                (v.abs().ln(), if v < 0.0 { -1.0 } else { 1.0 })
            }
        }
    }

    /// Signed k-th derivative of ψ.
    pub fn psi_deriv(&self, k: usize, t: f64) -> f64 {
        if k == 0 {
            return self.psi(t);
        }
        match self.family {
            Family::Frank => {
                let n = k - 1;
                let one_minus_w = self.frank_one_minus_w(t);
                let w = -(-self.theta).exp_m1() * (-t).exp();
                let z = w / one_minus_w;
                let extra;
                let row: &[f64] = if n < self.table.len() {
                    &self.table[n]
                } else {
                    extra = frank_table(n).pop().unwrap_or_default();
                    &extra
                };
                let mut acc = 0.0;
                let mut zp = z;
                for &c in row {
                    acc += c * zp;
                    zp *= z;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * acc / self.theta
            }
            _ => {
                let (l, s) = self.ln_abs_psi_deriv(k, t);
                s * l.exp()
            }
        }
    }

    /// ψ evaluated on a jet.
    pub fn psi_jet(&self, t: &Jet) -> Jet {
        let th = self.theta;
        match self.family {
            Family::Clayton => t.add_const(1.0).powf(-1.0 / th),
            Family::Gumbel => (-t.powf(1.0 / th)).exp(),
            Family::Frank => {
                // 1 - c e^{-t} with c = 1 - e^{-θ}
                let c = -(-th).exp_m1();
                let one_minus_w = (-*t).exp().scale(-c).add_const(1.0);
                one_minus_w.ln().scale(-1.0 / th)
            }
        }
    }

    /// ψ⁻¹ evaluated on a jet.
    pub fn psi_inv_jet(&self, x: &Jet) -> Jet {
        let th = self.theta;
        match self.family {
            Family::Clayton => x.powf(-th).add_const(-1.0),
            Family::Gumbel => (-x.ln()).powf(th),
            Family::Frank => x.scale(-th).exp_m1().scale(1.0 / (-th).exp_m1()).ln().scale(-1.0),
        }
    }

    /// `1 - w` for the Frank generator, computed as `-expm1(-t) + e^{-θ-t}`.
    fn frank_one_minus_w(&self, t: f64) -> f64 {
        let th = self.theta;
        if th > 0.0 {
            -(-t).exp_m1() + (-th - t).exp()
        } else {
            1.0 + (-th).exp_m1() * (-t).exp()
        }
    }
}

pub(crate) fn log_sum_exp<I: Iterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn gumbel_table(alpha: f64, order: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for k in 0..order {
        let prev = &rows[k];
        let mut next = vec![0.0; k + 2];
        for (j, slot) in next.iter_mut().enumerate() {
            let from_lower = if j >= 1 { alpha * prev[j - 1] } else { 0.0 };
            let keep = prev.get(j).map_or(0.0, |&a| (k as f64 - alpha * j as f64) * a);
            *slot = (from_lower + keep).max(0.0);
        }
        rows.push(next);
    }
    rows
}

/// Row n holds `j! S(n+1, j+1)` for `j = 0..=n`.
fn frank_table(order: usize) -> Vec<Vec<f64>> {
    let size = order + 2;
    let mut s2 = vec![vec![0.0f64; size + 1]; size + 1];
    s2[0][0] = 1.0;
    for n in 1..=size {
        for k in 1..=n {
            s2[n][k] = k as f64 * s2[n - 1][k] + s2[n - 1][k - 1];
        }
    }
    (0..=order)
        .map(|n| {
            let mut fact = 1.0;
            (0..=n)
                .map(|j| {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    fact * s2[n + 1][j + 1]
                })
                .collect()
        })
        .collect()
}
