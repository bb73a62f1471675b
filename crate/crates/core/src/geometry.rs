//! Constraint regions in loss space and on the unit cube, residual bounds,
//! the constraint curve and its curvature.
//!
//! With `x_i = F_i⁻¹(u_i)` a point is inside a Tail region when `Σ x_i > B`
//! and inside a Band region when `|Σ x_i - B| ≤ ε`. Holding every coordinate
//! but `m` fixed, the admissible values of `u_m` form an interval whose ends
//! are `F_m` evaluated at the loss-space residual `B - Σ_{i≠m} x_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{loss_quantile, Marginal, MarginalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    Tail,
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRegion {
    pub mode: RegionMode,
    pub threshold: f64,
    #[serde(default)]
    pub epsilon: f64,
}

/// Admissible values `[lo, hi]` of one coordinate; `width` is `hi - lo`
/// computed from survival functions so it stays accurate near 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl ConstraintRegion {
    pub fn tail(threshold: f64) -> Self {
        ConstraintRegion { mode: RegionMode::Tail, threshold, epsilon: 0.0 }
    }

    pub fn band(threshold: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("band half-width must be positive (got {epsilon})")));
        }
        Ok(ConstraintRegion { mode: RegionMode::Band, threshold, epsilon })
    }

    /// Membership for an aggregate loss; a tie with the threshold is outside a Tail region.
    #[inline]
    pub fn contains_sum(&self, s: f64) -> bool {
        match self.mode {
            RegionMode::Tail => s > self.threshold,
            RegionMode::Band => (s - self.threshold).abs() <= self.epsilon,
        }
    }

    pub fn contains_u(&self, marginals: &[MarginalModel], u: &[f64]) -> bool {
        self.contains_sum(loss_sum(marginals, u))
    }

    /// Interval of `u_m` values that keep `u` inside the region, ignoring the current `u[m]`.
    pub fn feasible_interval(&self, marginals: &[MarginalModel], u: &[f64], m: usize) -> Interval {
        let others: f64 = u.iter().zip(marginals).enumerate().filter(|(i, _)| *i != m).map(|(_, (&ui, f))| loss_quantile(f, ui)).sum();
        self.interval_from_others(&marginals[m], others)
    }

    pub fn interval_from_others(&self, fm: &MarginalModel, others: f64) -> Interval {
        match self.mode {
            RegionMode::Tail => {
                let r = self.threshold - others;
                Interval { lo: fm.cdf(r), hi: 1.0, width: fm.sf(r) }
            }
            RegionMode::Band => {
                let a = self.threshold - self.epsilon - others;
                let b = self.threshold + self.epsilon - others;
                let (lo, hi) = (fm.cdf(a), fm.cdf(b));
                let width = if lo > 0.5 { fm.sf(a) - fm.sf(b) } else { hi - lo };
                Interval { lo, hi, width: width.max(0.0) }
            }
        }
    }
}

/// `Σ F_i⁻¹(u_i)`, with boundary probabilities clamped.
#[inline]
pub fn loss_sum(marginals: &[MarginalModel], u: &[f64]) -> f64 {
    u.iter().zip(marginals).map(|(&ui, f)| loss_quantile(f, ui)).sum()
}

/// Smallest `u_m` keeping the point inside a Tail region, given the other
/// `d - 1` coordinates in their natural order (coordinate `m` omitted).
pub fn residual_bound(region: &ConstraintRegion, marginals: &[MarginalModel], u_minus_m: &[f64], m: usize) -> Result<f64> {
    if region.mode != RegionMode::Tail {
        return Err(Error::InvalidParameter("residual bound is defined for Tail regions".into()));
    }
    if u_minus_m.len() + 1 != marginals.len() || m >= marginals.len() {
        return Err(Error::DimensionMismatch { expected: marginals.len() - 1, actual: u_minus_m.len() });
    }
    let others: f64 = marginals
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != m)
        .zip(u_minus_m)
        .map(|((_, f), &ui)| loss_quantile(f, ui))
        .sum();
    Ok(region.interval_from_others(&marginals[m], others).lo)
}

/// `r(u_{-d}) = F_d(B - Σ_{i<d} F_i⁻¹(u_i))`, the last coordinate on the surface `Σ x_i = B`.
pub fn curve_point(marginals: &[MarginalModel], b: f64, u_minus_d: &[f64]) -> Result<f64> {
    let (residual, last) = curve_residual(marginals, b, u_minus_d)?;
    Ok(marginals[last].cdf(residual))
}

fn curve_residual(marginals: &[MarginalModel], b: f64, u_minus_d: &[f64]) -> Result<(f64, usize)> {
    if marginals.is_empty() || u_minus_d.len() + 1 != marginals.len() {
        return Err(Error::DimensionMismatch { expected: marginals.len().saturating_sub(1), actual: u_minus_d.len() });
    }
    let last = marginals.len() - 1;
    let residual = b - loss_sum(&marginals[..last], u_minus_d);
    let (lo, hi) = marginals[last].support();
    if residual <= lo || residual >= hi {
        return Err(Error::OutsideSupport { index: last, residual });
    }
    Ok((residual, last))
}

/// Hessian of `r` with respect to `u_1, ..., u_{d-1}`.
pub fn curvature_hessian(marginals: &[MarginalModel], b: f64, u_minus_d: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (residual, last) = curve_residual(marginals, b, u_minus_d)?;
    let fd = &marginals[last];
    let (dens_r, slope_r) = (fd.pdf(residual), fd.pdf_prime(residual));
    let x: Vec<f64> = u_minus_d.iter().zip(marginals).map(|(&u, f)| loss_quantile(f, u)).collect();
    let dens: Vec<f64> = x.iter().zip(marginals).map(|(&xi, f)| f.pdf(xi)).collect();
    let n = last;
    let mut h = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..n {
            h[j][k] = if j == k {
                let slope_j = marginals[j].pdf_prime(x[j]);
                (slope_r * dens[j] + dens_r * slope_j) / dens[j].powi(3)
            } else {
                slope_r / (dens[j] * dens[k])
            };
        }
    }
    Ok(h)
}

/// Positive definiteness of the curvature Hessian, by attempting a Cholesky factorization.
pub fn is_convex_at(marginals: &[MarginalModel], b: f64, u_minus_d: &[f64]) -> Result<bool> {
    Ok(cholesky_succeeds(&curvature_hessian(marginals, b, u_minus_d)?))
}

fn cholesky_succeeds(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return false;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

/// Nested constraint levels `A_1 ⊃ A_2 ⊃ ... ⊃ A_T`. All but possibly the
/// last are Tail regions with strictly increasing thresholds; the last may
/// be a Band lying strictly inside the previous Tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub alphas: Vec<f64>,
    pub regions: Vec<ConstraintRegion>,
}

impl LevelSchedule {
    pub fn new(alphas: Vec<f64>, regions: Vec<ConstraintRegion>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != regions.len() {
            return Err(Error::InvalidParameter("level schedule needs one alpha per region and at least one level".into()));
        }
        for w in alphas.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParameter("level alphas must be strictly increasing".into()));
            }
        }
        for (t, r) in regions.iter().enumerate() {
            if r.mode == RegionMode::Band && t + 1 != regions.len() {
                return Err(Error::InvalidParameter("only the final level may be a Band".into()));
            }
        }
        for w in regions.windows(2) {
            let nested = match w[1].mode {
                RegionMode::Tail => w[1].threshold > w[0].threshold,
                RegionMode::Band => w[1].threshold - w[1].epsilon > w[0].threshold,
            };
            if !nested {
                return Err(Error::InvalidParameter(format!(
                    "levels must shrink: threshold {} does not lie inside the previous level at {}",
                    w[1].threshold, w[0].threshold
                )));
            }
        }
        Ok(LevelSchedule { alphas, regions })
    }

    pub fn tail(alphas: Vec<f64>, thresholds: &[f64]) -> Result<Self> {
        Self::new(alphas, thresholds.iter().map(|&b| ConstraintRegion::tail(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn target(&self) -> &ConstraintRegion {
        self.regions.last().expect("schedules are never empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig4() -> Vec<MarginalModel> {
        vec![MarginalModel::lognormal(0.6, 1.4).unwrap(), MarginalModel::lognormal(0.4, 1.0).unwrap()]
    }

    fn fig2() -> Vec<MarginalModel> {
        vec![MarginalModel::lognormal(3.0, 0.4).unwrap(), MarginalModel::lognormal(3.0, 0.6).unwrap()]
    }

    #[test]
    fn membership_examples() {
        let m = fig4();
        assert!(ConstraintRegion::tail(0.0).contains_u(&m, &[0.3, 0.01]));
        let r = ConstraintRegion::tail(3.57);
        assert!(r.contains_u(&m, &[0.9, 0.3]));
        assert!(!r.contains_u(&m, &[0.01, 0.01]));
        let tie = ConstraintRegion::tail(2.0);
        assert!(!tie.contains_sum(2.0));
    }

    #[test]
    fn residual_bound_examples() {
        let m = fig4();
        let r = ConstraintRegion::tail(3.57);
        let b = residual_bound(&r, &m, &[0.3], 0).unwrap();
        assert!((b - 0.609).abs() < 0.005, "{b}");
        // other coordinate already beyond B
        assert_eq!(residual_bound(&ConstraintRegion::tail(1.0), &m, &[0.99], 0).unwrap(), 0.0);
        let one = [MarginalModel::lognormal(0.0, 1.0).unwrap()];
        let b1 = residual_bound(&ConstraintRegion::tail(2.0), &one, &[], 0).unwrap();
        assert!((b1 - one[0].cdf(2.0)).abs() < 1e-15);
        assert!(residual_bound(&ConstraintRegion::band(1.0, 0.1).unwrap(), &m, &[0.3], 0).is_err());
    }

    #[test]
    fn curve_point_examples() {
        let m = fig4();
        let u1 = m[0].cdf(2.687);
        let r = curve_point(&m, 3.57, &[u1]).unwrap();
        assert!((r - 0.30).abs() < 0.005, "{r}");
        let med = m[0].quantile(0.5).unwrap() + m[1].quantile(0.5).unwrap();
        assert!((curve_point(&m, med, &[0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(curve_point(&m, 1.0, &[0.99]), Err(Error::OutsideSupport { .. })));
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let m = vec![
            MarginalModel::lognormal(1.0, 0.5).unwrap(),
            MarginalModel::lognormal(0.8, 0.7).unwrap(),
            MarginalModel::lognormal(1.2, 0.6).unwrap(),
        ];
        let b = 12.0;
        let u = [0.4, 0.55];
        let h = curvature_hessian(&m, b, &u).unwrap();
        let step = 1e-4;
        let r = |v: &[f64]| curve_point(&m, b, v).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let fd = if j == k {
                    let mut up = u;
                    up[j] += step;
                    let mut dn = u;
                    dn[j] -= step;
                    (r(&up) - 2.0 * r(&u) + r(&dn)) / (step * step)
                } else {
                    let mut acc = 0.0;
                    for (sj, sk, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        let mut v = u;
                        v[j] += sj * step;
                        v[k] += sk * step;
                        acc += sign * r(&v);
                    }
                    acc / (4.0 * step * step)
                };
                assert!((fd - h[j][k]).abs() <= 1e-3 * h[j][k].abs(), "entry ({j},{k}): fd={fd} analytic={}", h[j][k]);
            }
        }
    }

    #[test]
    fn bivariate_convexity_is_a_sign_check() {
        let m = fig2();
        for &b in &[10.0, 23.0, 46.0, 80.0] {
            let u1 = 0.5 * m[0].cdf(b);
            let x1 = m[0].quantile(u1).unwrap();
            let sign = m[1].pdf_prime(b - x1) * m[0].pdf(x1) + m[1].pdf(b - x1) * m[0].pdf_prime(x1);
            assert_eq!(is_convex_at(&m, b, &[u1]).unwrap(), sign > 0.0, "B={b}");
        }
    }

    #[test]
    fn curvature_flips_between_low_and_high_thresholds() {
        let m = fig2();
        let verdict = |b: f64| is_convex_at(&m, b, &[0.5 * m[0].cdf(b)]).unwrap();
        assert!(verdict(10.0));
        assert!(!verdict(46.0));
    }

    #[test]
    fn band_membership_is_difference_of_tails() {
        let m = fig4();
        let band = ConstraintRegion::band(5.0, 0.5).unwrap();
        for a in 1..20 {
            for b in 1..20 {
                let u = [a as f64 / 20.0, b as f64 / 20.0];
                let s = loss_sum(&m, &u);
                let expect = s >= 4.5 && s <= 5.5;
                assert_eq!(band.contains_u(&m, &u), expect);
            }
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(LevelSchedule::tail(vec![0.1, 0.2], &[1.0, 2.0]).is_ok());
        assert!(LevelSchedule::tail(vec![0.1, 0.2], &[2.0, 1.0]).is_err());
        let band = ConstraintRegion::band(5.0, 0.1).unwrap();
        assert!(LevelSchedule::new(vec![0.1, 0.5], vec![ConstraintRegion::tail(1.0), band]).is_ok());
        assert!(LevelSchedule::new(vec![0.1, 0.5], vec![ConstraintRegion::tail(4.95), band]).is_err());
        assert!(LevelSchedule::new(vec![0.5, 0.6], vec![band, ConstraintRegion::tail(9.0)]).is_err());
    }

    proptest! {
        #[test]
        fn bound_separates_inside_from_outside(u2 in 0.01f64..0.99, b in 1.0f64..30.0) {
            let m = fig4();
            let r = ConstraintRegion::tail(b);
            let lo = residual_bound(&r, &m, &[u2], 0).unwrap();
            let delta = 1e-6;
            if lo + delta < 1.0 - 1e-9 {
                prop_assert!(r.contains_u(&m, &[lo + delta, u2]));
            }
            if lo > delta {
                prop_assert!(!r.contains_u(&m, &[lo - delta, u2]));
            }
        }

        #[test]
        fn bound_is_nonincreasing_in_other_coordinates(a in 0.01f64..0.98, step in 0.001f64..0.02, b in 1.0f64..30.0) {
            let m = fig4();
            let r = ConstraintRegion::tail(b);
            let lo1 = residual_bound(&r, &m, &[a], 0).unwrap();
            let lo2 = residual_bound(&r, &m, &[(a + step).min(0.999)], 0).unwrap();
            prop_assert!(lo2 <= lo1);
        }
    }
}
