//! Archimedean and nested Archimedean copulas: cdf, density, exact sampling.

pub mod frailty;
pub mod generator;
pub mod nested;
pub mod tail;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::{Deserialize, Serialize};

pub use generator::{Family, Generator};
pub use nested::{Nested, NestedNode};

use crate::error::{Error, Result};

/// `ψ(ψ⁻¹(u_1) + ... + ψ⁻¹(u_d))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flat {
    generator: Generator,
    dim: usize,
}

impl Flat {
    pub fn new(generator: Generator, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("copula dimension must be positive".into()));
        }
        if !generator.is_completely_monotone() && dim > 2 {
            return Err(Error::InvalidParameter(format!(
                "Frank with negative theta is only a copula in two dimensions (got d = {dim})"
            )));
        }
        Ok(Flat { generator, dim })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let g = &self.generator;
        let th = g.theta();
        let v = match g.family() {
            Family::Clayton => frailty::gamma(rng, 1.0 / th),
            Family::Gumbel => frailty::positive_stable(rng, 1.0 / th),
            Family::Frank if th > 0.0 => frailty::log_series(rng, -(-th).exp_m1(), -th),
            Family::Frank => {
                // conditional inversion; only reachable for d ≤ 2
                let u1: f64 = Open01.sample(rng);
                out[0] = u1;
                if self.dim == 2 {
                    let w: f64 = Open01.sample(rng);
                    let num = w * (-th).exp_m1();
                    let den = w + (1.0 - w) * (-th * u1).exp();
                    out[1] = -(num / den).ln_1p() / th;
                }
                return;
            }
        };
        for slot in out.iter_mut() {
            let e: f64 = Exp1.sample(rng);
            *slot = g.psi(e / v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaModel {
    Flat(Flat),
    Nested(Nested),
}

impl CopulaModel {
    pub fn flat(family: Family, theta: f64, dim: usize) -> Result<Self> {
        Ok(CopulaModel::Flat(Flat::new(Generator::new(family, theta)?, dim)?))
    }

    pub fn independence(dim: usize) -> Self {
        Self::flat(Family::Gumbel, 1.0, dim).expect("independence copula is always valid")
    }

    pub fn nested(root: NestedNode) -> Result<Self> {
        Ok(CopulaModel::Nested(Nested::new(root)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::Flat(f) => f.dim,
            CopulaModel::Nested(n) => n.dim(),
        }
    }

    fn check_dim<T>(&self, u: &[T]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: u.len() });
        }
        Ok(())
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        if u.iter().any(|&x| x <= 0.0) {
            return Ok(0.0);
        }
        let u_clamped: Vec<f64> = u.iter().map(|&x| x.min(1.0)).collect();
        Ok(match self {
            CopulaModel::Flat(f) => {
                let g = &f.generator;
                g.psi(u_clamped.iter().map(|&x| g.psi_inv(x)).sum())
            }
            CopulaModel::Nested(n) => n.cdf(&u_clamped),
        })
    }

    /// Mixed partial derivative `∂^{|J|} C / Π_{i∈J} ∂u_i`; `subset[i]` marks membership in J.
    pub fn partial_derivative(&self, u: &[f64], subset: &[bool]) -> Result<f64> {
        self.check_dim(u)?;
        self.check_dim(subset)?;
        Ok(match self {
            CopulaModel::Flat(f) => {
                let g = &f.generator;
                let s: f64 = u.iter().map(|&x| g.psi_inv(x)).sum();
                let k = subset.iter().filter(|&&b| b).count();
                let pre: f64 = u.iter().zip(subset).filter(|(_, &b)| b).map(|(&x, _)| g.psi_inv_prime(x)).product();
                g.psi_deriv(k, s) * pre
            }
            CopulaModel::Nested(n) => n.partial(u, subset),
        })
    }

    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        let value = match self {
            CopulaModel::Flat(f) => {
                let g = &f.generator;
                let d = f.dim;
                let mut s = 0.0;
                let mut jac = 0.0;
                for &x in u {
                    s += g.psi_inv(x);
                    jac += g.ln_abs_psi_inv_prime(x);
                }
                let (l, sign) = g.ln_abs_psi_deriv(d, s);
                let expected = if d % 2 == 0 { 1.0 } else { -1.0 };
                if sign != expected {
                    return Err(Error::NonFiniteDensity);
                }
                l + jac
            }
            CopulaModel::Nested(n) => {
                let all = vec![true; n.dim()];
                let c = n.partial(u, &all);
                if c > 0.0 {
                    c.ln()
                } else {
                    return Err(Error::NonFiniteDensity);
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteDensity)
        }
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// One exact draw (Marshall–Olkin); `out` must have length `dim`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match self {
            CopulaModel::Flat(f) => f.sample(rng, out),
            CopulaModel::Nested(n) => n.sample(rng, out),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    /// `C(λ, ..., λ)`.
    pub fn diagonal(&self, lambda: f64) -> f64 {
        self.cdf(&vec![lambda; self.dim()]).expect("diagonal has the model dimension")
    }

    pub fn to_spec(&self) -> CopulaSpec {
        match self {
            CopulaModel::Flat(f) => CopulaSpec {
                family: f.generator.family(),
                theta: Some(f.generator.theta()),
                tail_dependence: None,
                dim: Some(f.dim),
                children: None,
            },
            CopulaModel::Nested(n) => {
                let root = n.root();
                CopulaSpec {
                    family: root.generator.family(),
                    theta: Some(root.generator.theta()),
                    tail_dependence: None,
                    dim: None,
                    children: Some(node_children_spec(root)),
                }
            }
        }
    }
}

/// Central mixed differences of `f` over the flagged coordinates.
/// Step `max(1e-4, eps^{1/(k+2)})` per coordinate, shrunk to stay in the unit cube.
pub(crate) fn finite_difference_partial<F: Fn(&[f64]) -> f64>(f: F, u: &[f64], subset: &[bool]) -> f64 {
    let idx: Vec<usize> = subset.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    let k = idx.len();
    if k == 0 {
        return f(u);
    }
    let base = f64::EPSILON.powf(1.0 / (k as f64 + 2.0)).max(1e-4);
    let h: Vec<f64> = idx.iter().map(|&i| base.min(0.5 * u[i]).min(0.5 * (1.0 - u[i]))).collect();
    let mut x = u.to_vec();
    let mut acc = 0.0;
    for mask in 0u32..(1 << k) {
        let mut sign = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            if mask >> j & 1 == 1 {
                x[i] = u[i] + h[j];
            } else {
                x[i] = u[i] - h[j];
                sign = -sign;
            }
        }
        acc += sign * f(&x);
    }
    acc / h.iter().map(|&hj| 2.0 * hj).product::<f64>()
}

/// Config-facing copula description. Exactly one of `dim` (flat) or
/// `children` (nested) must be given, and exactly one of `theta` or
/// `tail_dependence` (lower tail for Clayton, upper for Gumbel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_dependence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<NodeSpec>>,
}

/// A nested child: either a one-based leaf index or an inner node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSpec {
    Leaf {
        leaf: usize,
    },
    Node {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<Family>,
        theta: f64,
        children: Vec<NodeSpec>,
    },
}

impl CopulaSpec {
    pub fn build(&self) -> Result<CopulaModel> {
        match (self.dim, &self.children) {
            (Some(dim), None) => {
                let theta = match (self.theta, self.tail_dependence) {
                    (Some(t), None) => t,
                    (None, Some(lambda)) => tail::inverse(self.family, lambda, dim)?,
                    _ => return Err(Error::Config("copula needs exactly one of `theta` or `tail_dependence`".into())),
                };
                CopulaModel::flat(self.family, theta, dim)
            }
            (None, Some(children)) => {
                let theta = match (self.theta, self.tail_dependence) {
                    (Some(t), None) => t,
                    _ => return Err(Error::Config("nested copula nodes are specified by `theta`".into())),
                };
                let root = build_node(self.family, self.family, theta, children)?;
                CopulaModel::nested(root)
            }
            _ => Err(Error::Config("copula needs exactly one of `dim` (flat) or `children` (nested)".into())),
        }
    }
}

fn build_node(parent_family: Family, family: Family, theta: f64, children: &[NodeSpec]) -> Result<NestedNode> {
    if family != parent_family {
        return Err(Error::Config(format!("nested child family {family} differs from parent {parent_family}")));
    }
    let mut node = NestedNode { generator: Generator::new(family, theta)?, leaves: Vec::new(), children: Vec::new() };
    for c in children {
        match c {
            NodeSpec::Leaf { leaf } => {
                if *leaf == 0 {
                    return Err(Error::Config("leaf indices are one-based".into()));
                }
                node.leaves.push(leaf - 1);
            }
            NodeSpec::Node { family: f, theta: t, children: cc } => {
                node.children.push(build_node(family, f.unwrap_or(family), *t, cc)?);
            }
        }
    }
    Ok(node)
}

fn node_children_spec(node: &NestedNode) -> Vec<NodeSpec> {
    let mut out: Vec<NodeSpec> = node.leaves.iter().map(|&i| NodeSpec::Leaf { leaf: i + 1 }).collect();
    for c in &node.children {
        out.push(NodeSpec::Node { family: None, theta: c.generator.theta(), children: node_children_spec(c) });
    }
    out
}

/// The three-level Clayton tree used for the hierarchical case study:
/// root θ0 over two business units, cells 1-3 under θ1 and cells 4-7 under θ2.
pub fn business_unit_clayton(theta0: f64, theta1: f64, theta2: f64) -> Result<CopulaModel> {
    let leaf_node = |theta: f64, leaves: Vec<usize>| -> Result<NestedNode> {
        Ok(NestedNode { generator: Generator::new(Family::Clayton, theta)?, leaves, children: Vec::new() })
    };
    CopulaModel::nested(NestedNode {
        generator: Generator::new(Family::Clayton, theta0)?,
        leaves: Vec::new(),
        children: vec![leaf_node(theta1, vec![0, 1, 2])?, leaf_node(theta2, vec![3, 4, 5, 6])?],
    })
}
