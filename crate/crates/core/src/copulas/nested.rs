//! Hierarchical (nested) Archimedean copulas.
//!
//! A node with generator ψ_n combines its leaves and child nodes as
//! `C_n(u) = ψ_n(Σ_leaves ψ_n⁻¹(u_i) + Σ_children ψ_n⁻¹(C_child(u)))`.
//!
//! Densities for trees of depth ≤ 2 (root plus leaf-only children) are exact:
//! with `T_s = Σ_{i∈s} ψ_s⁻¹(u_i)` and `g_s = ψ_0⁻¹ ∘ ψ_s`, Faà di Bruno gives
//!
//! ```text
//! ∂_J C = Π_{i∈J} (ψ_{owner(i)}⁻¹)'(u_i) · Σ_k ψ_0^{(|J_0| + Σ k_s)}(S) Π_s B_{n_s, k_s}(g_s', g_s'', ...)
//! ```
//!
//! where the partial Bell polynomials come from jets of `g_s` at `T_s`.
//! Deeper trees fall back to mixed central differences of the cdf.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::frailty;
use super::generator::{Family, Generator};
use crate::error::{Error, Result};
use crate::jet::{bell_row, Jet};

#[derive(Debug, Clone, PartialEq)]
pub struct NestedNode {
    pub generator: Generator,
    /// Zero-based coordinates attached directly to this node.
    pub leaves: Vec<usize>,
    pub children: Vec<NestedNode>,
}

impl NestedNode {
    fn collect_leaves(&self, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.leaves);
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().map(NestedNode::depth).max().unwrap_or(0)
    }

    fn cdf(&self, u: &[f64]) -> f64 {
        let g = &self.generator;
        let mut s = 0.0;
        for &i in &self.leaves {
            s += g.psi_inv(u[i]);
        }
        for c in &self.children {
            let v = c.cdf(u);
            if v <= 0.0 {
                return 0.0;
            }
            s += g.psi_inv(v);
        }
        g.psi(s)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, v: f64, out: &mut [f64]) {
        let g = &self.generator;
        for &i in &self.leaves {
            let e: f64 = Exp1.sample(rng);
            out[i] = g.psi(e / v);
        }
        for c in &self.children {
            let a = g.theta() / c.generator.theta();
            let vc = match g.family() {
                Family::Clayton => frailty::tilted_stable(rng, a, v),
                Family::Gumbel => v.powf(1.0 / a) * frailty::positive_stable(rng, a),
                Family::Frank => unreachable!("nested Frank sampling is rejected at construction"),
            };
            c.sample(rng, vc, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nested {
    root: NestedNode,
    dim: usize,
}

impl Nested {
    pub fn new(root: NestedNode) -> Result<Self> {
        let mut leaves = Vec::new();
        root.collect_leaves(&mut leaves);
        let dim = leaves.len();
        let mut seen = vec![false; dim];
        for &i in &leaves {
            if i >= dim || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "nested copula leaves must partition 1..={dim}; leaf {} is repeated or out of range",
                    i + 1
                )));
            }
            seen[i] = true;
        }
        if dim < 2 {
            return Err(Error::InvalidParameter("nested copula needs at least two leaves".into()));
        }
        check_node(&root)?;
        Ok(Nested { root, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &NestedNode {
        &self.root
    }

    /// True when the density is evaluated analytically (depth ≤ 2).
    pub fn has_analytic_density(&self) -> bool {
        self.root.depth() <= 2
    }

    pub fn cdf(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        self.root.cdf(u)
    }

    /// Mixed partial derivative of the cdf over the coordinates flagged in `subset`.
    pub fn partial(&self, u: &[f64], subset: &[bool]) -> f64 {
        if self.has_analytic_density() {
            self.partial_two_level(u, subset)
        } else {
            super::finite_difference_partial(|x| self.cdf(x), u, subset)
        }
    }

    fn partial_two_level(&self, u: &[f64], subset: &[bool]) -> f64 {
        let g0 = &self.root.generator;
        let mut s0 = 0.0;
        let mut prefactor = 1.0;
        let mut root_order = 0;
        for &i in &self.root.leaves {
            s0 += g0.psi_inv(u[i]);
            if subset[i] {
                prefactor *= g0.psi_inv_prime(u[i]);
                root_order += 1;
            }
        }
        // poly[m] = Σ over child orders with Σ k_s = m of Π_s B_{n_s, k_s}
        let mut poly = vec![1.0];
        for child in &self.root.children {
            let gs = &child.generator;
            let mut t = 0.0;
            let mut n = 0;
            for &i in &child.leaves {
                t += gs.psi_inv(u[i]);
                if subset[i] {
                    prefactor *= gs.psi_inv_prime(u[i]);
                    n += 1;
                }
            }
            let jet = g0.psi_inv_jet(&gs.psi_jet(&Jet::variable(t, n)));
            s0 += jet.value();
            if n > 0 {
                let row = bell_row(&jet);
                let mut next = vec![0.0; poly.len() + n];
                for (m, &p) in poly.iter().enumerate() {
                    for k in 1..=n {
                        next[m + k] += p * row[k];
                    }
                }
                poly = next;
            }
        }
        let sum: f64 = poly
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(m, &p)| p * g0.psi_deriv(root_order + m, s0))
            .sum();
        prefactor * sum
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let g = &self.root.generator;
        let v = match g.family() {
            Family::Clayton => frailty::gamma(rng, 1.0 / g.theta()),
            Family::Gumbel => frailty::positive_stable(rng, 1.0 / g.theta()),
            Family::Frank => unreachable!("nested Frank sampling is rejected at construction"),
        };
        self.root.sample(rng, v, out);
    }
}

fn check_node(node: &NestedNode) -> Result<()> {
    let g = &node.generator;
    if g.family() == Family::Frank {
        return Err(Error::Unsupported("nested copulas are built for the Clayton and Gumbel families".into()));
    }
    if node.leaves.len() + node.children.len() < 1 {
        return Err(Error::InvalidParameter("nested copula node without children".into()));
    }
    for c in &node.children {
        if c.generator.family() != g.family() {
            return Err(Error::InvalidParameter(format!(
                "child family {} differs from parent family {}",
                c.generator.family(),
                g.family()
            )));
        }
        if c.generator.theta() < g.theta() {
            return Err(Error::InvalidParameter(format!(
                "child theta {} is below parent theta {}; nesting requires nondecreasing theta towards the leaves",
                c.generator.theta(),
                g.theta()
            )));
        }
        check_node(c)?;
    }
    Ok(())
}
