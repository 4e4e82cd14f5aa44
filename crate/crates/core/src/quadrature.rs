//! Gauss–Legendre rules mapped onto the unit interval, used for the
//! segment integrals `∫₀¹ h(y + s(x − y)) s^k ds` of the WKB coefficients.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Default node count for line integrals.
pub const DEFAULT_ORDER: usize = 16;

/// A Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitRule {
    /// Builds an `order`-node rule; exact for polynomials of degree `2·order − 1`.
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order is at least one");
        let rule = GaussLegendre::new(order);
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Node/weight pairs on `[0, 1]`.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∫₀¹ f(s) ds`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(s, w)| w * f(s)).sum()
    }
}

impl Default for UnitRule {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER)
    }
}
