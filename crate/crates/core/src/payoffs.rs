//! Swaption cash flows deflated by the terminal bond.

use crate::error::{Error, Result};
use crate::lmm::PayoffStyle;

/// Swaption exercisable at `tenor[first]` on the legs `first..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwaptionSpec {
    pub first: usize,
    pub strike: f64,
    pub style: PayoffStyle,
}

impl SwaptionSpec {
    pub fn new(first: usize, n: usize, strike: f64, style: PayoffStyle) -> Result<Self> {
        if first >= n {
            return Err(Error::invalid("first", format!("exercise index {first} out of range for n = {n}")));
        }
        if !(strike > 0.0) {
            return Err(Error::invalid("strike", format!("must be positive, got {strike}")));
        }
        Ok(Self { first, strike, style })
    }
}

/// `B_{j+1}/B_n = Π_{k>j} (1 + δ_k L_k)`; `1` for the last Libor.
pub fn bond_ratio(libors: &[f64], delta: &[f64], j: usize) -> Result<f64> {
    if j >= libors.len() || delta.len() != libors.len() {
        return Err(Error::invalid("j", format!("leg {j} out of range for {} Libors", libors.len())));
    }
    Ok((j + 1..libors.len()).map(|k| 1.0 + delta[k] * libors[k]).product())
}

/// `B_n(T_i)` relative to `B_i(T_i) = 1`: `Π_{k≥i} (1 + δ_k L_k)⁻¹`.
pub fn terminal_bond(libors: &[f64], delta: &[f64], first: usize) -> f64 {
    (first..libors.len()).map(|k| 1.0 / (1.0 + delta[k] * libors[k])).product()
}

/// Exercise value in units of the terminal bond. Each leg pays `δ_j (L_j − θ)`.
pub fn swaption_payoff(libors: &[f64], delta: &[f64], spec: &SwaptionSpec) -> f64 {
    let n = libors.len();
    let mut ratio = 1.0;
    let mut acc = 0.0;
    for j in (spec.first..n).rev() {
        let leg = delta[j] * (libors[j] - spec.strike);
        acc += ratio
            * match spec.style {
                PayoffStyle::PerLeg => leg.max(0.0),
                PayoffStyle::OnSum => leg,
            };
        ratio *= 1.0 + delta[j] * libors[j];
    }
    match spec.style {
        PayoffStyle::PerLeg => acc,
        PayoffStyle::OnSum => acc.max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bond_ratio_examples() {
        let d = vec![0.5; 20];
        let flat = vec![0.035; 20];
        assert_eq!(bond_ratio(&flat, &d, 19).unwrap(), 1.0);
        assert_eq!(bond_ratio(&[0.0; 20], &d, 3).unwrap(), 1.0);
        assert!((bond_ratio(&flat, &d, 17).unwrap() - 1.03530625).abs() < 1e-14);
        assert!(bond_ratio(&flat, &d, 20).is_err());
    }

    #[test]
    fn payoff_examples() {
        let d = vec![0.5; 20];
        for style in [PayoffStyle::PerLeg, PayoffStyle::OnSum] {
            let spec = SwaptionSpec::new(0, 20, 0.035, style).unwrap();
            assert_eq!(swaption_payoff(&[0.035; 20], &d, &spec), 0.0);
            assert_eq!(swaption_payoff(&[0.03; 20], &d, &spec), 0.0);
        }
        let tiny = SwaptionSpec::new(2, 20, 1e-300, PayoffStyle::PerLeg).unwrap();
        let l = vec![0.035; 20];
        let direct: f64 = (2..20).map(|j| bond_ratio(&l, &d, j).unwrap() * 0.5 * 0.035).sum();
        assert!((swaption_payoff(&l, &d, &tiny) - direct).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn payoff_properties(
            ls in prop::collection::vec(1e-3f64..0.1, 6),
            bump in 0.0f64..0.05,
            j in 0usize..6,
            first in 0usize..6,
            on_sum in any::<bool>(),
        ) {
            let d = vec![0.5; 6];
            let style = if on_sum { PayoffStyle::OnSum } else { PayoffStyle::PerLeg };
            let spec = SwaptionSpec::new(first, 6, 0.035, style).unwrap();
            let base = swaption_payoff(&ls, &d, &spec);
            prop_assert!(base >= 0.0);
            let mut up = ls.clone();
            up[j] += bump;
            prop_assert!(swaption_payoff(&up, &d, &spec) >= base - 1e-15);
            // bond_ratio(j) ignores rates up to j
            let mut low = ls.clone();
            low[..=j].iter_mut().for_each(|v| *v *= 2.0);
            prop_assert_eq!(bond_ratio(&low, &d, j).unwrap(), bond_ratio(&ls, &d, j).unwrap());
        }
    }
}
