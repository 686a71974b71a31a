//! Gauss-Legendre rules on the unit interval.

use std::num::NonZeroUsize;
use std::ops::{Add, Mul};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{domain, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
/// Weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitRule {
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        let Some(degree) = NonZeroUsize::new(n) else {
            return domain("quadrature needs at least one node");
        };
        let rule = GaussLegendre::new(degree);
        let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(UnitRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_k w_k f(x_k)` for real or complex integrands.
    pub fn integrate<T>(&self, mut f: impl FnMut(f64) -> T) -> T
    where
        T: Add<Output = T> + Mul<f64, Output = T> + Default,
    {
        self.nodes.iter().zip(&self.weights).fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::c64;

    #[test]
    fn weights_sum_to_one_and_polynomials_are_exact() {
        for n in [1, 2, 5, 16, 32] {
            let r = UnitRule::gauss_legendre(n).unwrap();
            assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            let deg = 2 * n as i32 - 1;
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((r.integrate(|x| x.powi(deg)) - exact).abs() < 1e-14);
        }
        assert!(UnitRule::gauss_legendre(0).is_err());
    }

    #[test]
    fn complex_integrand() {
        let r = UnitRule::gauss_legendre(16).unwrap();
        let v = r.integrate(|x| c64::new(x.cos(), x.exp()));
        assert!((v.re - 1f64.sin()).abs() < 1e-14);
        assert!((v.im - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
