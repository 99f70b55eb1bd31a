//! Composite quadrature over a finite interval.

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_NODES: usize = (1 << 14) + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadRule {
    Trapezoid,
    Simpson,
}

/// A quadrature recipe: rule, node count, and integration interval.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub rule: QuadRule,
    pub nodes: usize,
    pub interval: (f64, f64),
}

impl QuadratureSpec {
    /// Composite Simpson with the default node count.
    pub fn simpson(lo: f64, hi: f64) -> Self {
        Self {
            rule: QuadRule::Simpson,
            nodes: DEFAULT_QUAD_NODES,
            interval: (lo, hi),
        }
    }

    pub fn trapezoid(lo: f64, hi: f64) -> Self {
        Self {
            rule: QuadRule::Trapezoid,
            nodes: DEFAULT_QUAD_NODES,
            interval: (lo, hi),
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Quadrature(format!(
                "interval [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        match self.rule {
            QuadRule::Trapezoid if self.nodes < 2 => Err(Error::Quadrature(format!(
                "trapezoid rule needs >= 2 nodes, got {}",
                self.nodes
            ))),
            QuadRule::Simpson if self.nodes < 3 || self.nodes % 2 == 0 => {
                Err(Error::Quadrature(format!(
                    "Simpson rule needs an odd node count >= 3, got {}",
                    self.nodes
                )))
            }
            _ => Ok(()),
        }
    }
}

/// The abscissae the composite rule evaluates, endpoints exact.
pub fn node_positions(spec: &QuadratureSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let (lo, hi) = spec.interval;
    let n = spec.nodes;
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
        .collect())
}

/// Integrates `g` over the spec's interval with the chosen composite rule.
pub fn quadrature(g: impl Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
    let nodes = node_positions(spec)?;
    let n = spec.nodes;
    let h = (spec.interval.1 - spec.interval.0) / (n - 1) as f64;
    let at = |i: usize| -> Result<f64> {
        let x = nodes[i];
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand value {v} at node x = {x}"
            )));
        }
        Ok(v)
    };
    let sum = match spec.rule {
        QuadRule::Trapezoid => {
            let mut acc = 0.5 * (at(0)? + at(n - 1)?);
            for i in 1..n - 1 {
                acc += at(i)?;
            }
            acc * h
        }
        QuadRule::Simpson => {
            let mut acc = at(0)? + at(n - 1)?;
            for i in 1..n - 1 {
                acc += if i % 2 == 1 { 4.0 * at(i)? } else { 2.0 * at(i)? };
            }
            acc * h / 3.0
        }
    };
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_is_exact() {
        let spec = QuadratureSpec::simpson(0.0, 1.0).with_nodes(3);
        assert_relative_eq!(quadrature(|x| x, &spec).unwrap(), 0.5, max_relative = 1e-15);
        let spec = QuadratureSpec::trapezoid(0.0, 1.0).with_nodes(2);
        assert_relative_eq!(quadrature(|x| x, &spec).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn cubic_is_exact_for_simpson() {
        let spec = QuadratureSpec::simpson(-1.0, 2.0).with_nodes(5);
        let got = quadrature(|x| x * x * x, &spec).unwrap();
        assert_relative_eq!(got, 15.0 / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn sine_integral() {
        let spec = QuadratureSpec::simpson(0.0, std::f64::consts::PI);
        assert_relative_eq!(
            quadrature(|x| x.sin(), &spec).unwrap(),
            2.0,
            max_relative = 1e-8
        );
    }

    #[test]
    fn uniform_density_mass_is_one() {
        let spec = QuadratureSpec::simpson(0.1, 10.0);
        let got = quadrature(|_| 1.0 / 9.9, &spec).unwrap();
        assert!((got - 1.0).abs() < 1e-12, "mass {got}");
    }

    #[test]
    fn rejects_bad_node_counts() {
        assert!(quadrature(|x| x, &QuadratureSpec::simpson(0.0, 1.0).with_nodes(4)).is_err());
        assert!(quadrature(|x| x, &QuadratureSpec::simpson(0.0, 1.0).with_nodes(1)).is_err());
        assert!(quadrature(|x| x, &QuadratureSpec::trapezoid(0.0, 1.0).with_nodes(1)).is_err());
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(quadrature(|x| x, &QuadratureSpec::simpson(1.0, 1.0)).is_err());
        assert!(quadrature(|x| x, &QuadratureSpec::simpson(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn names_the_offending_node() {
        let spec = QuadratureSpec::simpson(0.0, 2.0).with_nodes(5);
        let err = quadrature(|x| 1.0 / (x - 1.0), &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x = 1"), "message: {msg}");
    }
}
