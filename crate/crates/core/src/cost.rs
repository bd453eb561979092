//! Circuit quality and the analytic error model behind it.

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};

/// Weights of the linear quality function `q = alpha * d + beta * n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityWeights {
    /// Cost per moment.
    pub alpha: f64,
    /// Cost per gate.
    pub beta: f64,
}

impl Default for QualityWeights {
    fn default() -> Self {
        QualityWeights {
            alpha: 1.0,
            beta: 0.2,
        }
    }
}

impl QualityWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(Error::InvalidValue {
                what: "quality weights",
                details: format!("alpha={alpha}, beta={beta} must be non-negative"),
            });
        }
        Ok(QualityWeights { alpha, beta })
    }
}

/// A user-replaceable circuit-to-scalar cost; lower is better.
pub trait QualityFn {
    fn quality(&self, circuit: &Circuit) -> f64;
}

impl QualityFn for QualityWeights {
    fn quality(&self, circuit: &Circuit) -> f64 {
        self.alpha * circuit.depth() as f64 + self.beta * circuit.gate_count() as f64
    }
}

impl<F: Fn(&Circuit) -> f64> QualityFn for F {
    fn quality(&self, circuit: &Circuit) -> f64 {
        self(circuit)
    }
}

/// Default quality `q = alpha * d + beta * n`.
pub fn quality(circuit: &Circuit, w: &QualityWeights) -> f64 {
    w.quality(circuit)
}

/// Probability to execute a circuit error-free: `e^{-m * gamma_T} * prod u_k`,
/// where `gamma_T` is the dimensionless idle-decay exponent per qubit and
/// `u_k` are per-gate underperformance factors in `(0, 1]`.
pub fn success_probability(num_qubits: usize, gamma_t: f64, gate_factors: &[f64]) -> Result<f64> {
    if gamma_t < 0.0 {
        return Err(Error::InvalidValue {
            what: "gamma_T",
            details: format!("{gamma_t} must be >= 0"),
        });
    }
    for &u in gate_factors {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidValue {
                what: "gate factor",
                details: format!("{u} must lie in (0, 1]"),
            });
        }
    }
    let idle = (-(num_qubits as f64) * gamma_t).exp();
    Ok(gate_factors.iter().product::<f64>() * idle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    #[test]
    fn quality_is_weighted_sum() {
        // d = 2, n = 3 with defaults: 1*2 + 0.2*3 = 2.6
        let c = Circuit::new(
            2,
            vec![Gate::zrot(0, 0.5), Gate::zrot(1, 0.5), Gate::cnot(0, 1)],
        )
        .unwrap();
        let q = quality(&c, &QualityWeights::default());
        assert!((q - 2.6).abs() < 1e-12);
        assert_eq!(quality(&Circuit::empty(2), &QualityWeights::default()), 0.0);
    }

    #[test]
    fn success_probability_formula() {
        assert_eq!(success_probability(1, 0.0, &[]).unwrap(), 1.0);
        let p = success_probability(2, 0.5, &[1.0, 1.0]).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn success_probability_consistent_with_quality_weights() {
        // Equal underperformance u_k = e^{-beta}: -ln P = beta * n at gamma_T = 0.
        let beta = 0.2;
        let u = (-beta as f64).exp();
        let p = success_probability(1, 0.0, &[u, u]).unwrap();
        assert!((-p.ln() - beta * 2.0).abs() < 1e-12);
    }

    #[test]
    fn success_probability_domain_errors() {
        assert!(success_probability(1, -0.1, &[]).is_err());
        assert!(success_probability(1, 0.0, &[0.0]).is_err());
        assert!(success_probability(1, 0.0, &[1.1]).is_err());
    }
}
