//! Arc-tangent surrogate for the spike nonlinearity.
//!
//! The smooth stand-in for the Heaviside step is
//! `h(x) = (1/pi) * atan(pi * alpha * x / 2) + 1/2`, whose derivative
//! `h'(x) = alpha / (2 * (1 + (pi * alpha * x / 2)^2))` replaces `H'`
//! during backpropagation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Sharpness of the arc-tangent; larger is closer to a step.
    pub alpha: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { alpha: 2.0 }
    }
}

impl SurrogateConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "surrogate alpha {alpha} must be > 0"
            )));
        }
        Ok(SurrogateConfig { alpha })
    }
}

/// Derivative of the smooth spike at membrane distance `u_minus_vth`.
pub fn surrogate_grad(u_minus_vth: f64, cfg: &SurrogateConfig) -> f64 {
    let z = PI * cfg.alpha * u_minus_vth / 2.0;
    cfg.alpha / (2.0 * (1.0 + z * z))
}

/// The smooth spike itself, used by the gradient-check forward mode.
pub fn surrogate_spike(u_minus_vth: f64, cfg: &SurrogateConfig) -> f64 {
    (PI * cfg.alpha * u_minus_vth / 2.0).atan() / PI + 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_value_at_origin() {
        let cfg = SurrogateConfig { alpha: 2.0 };
        assert_eq!(surrogate_grad(0.0, &cfg), 1.0);
        let cfg = SurrogateConfig { alpha: 5.0 };
        assert_eq!(surrogate_grad(0.0, &cfg), 2.5);
    }

    #[test]
    fn tails_vanish() {
        let cfg = SurrogateConfig::default();
        assert!(surrogate_grad(1e6, &cfg) < 1e-11);
        assert!(surrogate_grad(-1e6, &cfg) < 1e-11);
    }

    #[test]
    fn closed_form_at_one() {
        // alpha=2, x=1: 2 / (2 * (1 + pi^2))
        let cfg = SurrogateConfig { alpha: 2.0 };
        let expected = 2.0 / (2.0 * (1.0 + PI * PI));
        assert!((surrogate_grad(1.0, &cfg) - expected).abs() < 1e-15);
        assert!((expected - 0.0920).abs() < 5e-5);
    }

    #[test]
    fn spike_is_antisymmetric_around_half() {
        let cfg = SurrogateConfig::default();
        for &x in &[0.1, 0.7, 3.0] {
            let a = surrogate_spike(x, &cfg);
            let b = surrogate_spike(-x, &cfg);
            assert!((a + b - 1.0).abs() < 1e-12);
        }
        assert_eq!(surrogate_spike(0.0, &cfg), 0.5);
    }

    #[test]
    fn grad_is_derivative_of_spike() {
        let cfg = SurrogateConfig { alpha: 1.7 };
        let eps = 1e-6;
        for &x in &[-1.2, -0.3, 0.0, 0.4, 2.0] {
            let fd = (surrogate_spike(x + eps, &cfg) - surrogate_spike(x - eps, &cfg)) / (2.0 * eps);
            assert!((fd - surrogate_grad(x, &cfg)).abs() < 1e-8);
        }
    }

    #[test]
    fn non_positive_alpha_rejected() {
        assert!(SurrogateConfig::new(0.0).is_err());
        assert!(SurrogateConfig::new(-1.0).is_err());
    }
}
