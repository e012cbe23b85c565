//! Learnable-scale fixed-point weight quantization.
//!
//! Forward: `Q(x) = clip(round(x / s_in), qmin, qmax) * s_out` with
//! round-half-away-from-zero. Ternary mode clips to [-1, 1]. Backward is a
//! straight-through estimator with optional residual gradient scaling
//! (strength `delta`; `delta = 0` is the plain estimator).

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Quantizer precision: a signed fixed-point bit width or three-level ternary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Bits(u8),
    Ternary,
}

impl Precision {
    /// Bits needed to store one quantized code in two's complement.
    pub fn value_bits(self) -> u8 {
        match self {
            Precision::Bits(b) => b,
            Precision::Ternary => 2,
        }
    }

    pub fn label(self) -> String {
        match self {
            Precision::Bits(b) => format!("{b}b"),
            Precision::Ternary => "ternary".into(),
        }
    }
}

/// Per-layer quantizer settings with learnable input/output scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    pub precision: Precision,
    pub s_in: f64,
    pub s_out: f64,
    /// Gradient-scaling strength; 0 disables residual scaling.
    pub delta: f64,
}

impl QuantConfig {
    pub fn new(precision: Precision, s_in: f64, s_out: f64, delta: f64) -> Result<Self> {
        if let Precision::Bits(b) = precision {
            if !(2..=16).contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "bit width {b} outside supported range 2..=16"
                )));
            }
        }
        if s_in.is_nan() || s_in <= 0.0 || s_out.is_nan() || s_out <= 0.0 {
            return Err(Error::InvalidArgument(
                "scales must be strictly positive".into(),
            ));
        }
        if delta < 0.0 {
            return Err(Error::InvalidArgument("delta must be >= 0".into()));
        }
        Ok(QuantConfig {
            precision,
            s_in,
            s_out,
            delta,
        })
    }

    /// Inclusive clip range of the integer codes.
    pub fn code_range(&self) -> (i64, i64) {
        match self.precision {
            Precision::Ternary => (-1, 1),
            Precision::Bits(b) => (-(1i64 << (b - 1)), (1i64 << (b - 1)) - 1),
        }
    }
}

/// Scale initialization: `mean(w) + 3 * std(w)` (population std), falling
/// back to `3 * std` if that is non-positive, and to `max(|w|, 1e-8)` for
/// constant tensors.
pub fn init_scales(weights: &Tensor) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyTensor("init_scales"));
    }
    let n = weights.len() as f64;
    let mean = weights.data().iter().sum::<f64>() / n;
    let var = weights
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std == 0.0 {
        let max_abs = weights.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        return Ok(max_abs.max(1e-8));
    }
    let s = mean + 3.0 * std;
    if s > 0.0 {
        Ok(s)
    } else {
        Ok(3.0 * std)
    }
}

fn round_half_away(x: f64) -> f64 {
    // f64::round rounds half away from zero
    x.round()
}

fn code_of(x: f64, cfg: &QuantConfig) -> i64 {
    let (lo, hi) = cfg.code_range();
    let q = round_half_away(x / cfg.s_in);
    (q as i64).clamp(lo, hi)
}

/// Elementwise clip-round quantization; returns real values `code * s_out`.
pub fn quantize(x: &Tensor, cfg: &QuantConfig) -> Result<Tensor> {
    x.check_finite("quantize")?;
    Ok(x.map(|v| code_of(v, cfg) as f64 * cfg.s_out))
}

/// Integer codes of the quantized tensor (the storage representation).
pub fn quantize_codes(x: &Tensor, cfg: &QuantConfig) -> Result<Vec<i64>> {
    x.check_finite("quantize_codes")?;
    Ok(x.data().iter().map(|&v| code_of(v, cfg)).collect())
}

/// Gradients returned by the quantizer backward pass.
#[derive(Debug, Clone)]
pub struct QatGrads {
    pub grad_x: Tensor,
    pub grad_s_in: f64,
    pub grad_s_out: f64,
}

/// Straight-through backward with residual gradient scaling.
///
/// Inside the clip range: `grad_x = up * (1 + delta * sign(up) * (x/s_in - code))`,
/// zero outside. Scale gradients treat rounding as identity:
/// `d/ds_out = code` exactly, `d/ds_in = -s_out * x / s_in^2` inside the range.
pub fn qat_backward(upstream: &Tensor, x: &Tensor, cfg: &QuantConfig) -> Result<QatGrads> {
    if upstream.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            context: "qat_backward",
            lhs: upstream.shape().to_vec(),
            rhs: x.shape().to_vec(),
        });
    }
    let (lo, hi) = cfg.code_range();
    let (lo_f, hi_f) = (lo as f64, hi as f64);
    let mut grad_x = vec![0.0; x.len()];
    let mut grad_s_in = 0.0;
    let mut grad_s_out = 0.0;
    for (i, (&up, &xv)) in upstream.data().iter().zip(x.data().iter()).enumerate() {
        let r = xv / cfg.s_in;
        let code = code_of(xv, cfg) as f64;
        grad_s_out += up * code;
        if (lo_f..=hi_f).contains(&r) {
            let residual = r - code;
            let sign = if up > 0.0 {
                1.0
            } else if up < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad_x[i] = up * (1.0 + cfg.delta * sign * residual);
            grad_s_in += up * cfg.s_out * (-r / cfg.s_in);
        }
    }
    Ok(QatGrads {
        grad_x: Tensor::new(x.shape().to_vec(), grad_x)?,
        grad_s_in,
        grad_s_out,
    })
}

/// Fraction of exactly-zero elements in a quantized tensor.
pub fn induced_sparsity(weights_q: &Tensor) -> Result<f64> {
    if weights_q.is_empty() {
        return Err(Error::EmptyTensor("induced_sparsity"));
    }
    Ok(weights_q.zero_count() as f64 / weights_q.len() as f64)
}
