//! Dense row-major tensors and binary spike trains.
//!
//! `Tensor` is the substrate for weights, pre-activations and membrane
//! potentials; `SpikeTrain` is a time-major binary tensor of spikes. Both
//! carry explicit shapes and are validated on construction: no implicit
//! broadcasting anywhere in this crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense real-valued tensor, row-major, all values finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor", into = "RawTensor")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = Error;
    fn try_from(raw: RawTensor) -> Result<Self> {
        Tensor::new(raw.shape, raw.data)
    }
}

impl From<Tensor> for RawTensor {
    fn from(t: Tensor) -> Self {
        RawTensor {
            shape: t.shape,
            data: t.data,
        }
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::BadLength {
                context: "Tensor::new",
                got: data.len(),
                want,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Tensor::new"));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Tensor::new(vec![1], vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of elements that are exactly zero.
    pub fn zero_count(&self) -> usize {
        self.data.iter().filter(|v| **v == 0.0).count()
    }

    /// Fraction of nonzero elements.
    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.len() - self.zero_count()) as f64 / self.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                context: "Tensor::zip_map",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                context: "Tensor::add_scaled",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context));
        }
        Ok(())
    }
}

/// Binary spike train; `shape[0]` is the number of timesteps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpikeTrain", into = "RawSpikeTrain")]
pub struct SpikeTrain {
    shape: Vec<usize>,
    data: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RawSpikeTrain {
    shape: Vec<usize>,
    data: Vec<u8>,
}

impl TryFrom<RawSpikeTrain> for SpikeTrain {
    type Error = Error;
    fn try_from(raw: RawSpikeTrain) -> Result<Self> {
        SpikeTrain::new(raw.shape, raw.data)
    }
}

impl From<SpikeTrain> for RawSpikeTrain {
    fn from(t: SpikeTrain) -> Self {
        RawSpikeTrain {
            shape: t.shape,
            data: t.data,
        }
    }
}

impl SpikeTrain {
    pub fn new(shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        if shape.is_empty() || shape[0] == 0 {
            return Err(Error::InvalidArgument(
                "spike train needs at least one timestep".into(),
            ));
        }
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::BadLength {
                context: "SpikeTrain::new",
                got: data.len(),
                want,
            });
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::NotBinary(i));
        }
        Ok(SpikeTrain { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        SpikeTrain::new(shape, vec![0u8; len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn timesteps(&self) -> usize {
        self.shape[0]
    }

    /// Shape of one frame (everything after the time axis).
    pub fn frame_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn frame_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Frame at timestep `t` as a real tensor of 0.0/1.0 values.
    pub fn frame(&self, t: usize) -> Result<Tensor> {
        if t >= self.timesteps() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} out of range 0..{}",
                self.timesteps()
            )));
        }
        let fl = self.frame_len();
        let data = self.data[t * fl..(t + 1) * fl]
            .iter()
            .map(|&b| b as f64)
            .collect();
        Tensor::new(self.shape[1..].to_vec(), data)
    }

    pub fn set(&mut self, flat_index: usize, value: u8) -> Result<()> {
        if value > 1 {
            return Err(Error::NotBinary(flat_index));
        }
        if flat_index >= self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "flat index {flat_index} out of range"
            )));
        }
        self.data[flat_index] = value;
        Ok(())
    }

    pub fn ones_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.ones_count() as f64 / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_bad_length() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0; 3]),
            Err(Error::BadLength { .. })
        ));
    }

    #[test]
    fn tensor_rejects_non_finite() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_count_and_density_are_exact() {
        let t = Tensor::new(vec![4], vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(t.zero_count(), 2);
        assert_eq!(t.density(), 0.5);
        // density * element count is an exact nonzero count
        assert_eq!((t.density() * t.len() as f64) as usize, 2);
    }

    #[test]
    fn spike_train_rejects_non_binary() {
        assert!(matches!(
            SpikeTrain::new(vec![1, 2], vec![0, 2]),
            Err(Error::NotBinary(1))
        ));
    }

    #[test]
    fn spike_train_frames() {
        let st = SpikeTrain::new(vec![2, 2], vec![1, 0, 0, 1]).unwrap();
        assert_eq!(st.frame(0).unwrap().data(), &[1.0, 0.0]);
        assert_eq!(st.frame(1).unwrap().data(), &[0.0, 1.0]);
        assert!(st.frame(2).is_err());
    }

    #[test]
    fn tensor_serde_roundtrip_validates() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Tensor = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
        let bad = r#"{"shape":[2],"data":[1.0,2.0,3.0]}"#;
        assert!(serde_json::from_str::<Tensor>(bad).is_err());
    }
}
