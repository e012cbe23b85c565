//! Built-in synthetic spike datasets for desk-scale experiments.

use crate::error::{Error, Result};
use crate::tensor::SpikeTrain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Labeled spike trains.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<(SpikeTrain, usize)>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Generator settings for the class-conditional Poisson patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub timesteps: usize,
    /// Frame shape, e.g. `[2, 10, 10]`.
    pub frame_shape: Vec<usize>,
    pub rate_lo: f64,
    pub rate_hi: f64,
    /// Seeds the class prototypes; train/eval splits of one task share it.
    pub seed: u64,
    /// Seeds the per-sample Bernoulli draws; differs between splits.
    #[serde(default)]
    pub noise_seed: u64,
}

/// Spatio-temporal Poisson patterns.
///
/// Each class owns a two-phase rate prototype (the map switches halfway
/// through the timesteps). For `[C, H, W]` frames the prototype is drawn
/// over 2x2 spatial blocks so classes differ in locally coherent regions;
/// other frame shapes draw per cell. Samples are independent Bernoulli
/// realizations of the class rates. Deterministic given the seeds.
pub fn synthetic_poisson(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.classes == 0 || spec.samples_per_class == 0 || spec.timesteps == 0 {
        return Err(Error::InvalidArgument(
            "classes, samples_per_class and timesteps must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.rate_lo)
        || !(0.0..=1.0).contains(&spec.rate_hi)
        || spec.rate_lo > spec.rate_hi
    {
        return Err(Error::InvalidArgument(
            "rates must satisfy 0 <= rate_lo <= rate_hi <= 1".into(),
        ));
    }
    let frame_len: usize = spec.frame_shape.iter().product();
    let mut proto_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pick = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < 0.5 {
            spec.rate_hi
        } else {
            spec.rate_lo
        }
    };
    // one rate frame for one phase of one class
    let phase_frame = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        match spec.frame_shape.as_slice() {
            [c, h, w] => {
                const BLOCK: usize = 2;
                let (bh, bw) = (h.div_ceil(BLOCK), w.div_ceil(BLOCK));
                let blocks: Vec<f64> = (0..c * bh * bw).map(|_| pick(rng)).collect();
                let mut frame = vec![0.0; c * h * w];
                for ic in 0..*c {
                    for y in 0..*h {
                        for x in 0..*w {
                            frame[(ic * h + y) * w + x] =
                                blocks[(ic * bh + y / BLOCK) * bw + x / BLOCK];
                        }
                    }
                }
                frame
            }
            _ => (0..frame_len).map(|_| pick(rng)).collect(),
        }
    };
    // class prototype: phase A for t < T/2, phase B afterwards
    let prototypes: Vec<[Vec<f64>; 2]> = (0..spec.classes)
        .map(|_| [phase_frame(&mut proto_rng), phase_frame(&mut proto_rng)])
        .collect();

    let mut sample_rng = ChaCha8Rng::seed_from_u64(spec.noise_seed.wrapping_add(1));
    let mut shape = vec![spec.timesteps];
    shape.extend_from_slice(&spec.frame_shape);
    let half = spec.timesteps.div_ceil(2);
    let mut samples = Vec::with_capacity(spec.classes * spec.samples_per_class);
    for (class, proto) in prototypes.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let mut data = Vec::with_capacity(spec.timesteps * frame_len);
            for t in 0..spec.timesteps {
                let phase = &proto[(t >= half) as usize];
                for &rate in phase {
                    data.push((sample_rng.random::<f64>() < rate) as u8);
                }
            }
            samples.push((SpikeTrain::new(shape.clone(), data)?, class));
        }
    }
    Ok(Dataset {
        samples,
        classes: spec.classes,
    })
}

/// Linearly separable two-class rate-coded task: class 0 drives the first
/// half of the input neurons at `rate_hi`, class 1 the second half.
pub fn rate_coded_two_class(
    samples_per_class: usize,
    timesteps: usize,
    neurons: usize,
    rate_hi: f64,
    rate_lo: f64,
    seed: u64,
) -> Result<Dataset> {
    if neurons < 2 {
        return Err(Error::InvalidArgument("need at least 2 neurons".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * samples_per_class);
    let half = neurons / 2;
    for class in 0..2usize {
        for _ in 0..samples_per_class {
            let mut data = Vec::with_capacity(timesteps * neurons);
            for _ in 0..timesteps {
                for n in 0..neurons {
                    let hot = (n < half) == (class == 0);
                    let rate = if hot { rate_hi } else { rate_lo };
                    data.push((rng.random::<f64>() < rate) as u8);
                }
            }
            samples.push((SpikeTrain::new(vec![timesteps, neurons], data)?, class));
        }
    }
    Ok(Dataset {
        samples,
        classes: 2,
    })
}
