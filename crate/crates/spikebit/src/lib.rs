//! Spiking network compression lab.
//!
//! End-to-end tooling for studying how weight quantization and pruning
//! interact with accelerator energy on spiking neural networks:
//!
//! * [`snn`] — dense/conv/pool layers, leaky integrate-and-fire simulation,
//!   event-stream binning and activity statistics.
//! * [`train`] — backpropagation through time with arc-tangent surrogate
//!   gradients, warmup/cosine schedules and per-step hooks.
//! * [`quant`] — learnable-scale fixed-point and ternary quantization with
//!   straight-through / gradient-scaling backward.
//! * [`prune`] / [`scheme`] — global magnitude pruning and the four
//!   compression schedules (quantize-only, prune-only, cumulative, joint).
//! * [`sparse`] — bit-exact UBM / UOP / CP / RLE codecs with size accounting
//!   and best-format selection.
//! * [`arch`] — an Eyeriss-like analytical cost model: mappings, access
//!   counting, energy/latency/EDP and causality-constrained mapping search.
//! * [`harness`] — experiment orchestration: scheme sweeps, Pareto
//!   frontiers and plot-ready reports.
//!
//! Each capability has a runnable example under `examples/`; see the README
//! for the tour and the `spikebit` CLI for the file-driven workflow.

pub mod arch;
pub mod config;
pub mod error;
pub mod harness;
pub mod prune;
pub mod quant;
pub mod scheme;
pub mod snn;
pub mod sparse;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{SpikeTrain, Tensor};
