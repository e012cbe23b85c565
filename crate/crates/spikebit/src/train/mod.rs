//! Surrogate-gradient training: BPTT, schedules, hooks and synthetic data.

mod bptt;
mod data;
mod schedule;
mod surrogate;
mod trainer;

pub use bptt::{argmax, batch_loss, bptt_grad, tape_counts, BpttConfig, BpttOutput, SpikeMode};
pub use data::{rate_coded_two_class, synthetic_poisson, Dataset, SyntheticSpec};
pub use schedule::{lr_at, TrainSchedule};
pub use surrogate::{surrogate_grad, surrogate_spike, SurrogateConfig};
pub use trainer::{evaluate, trace_to_csv, train, NoHook, TraceRow, TrainHook, TrainOutput};
