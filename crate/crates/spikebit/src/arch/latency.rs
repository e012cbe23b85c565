//! Max-of-bottlenecks latency model.
//!
//! Every memory level is a pipeline stage limited by its bandwidth
//! (PE-local scratchpads aggregate across active PEs), and compute is
//! limited by issued ops over active PEs. The slowest stage sets the cycle
//! count.

use super::counts::access_counts;
use super::mapping::{Mapping, Workload};
use super::{ArchitectureSpec, Level};
use crate::error::Result;

/// Execution cycles for the workload under the mapping.
pub fn latency(workload: &Workload, arch: &ArchitectureSpec, mapping: &Mapping) -> Result<f64> {
    let counts = access_counts(workload, arch, mapping)?;
    latency_from_counts(&counts, arch)
}

pub(super) fn latency_from_counts(
    counts: &super::counts::AccessCounts,
    arch: &ArchitectureSpec,
) -> Result<f64> {
    let pes = counts.active_pes.max(1) as f64;
    let mut worst: f64 = 0.0;
    for &level in &Level::ALL {
        let bits = counts.levels[&level].total_bits() + counts.metadata[&level].total_bits();
        let mem = arch.level(level);
        let lanes = if level.per_pe() { pes } else { 1.0 };
        let cycles = bits / (mem.bandwidth_bits_per_cycle * lanes);
        worst = worst.max(cycles);
    }
    let compute = (counts.acc_ops + counts.cmp_ops as f64) / (pes * arch.ops_per_cycle);
    Ok(worst.max(compute))
}
