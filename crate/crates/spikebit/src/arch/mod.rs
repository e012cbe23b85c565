//! Eyeriss-like analytical accelerator cost model.
//!
//! A grid of multiplier-free digital PEs (accumulate + compare only) under a
//! shared activation buffer and DRAM. Each PE owns four local stores: a
//! 1-bit-word input scratchpad, a weight scratchpad, a membrane scratchpad
//! and a threshold register. Energies are abstract model units per bit,
//! supplied by the architecture spec; nothing here is calibrated to a
//! process node.

mod counts;
mod energy;
mod latency;
mod mapping;
mod search;
pub mod sim;

pub use counts::{access_counts, analytical_dense_counts, AccessCounts, DenseCounts, Traffic};
pub use energy::{energy, EnergyReport, LevelEnergy};
pub use latency::latency;
pub use mapping::{
    validate_mapping, Dim, Factors, Mapping, SpatialAssign, Storage, Violation, Workload,
    ALL_DIMS,
};
pub use search::{count_candidates, sample_mappings, search_mappings, Objective, SearchResult};

use serde::{Deserialize, Serialize};

/// A storage level in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Dram,
    Buffer,
    IfSpad,
    WSpad,
    VmemSpad,
    VthReg,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::Dram,
        Level::Buffer,
        Level::IfSpad,
        Level::WSpad,
        Level::VmemSpad,
        Level::VthReg,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Level::Dram => "dram",
            Level::Buffer => "buffer",
            Level::IfSpad => "if_spad",
            Level::WSpad => "w_spad",
            Level::VmemSpad => "vmem_spad",
            Level::VthReg => "vth_reg",
        }
    }

    /// PE-local levels replicate per active PE (bandwidth aggregates).
    pub fn per_pe(self) -> bool {
        matches!(
            self,
            Level::IfSpad | Level::WSpad | Level::VmemSpad | Level::VthReg
        )
    }
}

/// Capacity, per-bit access energies and bandwidth of one memory level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemLevel {
    pub capacity_bits: u64,
    /// Model units per bit read.
    pub read_energy: f64,
    pub write_energy: f64,
    pub bandwidth_bits_per_cycle: f64,
}

/// The accelerator description: memory hierarchy, PE grid, compute energies
/// and the two sparsity features (clock gating, input-read skipping).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub dram: MemLevel,
    pub buffer: MemLevel,
    pub if_spad: MemLevel,
    pub w_spad: MemLevel,
    pub vmem_spad: MemLevel,
    pub vth_reg: MemLevel,
    pub pe_rows: u64,
    pub pe_cols: u64,
    /// Model units per accumulate op.
    pub acc_energy: f64,
    /// Model units per threshold compare.
    pub cmp_energy: f64,
    pub clock_gating: bool,
    pub input_read_skipping: bool,
    /// Membrane word width in bits.
    pub vmem_bits: u32,
    /// Threshold register width in bits.
    pub vth_bits: u32,
    pub ops_per_cycle: f64,
}

impl Default for ArchitectureSpec {
    /// Illustrative defaults with the usual ordering
    /// DRAM >> buffer >> scratchpad >> compute (model units per bit).
    fn default() -> Self {
        ArchitectureSpec {
            dram: MemLevel {
                capacity_bits: 1 << 40,
                read_energy: 200.0,
                write_energy: 200.0,
                bandwidth_bits_per_cycle: 64.0,
            },
            buffer: MemLevel {
                capacity_bits: 1 << 21, // 256 KiB
                read_energy: 6.0,
                write_energy: 6.0,
                bandwidth_bits_per_cycle: 256.0,
            },
            if_spad: MemLevel {
                capacity_bits: 512,
                read_energy: 1.0,
                write_energy: 1.0,
                bandwidth_bits_per_cycle: 16.0,
            },
            w_spad: MemLevel {
                capacity_bits: 8192,
                read_energy: 1.0,
                write_energy: 1.0,
                bandwidth_bits_per_cycle: 16.0,
            },
            vmem_spad: MemLevel {
                capacity_bits: 4096,
                read_energy: 1.0,
                write_energy: 1.0,
                bandwidth_bits_per_cycle: 16.0,
            },
            vth_reg: MemLevel {
                capacity_bits: 16,
                read_energy: 0.05,
                write_energy: 0.05,
                bandwidth_bits_per_cycle: 16.0,
            },
            pe_rows: 4,
            pe_cols: 4,
            acc_energy: 0.25,
            cmp_energy: 0.25,
            clock_gating: true,
            input_read_skipping: true,
            vmem_bits: 16,
            vth_bits: 16,
            ops_per_cycle: 1.0,
        }
    }
}

impl ArchitectureSpec {
    pub fn level(&self, level: Level) -> &MemLevel {
        match level {
            Level::Dram => &self.dram,
            Level::Buffer => &self.buffer,
            Level::IfSpad => &self.if_spad,
            Level::WSpad => &self.w_spad,
            Level::VmemSpad => &self.vmem_spad,
            Level::VthReg => &self.vth_reg,
        }
    }

    pub fn level_mut(&mut self, level: Level) -> &mut MemLevel {
        match level {
            Level::Dram => &mut self.dram,
            Level::Buffer => &mut self.buffer,
            Level::IfSpad => &mut self.if_spad,
            Level::WSpad => &mut self.w_spad,
            Level::VmemSpad => &mut self.vmem_spad,
            Level::VthReg => &mut self.vth_reg,
        }
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        for level in Level::ALL {
            let m = self.level(level);
            if m.capacity_bits == 0 {
                return Err(crate::error::Error::Config(format!(
                    "{} capacity must be > 0",
                    level.label()
                )));
            }
            if m.read_energy < 0.0 || m.write_energy < 0.0 {
                return Err(crate::error::Error::Config(format!(
                    "{} energies must be >= 0",
                    level.label()
                )));
            }
            if m.bandwidth_bits_per_cycle.is_nan() || m.bandwidth_bits_per_cycle <= 0.0 {
                return Err(crate::error::Error::Config(format!(
                    "{} bandwidth must be > 0",
                    level.label()
                )));
            }
        }
        if self.pe_rows == 0 || self.pe_cols == 0 {
            return Err(crate::error::Error::Config(
                "PE grid must be nonempty".into(),
            ));
        }
        if self.acc_energy < 0.0 || self.cmp_energy < 0.0 {
            return Err(crate::error::Error::Config(
                "compute energies must be >= 0".into(),
            ));
        }
        if self.ops_per_cycle.is_nan() || self.ops_per_cycle <= 0.0 {
            return Err(crate::error::Error::Config(
                "ops_per_cycle must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Full cost of one workload under one mapping: access counts, energy,
/// cycles and EDP.
pub fn evaluate_mapping(
    workload: &Workload,
    arch: &ArchitectureSpec,
    mapping: &Mapping,
) -> crate::error::Result<EnergyReport> {
    let counts = access_counts(workload, arch, mapping)?;
    let mut report = energy(&counts, arch);
    report.cycles = latency::latency_from_counts(&counts, arch)?;
    report.edp = report.total_energy * report.cycles;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_arch_is_valid() {
        ArchitectureSpec::default().validate().unwrap();
    }

    #[test]
    fn evaluate_fills_cycles_and_edp() {
        let w = Workload::dense_layer(4, 2, 2);
        let arch = ArchitectureSpec::default();
        let m = Mapping::untiled(&w);
        let report = evaluate_mapping(&w, &arch, &m).unwrap();
        assert!(report.cycles > 0.0);
        assert_eq!(report.edp, report.total_energy * report.cycles);
    }

    #[test]
    fn rle_weight_energy_monotone_in_density() {
        let mut w = Workload::dense_layer(64, 16, 2);
        w.weight_bits = 8;
        w.weight_storage = Storage::Sparse(crate::sparse::SparseFormat::Rle);
        let arch = ArchitectureSpec::default();
        let m = Mapping::untiled(&w);
        let mut last = f64::INFINITY;
        for d in [1.0, 0.5, 0.2, 0.1, 0.025] {
            w.weight_density = d;
            let report = evaluate_mapping(&w, &arch, &m).unwrap();
            assert!(
                report.total_energy <= last + 1e-9,
                "density {d}: {} > {last}",
                report.total_energy
            );
            last = report.total_energy;
        }
    }
}
