//! Energy accounting: weighted sum of per-level bit traffic plus compute.

use super::counts::AccessCounts;
use super::{ArchitectureSpec, Level};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEnergy {
    pub level: Level,
    pub read_bits: f64,
    pub write_bits: f64,
    pub energy: f64,
}

/// Per-component energy, cycles and energy-delay product for one workload
/// under one mapping. `total_energy` is the exact sum of the level, compute
/// and metadata line items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub levels: Vec<LevelEnergy>,
    pub acc_ops: f64,
    pub cmp_ops: f64,
    pub compute_energy: f64,
    pub metadata_bits: f64,
    pub metadata_energy: f64,
    pub total_energy: f64,
    pub cycles: f64,
    pub edp: f64,
}

impl EnergyReport {
    pub fn level(&self, level: Level) -> Option<&LevelEnergy> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// Sums two reports (layer-wise aggregation). Cycles add; EDP is
    /// recomputed from the sums.
    pub fn accumulate(&mut self, other: &EnergyReport) {
        for le in &mut self.levels {
            if let Some(o) = other.level(le.level) {
                le.read_bits += o.read_bits;
                le.write_bits += o.write_bits;
                le.energy += o.energy;
            }
        }
        self.acc_ops += other.acc_ops;
        self.cmp_ops += other.cmp_ops;
        self.compute_energy += other.compute_energy;
        self.metadata_bits += other.metadata_bits;
        self.metadata_energy += other.metadata_energy;
        self.total_energy += other.total_energy;
        self.cycles += other.cycles;
        self.edp = self.total_energy * self.cycles;
    }

    pub fn empty() -> EnergyReport {
        EnergyReport {
            levels: Level::ALL
                .iter()
                .map(|&level| LevelEnergy {
                    level,
                    read_bits: 0.0,
                    write_bits: 0.0,
                    energy: 0.0,
                })
                .collect(),
            acc_ops: 0.0,
            cmp_ops: 0.0,
            compute_energy: 0.0,
            metadata_bits: 0.0,
            metadata_energy: 0.0,
            total_energy: 0.0,
            cycles: 0.0,
            edp: 0.0,
        }
    }
}

/// Energy of the counted accesses: payload traffic per level, compute
/// (accumulates and compares) and the sparse-metadata line item. With clock
/// gating the accumulate energy covers only the issued ops; without it every
/// dense op slot is charged. Cycles and EDP are filled by
/// [`super::evaluate_mapping`].
pub fn energy(counts: &AccessCounts, arch: &ArchitectureSpec) -> EnergyReport {
    let mut levels = Vec::with_capacity(Level::ALL.len());
    let mut total = 0.0;
    for &level in &Level::ALL {
        let t = counts.levels[&level];
        let mem = arch.level(level);
        let e = t.read_bits * mem.read_energy + t.write_bits * mem.write_energy;
        levels.push(LevelEnergy {
            level,
            read_bits: t.read_bits,
            write_bits: t.write_bits,
            energy: e,
        });
        total += e;
    }
    let acc_charged = if arch.clock_gating {
        counts.acc_ops
    } else {
        counts.acc_ops_dense as f64
    };
    let compute_energy =
        acc_charged * arch.acc_energy + counts.cmp_ops as f64 * arch.cmp_energy;
    total += compute_energy;

    let mut metadata_bits = 0.0;
    let mut metadata_energy = 0.0;
    for &level in &Level::ALL {
        let t = counts.metadata[&level];
        let mem = arch.level(level);
        metadata_bits += t.total_bits();
        metadata_energy += t.read_bits * mem.read_energy + t.write_bits * mem.write_energy;
    }
    total += metadata_energy;

    EnergyReport {
        levels,
        acc_ops: counts.acc_ops,
        cmp_ops: counts.cmp_ops as f64,
        compute_energy,
        metadata_bits,
        metadata_energy,
        total_energy: total,
        cycles: 0.0,
        edp: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::counts::{access_counts, Traffic};
    use crate::arch::mapping::{Mapping, Workload};
    use std::collections::BTreeMap;

    fn zero_counts() -> AccessCounts {
        let mut levels = BTreeMap::new();
        let mut metadata = BTreeMap::new();
        for l in Level::ALL {
            levels.insert(l, Traffic::default());
            metadata.insert(l, Traffic::default());
        }
        AccessCounts {
            levels,
            metadata,
            acc_ops_dense: 0,
            acc_ops: 0.0,
            cmp_ops: 0,
            active_pes: 1,
            dense: Default::default(),
        }
    }

    #[test]
    fn zero_counts_zero_energy() {
        let arch = ArchitectureSpec::default();
        let report = energy(&zero_counts(), &arch);
        assert_eq!(report.total_energy, 0.0);
    }

    #[test]
    fn weighted_sum_example() {
        // 10 bits at 200/bit + 100 bits at 6/bit = 2600
        let mut arch = ArchitectureSpec::default();
        arch.dram.read_energy = 200.0;
        arch.buffer.read_energy = 6.0;
        let mut counts = zero_counts();
        counts.levels.get_mut(&Level::Dram).unwrap().read_bits = 10.0;
        counts.levels.get_mut(&Level::Buffer).unwrap().read_bits = 100.0;
        let report = energy(&counts, &arch);
        assert_eq!(report.total_energy, 2600.0);
    }

    #[test]
    fn conservation_total_is_sum_of_parts() {
        let w = Workload::dense_layer(4, 3, 2);
        let arch = ArchitectureSpec::default();
        let m = Mapping::untiled(&w);
        let counts = access_counts(&w, &arch, &m).unwrap();
        let report = energy(&counts, &arch);
        let parts: f64 = report.levels.iter().map(|l| l.energy).sum::<f64>()
            + report.compute_energy
            + report.metadata_energy;
        assert_eq!(report.total_energy, parts);
    }

    #[test]
    fn metadata_line_item_recomputable_from_encoding_sizes() {
        use crate::arch::mapping::Storage;
        use crate::sparse::{expected_size_bits, SparseFormat};
        // untiled dense layer: weights fetched once as a single block
        let mut w = Workload::dense_layer(64, 16, 1);
        w.weight_bits = 8;
        w.weight_density = 0.25;
        w.weight_storage = Storage::Sparse(SparseFormat::Ubm);
        let arch = ArchitectureSpec::default();
        let m = Mapping::untiled(&w);
        let counts = access_counts(&w, &arch, &m).unwrap();
        let report = energy(&counts, &arch);
        // the weight block is 64*16 words; UBM metadata is one mask bit per
        // word. It crosses DRAM (read) and the W-Spad (write) exactly once.
        let n = 64 * 16;
        let mask_bits = expected_size_bits(SparseFormat::Ubm, n, 0.25, 8, &w.rle)
            - 0.25 * n as f64 * 8.0;
        assert_eq!(mask_bits, n as f64);
        let expected = mask_bits * arch.dram.read_energy + mask_bits * arch.w_spad.write_energy;
        assert_eq!(report.metadata_energy, expected);
        assert_eq!(report.metadata_bits, 2.0 * mask_bits);
    }

    #[test]
    fn clock_gating_off_charges_dense_ops() {
        let mut w = Workload::dense_layer(4, 3, 2);
        w.input_density = 0.25;
        let m = Mapping::untiled(&w);
        let gated_arch = ArchitectureSpec { clock_gating: true, ..Default::default() };
        let gated = energy(&access_counts(&w, &gated_arch, &m).unwrap(), &gated_arch);
        let ungated_arch = ArchitectureSpec { clock_gating: false, ..Default::default() };
        let ungated = energy(&access_counts(&w, &ungated_arch, &m).unwrap(), &ungated_arch);
        assert!(ungated.compute_energy > gated.compute_energy);
    }
}
