//! Mapping search on the accelerator model: validation, loop-interchange
//! search, the energy/EDP report and the loop-nest simulation cross-check.
//!
//! Run with: cargo run --release -p spikebit --example mapping_search

use spikebit::arch::{
    access_counts, count_candidates, search_mappings, sim::simulate_dense_counts,
    validate_mapping, ArchitectureSpec, Dim, Mapping, Objective, Storage, Workload, ALL_DIMS,
};
use spikebit::sparse::{FormatParams, SparseFormat};

fn main() {
    // a conv layer: 4 -> 6 channels, 3x3 kernel, 6x6 outputs, 8 timesteps
    let workload = Workload {
        t: 8,
        m: 6,
        c: 4,
        p: 6,
        q: 6,
        r: 3,
        s: 3,
        stride: 1,
        weight_bits: 2,
        weight_density: 0.3,
        input_density: 0.15,
        output_density: 0.1,
        weight_storage: Storage::Sparse(SparseFormat::Rle),
        input_storage: Storage::Sparse(SparseFormat::Rle),
        output_storage: Storage::Sparse(SparseFormat::Rle),
        rle: FormatParams::default(),
    };
    let arch = ArchitectureSpec::default();

    // a deliberately broken mapping: T tiled into the PE level
    let mut broken = Mapping::untiled(&workload);
    broken.dram.set(Dim::T, 1);
    broken.pe.set(Dim::T, 8);
    broken.order_dram = vec![];
    broken.order_pe.insert(0, Dim::T);
    println!("violations of a time-tiled mapping:");
    for v in validate_mapping(&workload, &arch, &broken) {
        println!("  - {v}");
    }

    let space = count_candidates(&workload, 2_000_000);
    println!("\ncandidate space: {space} mappings");
    for objective in [Objective::Energy, Objective::Edp] {
        let result = search_mappings(&workload, &arch, 50_000, objective, 7).unwrap();
        let r = &result.report;
        println!(
            "\nbest by {} ({} candidates, exhaustive: {}):",
            objective.label(),
            result.evaluated,
            result.exhaustive
        );
        let fmt_factors = |m: &Mapping| {
            ALL_DIMS
                .iter()
                .map(|d| {
                    format!(
                        "{}:{}/{}/{}/{}",
                        d.label(),
                        m.dram.get(*d),
                        m.buf.get(*d),
                        m.spatial.factor(*d),
                        m.pe.get(*d)
                    )
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("  factors (dram/buf/spatial/pe): {}", fmt_factors(&result.mapping));
        println!(
            "  spatial: rows {:?}, cols {:?}, active PEs {}",
            result.mapping.spatial.rows,
            result.mapping.spatial.cols,
            result.mapping.active_pes()
        );
        println!(
            "  energy {:.0} (compute {:.0}, metadata {:.0}), cycles {:.0}, edp {:.0}",
            r.total_energy, r.compute_energy, r.metadata_energy, r.cycles, r.edp
        );
        for level in &r.levels {
            if level.energy > 0.0 {
                println!(
                    "    {:<10} {:>12.0} bits moved {:>14.0} energy",
                    level.level.label(),
                    level.read_bits + level.write_bits,
                    level.energy
                );
            }
        }
    }

    // the analytical dense counts agree with an explicit loop-nest walk
    let m = Mapping::untiled(&workload);
    let ana = access_counts(&workload, &arch, &m).unwrap().dense;
    let sim = simulate_dense_counts(&workload, &arch, &m, 1 << 22).unwrap();
    println!(
        "\nloop-nest simulation cross-check (untiled mapping): {}",
        if ana == sim { "exact match" } else { "MISMATCH" }
    );
}
