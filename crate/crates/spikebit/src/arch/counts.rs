//! Analytical per-level access counting.
//!
//! Counting semantics (shared with the loop-nest simulator in [`super::sim`],
//! which derives them operationally):
//!
//! * A tensor tile is refetched into a level whenever any loop index it
//!   depends on changes across the loops outside that level. For nested
//!   loops this count is the trip product of every loop from the outermost
//!   down to the innermost *relevant* loop, after dropping trip-1 loops.
//! * Parent-level reads are deduplicated across the PE grid (multicast /
//!   diagonal sharing): one read per distinct needed tile per refetch round.
//!   Child-level writes happen once per fetching PE.
//! * Weights move DRAM -> W-Spad (the shared buffer holds activations only).
//!   Input spikes move DRAM -> buffer -> IF-Spad. Output spikes move
//!   PE -> buffer -> DRAM, once per neuron per timestep.
//! * Membrane state costs one read + one write per neuron per timestep at
//!   the Vmem-Spad, spilling the same traffic upward when the per-PE share
//!   of all neurons does not fit (buffer first, then DRAM).
//! * Compute: accumulate ops are the dense MAC-equivalents, scaled by the
//!   input-spike density when input-read skipping is on (which also scales
//!   PE weight reads); CMP fires once per neuron per timestep and reads the
//!   Vth register each time.

use super::mapping::{Dim, Mapping, Storage, Workload};
use super::{ArchitectureSpec, Level};
use crate::error::{Error, Result};
use crate::sparse::{ceil_log2, expected_rle_entries, SparseFormat};
use std::collections::BTreeMap;

/// Exact dense word counts per level and tensor; the quantity the loop-nest
/// simulation oracle reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DenseCounts {
    pub dram_w_reads: u64,
    pub wspad_writes: u64,
    pub wspad_reads: u64,
    pub dram_i_reads: u64,
    pub buf_i_writes: u64,
    pub buf_i_reads: u64,
    pub ifspad_writes: u64,
    pub ifspad_reads: u64,
    pub buf_o_writes: u64,
    pub buf_o_reads: u64,
    pub dram_o_writes: u64,
    pub vmem_reads: u64,
    pub vmem_writes: u64,
    pub buf_v_reads: u64,
    pub buf_v_writes: u64,
    pub dram_v_reads: u64,
    pub dram_v_writes: u64,
    pub vth_reads: u64,
    pub vth_writes: u64,
    pub acc_ops: u64,
    pub cmp_ops: u64,
    pub active_pes: u64,
}

/// Trip product of all loops from the outermost down to the innermost
/// relevant loop, ignoring trip-1 loops; 1 when no relevant loop exists.
pub(super) fn fetch_multiplier(loops: &[(Dim, u64)], relevant: impl Fn(Dim) -> bool) -> u64 {
    let active: Vec<(Dim, u64)> = loops.iter().copied().filter(|(_, n)| *n > 1).collect();
    match active.iter().rposition(|(d, _)| relevant(*d)) {
        None => 1,
        Some(i) => active[..=i].iter().map(|(_, n)| *n).product(),
    }
}

fn level_loops(order: &[Dim], factors: &super::mapping::Factors) -> Vec<(Dim, u64)> {
    order.iter().map(|d| (*d, factors.get(*d))).collect()
}

const W_DIMS: [Dim; 4] = [Dim::M, Dim::C, Dim::R, Dim::S];
const I_DIMS: [Dim; 6] = [Dim::T, Dim::C, Dim::P, Dim::Q, Dim::R, Dim::S];

fn w_relevant(d: Dim) -> bool {
    W_DIMS.contains(&d)
}

fn i_relevant(d: Dim) -> bool {
    I_DIMS.contains(&d)
}

/// Distinct weight tiles across the grid: spatial factors of weight dims.
pub(super) fn distinct_weight_tiles(m: &Mapping) -> u64 {
    W_DIMS.iter().map(|d| m.spatial.factor(*d)).product()
}

/// Distinct per-PE input-block origins across the grid. Diagonal sharing of
/// inputs emerges here: when output rows and kernel rows are the two spatial
/// dimensions their block origins coincide along anti-diagonals.
pub(super) fn distinct_input_tiles(workload: &Workload, m: &Mapping) -> u64 {
    let rows = m.spatial.rows.map_or((None, 1), |(d, f)| (Some(d), f));
    let cols = m.spatial.cols.map_or((None, 1), |(d, f)| (Some(d), f));
    let mut origins = std::collections::BTreeSet::new();
    for ri in 0..rows.1 {
        for ci in 0..cols.1 {
            let idx = |d: Dim| -> u64 {
                let mut v = 0;
                if rows.0 == Some(d) {
                    v = ri;
                }
                if cols.0 == Some(d) {
                    v = ci;
                }
                v
            };
            let c0 = idx(Dim::C) * m.pe.get(Dim::C);
            let h0 = idx(Dim::P) * m.pe.get(Dim::P) * workload.stride
                + idx(Dim::R) * m.pe.get(Dim::R);
            let w0 = idx(Dim::Q) * m.pe.get(Dim::Q) * workload.stride
                + idx(Dim::S) * m.pe.get(Dim::S);
            origins.insert((c0, h0, w0));
        }
    }
    origins.len() as u64
}

/// Closed-form dense counts for a valid mapping.
pub fn analytical_dense_counts(
    workload: &Workload,
    arch: &ArchitectureSpec,
    m: &Mapping,
) -> DenseCounts {
    let outer: Vec<(Dim, u64)> = level_loops(&m.order_dram, &m.dram)
        .into_iter()
        .chain(level_loops(&m.order_buf, &m.buf))
        .collect();
    let dram_loops = level_loops(&m.order_dram, &m.dram);

    let active_pes = m.active_pes();
    let macs = workload.macs();
    let neurons_t = workload.neurons() * workload.t;

    // weights: DRAM -> W-Spad
    let n_w = fetch_multiplier(&outer, w_relevant);
    let w_tile = m.pe_weight_words();
    let dram_w_reads = n_w * distinct_weight_tiles(m) * w_tile;
    let wspad_writes = n_w * active_pes * w_tile;

    // inputs: DRAM -> buffer -> IF-Spad
    let n_i_buf = fetch_multiplier(&dram_loops, i_relevant);
    let buf_i_tile = m.buf_input_words(workload);
    let dram_i_reads = n_i_buf * buf_i_tile;
    let buf_i_writes = dram_i_reads;
    let n_i_pe = fetch_multiplier(&outer, i_relevant);
    let pe_i_tile = m.pe_input_words(workload);
    let buf_i_reads = n_i_pe * distinct_input_tiles(workload, m) * pe_i_tile;
    let ifspad_writes = n_i_pe * active_pes * pe_i_tile;

    // membrane residency and spill
    let per_pe_neuron_bits = m.per_pe_neurons(workload) * arch.vmem_bits as u64;
    let spill_to_buf = per_pe_neuron_bits > arch.vmem_spad.capacity_bits;
    let all_neuron_bits = workload.neurons() * arch.vmem_bits as u64;
    let spill_to_dram = spill_to_buf && all_neuron_bits > arch.buffer.capacity_bits;

    DenseCounts {
        dram_w_reads,
        wspad_writes,
        wspad_reads: macs,
        dram_i_reads,
        buf_i_writes,
        buf_i_reads,
        ifspad_writes,
        ifspad_reads: macs,
        buf_o_writes: neurons_t,
        buf_o_reads: neurons_t,
        dram_o_writes: neurons_t,
        vmem_reads: neurons_t,
        vmem_writes: neurons_t,
        buf_v_reads: if spill_to_buf { neurons_t } else { 0 },
        buf_v_writes: if spill_to_buf { neurons_t } else { 0 },
        dram_v_reads: if spill_to_dram { neurons_t } else { 0 },
        dram_v_writes: if spill_to_dram { neurons_t } else { 0 },
        vth_reads: neurons_t,
        vth_writes: active_pes,
        acc_ops: macs,
        cmp_ops: neurons_t,
        active_pes,
    }
}

/// Expected (payload, metadata) bits when a block of `words` elements with
/// the given density moves in the chosen storage.
pub(super) fn block_bits(
    storage: Storage,
    words: f64,
    density: f64,
    value_bits: u8,
    workload: &Workload,
) -> (f64, f64) {
    let vb = value_bits as f64;
    match storage {
        Storage::Dense => (words * vb, 0.0),
        Storage::Sparse(f) => {
            let n = words.round().max(0.0) as usize;
            match f {
                SparseFormat::Ubm => (density * words * vb, words),
                SparseFormat::Cp => {
                    let iw = ceil_log2(n) as f64;
                    (density * words * vb, density * words * iw)
                }
                SparseFormat::Uop => (words * vb, 2.0 * ceil_log2(n + 1) as f64),
                SparseFormat::Rle => {
                    let entries = expected_rle_entries(n, density, &workload.rle);
                    (entries * vb, entries * workload.rle.rle_run_bits as f64)
                }
            }
        }
    }
}

/// Payload and metadata traffic for one level, in bits (expected values when
/// a density model is in play).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Traffic {
    pub read_bits: f64,
    pub write_bits: f64,
}

impl Traffic {
    fn add_read(&mut self, bits: f64) {
        self.read_bits += bits;
    }
    fn add_write(&mut self, bits: f64) {
        self.write_bits += bits;
    }
    pub fn total_bits(&self) -> f64 {
        self.read_bits + self.write_bits
    }
}

/// Sparsity-aware per-level access counts for a workload under a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessCounts {
    /// Payload traffic per level.
    pub levels: BTreeMap<Level, Traffic>,
    /// Sparse-format metadata traffic per level (separate line item).
    pub metadata: BTreeMap<Level, Traffic>,
    /// Dense MAC-equivalents.
    pub acc_ops_dense: u64,
    /// Issued accumulate ops (input-read skipping applied).
    pub acc_ops: f64,
    pub cmp_ops: u64,
    pub active_pes: u64,
    pub dense: DenseCounts,
}

impl AccessCounts {
    pub fn metadata_bits(&self) -> f64 {
        self.metadata.values().map(|t| t.total_bits()).sum()
    }
}

/// Analytical access counts with density and storage scaling applied.
pub fn access_counts(
    workload: &Workload,
    arch: &ArchitectureSpec,
    mapping: &Mapping,
) -> Result<AccessCounts> {
    workload.validate()?;
    if workload.is_empty() {
        // degenerate workload: nothing moves, nothing computes
        let mut levels = BTreeMap::new();
        let mut metadata = BTreeMap::new();
        for level in Level::ALL {
            levels.insert(level, Traffic::default());
            metadata.insert(level, Traffic::default());
        }
        return Ok(AccessCounts {
            levels,
            metadata,
            acc_ops_dense: 0,
            acc_ops: 0.0,
            cmp_ops: 0,
            active_pes: mapping.active_pes(),
            dense: DenseCounts::default(),
        });
    }
    let violations = super::mapping::validate_mapping(workload, arch, mapping);
    if !violations.is_empty() {
        return Err(Error::InvalidMapping(
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let dense = analytical_dense_counts(workload, arch, mapping);
    let mut levels: BTreeMap<Level, Traffic> = BTreeMap::new();
    let mut metadata: BTreeMap<Level, Traffic> = BTreeMap::new();
    for level in Level::ALL {
        levels.insert(level, Traffic::default());
        metadata.insert(level, Traffic::default());
    }

    let wb = workload.weight_bits;
    let d_w = workload.weight_density;
    let d_in = workload.input_density;
    let d_out = workload.output_density;

    // weights: per-fetch block is the per-PE tile
    let w_tile = mapping.pe_weight_words() as f64;
    let w_rounds_read = (dense.dram_w_reads as f64) / w_tile.max(1.0);
    let w_rounds_write = (dense.wspad_writes as f64) / w_tile.max(1.0);
    let (w_pay, w_meta) = block_bits(workload.weight_storage, w_tile, d_w, wb, workload);
    levels.get_mut(&Level::Dram).unwrap().add_read(w_rounds_read * w_pay);
    metadata.get_mut(&Level::Dram).unwrap().add_read(w_rounds_read * w_meta);
    levels.get_mut(&Level::WSpad).unwrap().add_write(w_rounds_write * w_pay);
    metadata.get_mut(&Level::WSpad).unwrap().add_write(w_rounds_write * w_meta);

    // compute-side weight reads: decoded words, scaled by input density
    // under input-read skipping
    let irs = if arch.input_read_skipping { d_in } else { 1.0 };
    let acc_ops = dense.acc_ops as f64 * irs;
    levels
        .get_mut(&Level::WSpad)
        .unwrap()
        .add_read(acc_ops * wb as f64);

    // inputs
    let buf_tile = mapping.buf_input_words(workload) as f64;
    let i_rounds_dram = (dense.dram_i_reads as f64) / buf_tile.max(1.0);
    let (ib_pay, ib_meta) = block_bits(workload.input_storage, buf_tile, d_in, 1, workload);
    levels.get_mut(&Level::Dram).unwrap().add_read(i_rounds_dram * ib_pay);
    metadata.get_mut(&Level::Dram).unwrap().add_read(i_rounds_dram * ib_meta);
    levels.get_mut(&Level::Buffer).unwrap().add_write(i_rounds_dram * ib_pay);
    metadata.get_mut(&Level::Buffer).unwrap().add_write(i_rounds_dram * ib_meta);

    let pe_i_tile = mapping.pe_input_words(workload) as f64;
    let i_rounds_read = (dense.buf_i_reads as f64) / pe_i_tile.max(1.0);
    let i_rounds_write = (dense.ifspad_writes as f64) / pe_i_tile.max(1.0);
    let (ip_pay, ip_meta) = block_bits(workload.input_storage, pe_i_tile, d_in, 1, workload);
    levels.get_mut(&Level::Buffer).unwrap().add_read(i_rounds_read * ip_pay);
    metadata.get_mut(&Level::Buffer).unwrap().add_read(i_rounds_read * ip_meta);
    levels.get_mut(&Level::IfSpad).unwrap().add_write(i_rounds_write * ip_pay);
    metadata.get_mut(&Level::IfSpad).unwrap().add_write(i_rounds_write * ip_meta);

    // compute-side input reads: one decoded bit per dense MAC position
    levels
        .get_mut(&Level::IfSpad)
        .unwrap()
        .add_read(dense.ifspad_reads as f64);

    // outputs: one frame of neurons per timestep
    let o_frame = workload.neurons() as f64;
    let (o_pay, o_meta) = block_bits(workload.output_storage, o_frame, d_out, 1, workload);
    let t = workload.t as f64;
    levels.get_mut(&Level::Buffer).unwrap().add_write(t * o_pay);
    metadata.get_mut(&Level::Buffer).unwrap().add_write(t * o_meta);
    levels.get_mut(&Level::Buffer).unwrap().add_read(t * o_pay);
    metadata.get_mut(&Level::Buffer).unwrap().add_read(t * o_meta);
    levels.get_mut(&Level::Dram).unwrap().add_write(t * o_pay);
    metadata.get_mut(&Level::Dram).unwrap().add_write(t * o_meta);

    // membrane state (always dense words)
    let vb = arch.vmem_bits as f64;
    let lv = levels.get_mut(&Level::VmemSpad).unwrap();
    lv.add_read(dense.vmem_reads as f64 * vb);
    lv.add_write(dense.vmem_writes as f64 * vb);
    let lb = levels.get_mut(&Level::Buffer).unwrap();
    lb.add_read(dense.buf_v_reads as f64 * vb);
    lb.add_write(dense.buf_v_writes as f64 * vb);
    let ld = levels.get_mut(&Level::Dram).unwrap();
    ld.add_read(dense.dram_v_reads as f64 * vb);
    ld.add_write(dense.dram_v_writes as f64 * vb);

    // threshold register
    let tb = arch.vth_bits as f64;
    let lt = levels.get_mut(&Level::VthReg).unwrap();
    lt.add_read(dense.vth_reads as f64 * tb);
    lt.add_write(dense.vth_writes as f64 * tb);

    Ok(AccessCounts {
        levels,
        metadata,
        acc_ops_dense: dense.acc_ops,
        acc_ops,
        cmp_ops: dense.cmp_ops,
        active_pes: dense.active_pes,
        dense,
    })
}
