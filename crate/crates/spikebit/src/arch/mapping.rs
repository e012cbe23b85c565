//! Workloads, loop-nest mappings and mapping validation.
//!
//! A layer is expressed as a 7-dimensional loop nest over
//! (T, M, C, P, Q, R, S): timesteps, output channels, input channels,
//! output rows/cols and kernel rows/cols. Dense layers are 1x1 convolutions.
//!
//! A mapping factorizes each dimension across four placements — DRAM-level
//! temporal loops, shared-buffer-level temporal loops, the spatial PE grid
//! (at most two dimensions), and PE-level temporal loops — plus a loop order
//! for the two outer temporal levels. Causality pins T: it may only appear
//! as the outermost DRAM loop and must never be tiled inward or mapped
//! spatially.

use crate::error::{Error, Result};
use crate::sparse::{FormatParams, SparseFormat};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    T,
    M,
    C,
    P,
    Q,
    R,
    S,
}

/// Canonical dimension order used for tie-breaking and canonical loop orders.
pub const ALL_DIMS: [Dim; 7] = [Dim::T, Dim::M, Dim::C, Dim::P, Dim::Q, Dim::R, Dim::S];

impl Dim {
    pub fn index(self) -> usize {
        match self {
            Dim::T => 0,
            Dim::M => 1,
            Dim::C => 2,
            Dim::P => 3,
            Dim::Q => 4,
            Dim::R => 5,
            Dim::S => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Dim::T => "T",
            Dim::M => "M",
            Dim::C => "C",
            Dim::P => "P",
            Dim::Q => "Q",
            Dim::R => "R",
            Dim::S => "S",
        }
    }
}

/// How a tensor is stored when it moves through the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    Dense,
    Sparse(SparseFormat),
}

impl Storage {
    pub fn label(self) -> String {
        match self {
            Storage::Dense => "dense".into(),
            Storage::Sparse(f) => f.label().into(),
        }
    }
}

/// One layer's worth of work plus its measured densities and storage choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub t: u64,
    pub m: u64,
    pub c: u64,
    pub p: u64,
    pub q: u64,
    pub r: u64,
    pub s: u64,
    pub stride: u64,
    /// Stored width of one weight word (quantized code width, or 32 for
    /// unquantized weights).
    pub weight_bits: u8,
    pub weight_density: f64,
    pub input_density: f64,
    pub output_density: f64,
    pub weight_storage: Storage,
    pub input_storage: Storage,
    pub output_storage: Storage,
    pub rle: FormatParams,
}

impl Workload {
    /// A dense layer as a 1x1 convolution.
    pub fn dense_layer(in_features: u64, out_features: u64, timesteps: u64) -> Workload {
        Workload {
            t: timesteps,
            m: out_features,
            c: in_features,
            p: 1,
            q: 1,
            r: 1,
            s: 1,
            stride: 1,
            weight_bits: 32,
            weight_density: 1.0,
            input_density: 1.0,
            output_density: 1.0,
            weight_storage: Storage::Dense,
            input_storage: Storage::Dense,
            output_storage: Storage::Dense,
            rle: FormatParams::default(),
        }
    }

    pub fn extent(&self, d: Dim) -> u64 {
        match d {
            Dim::T => self.t,
            Dim::M => self.m,
            Dim::C => self.c,
            Dim::P => self.p,
            Dim::Q => self.q,
            Dim::R => self.r,
            Dim::S => self.s,
        }
    }

    /// True when any dimension is zero: a degenerate workload with no work.
    pub fn is_empty(&self) -> bool {
        ALL_DIMS.iter().any(|d| self.extent(*d) == 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if self.weight_bits == 0 {
            return Err(Error::InvalidArgument("weight_bits must be >= 1".into()));
        }
        for (name, d) in [
            ("weight", self.weight_density),
            ("input", self.input_density),
            ("output", self.output_density),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidArgument(format!(
                    "{name} density {d} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Dense multiply-accumulate-equivalent count.
    pub fn macs(&self) -> u64 {
        self.t * self.m * self.c * self.p * self.q * self.r * self.s
    }

    pub fn neurons(&self) -> u64 {
        self.m * self.p * self.q
    }

    /// Input spatial extents implied by output extents, stride and kernel.
    pub fn input_hw(&self) -> (u64, u64) {
        (
            halo(self.p, self.r, self.stride),
            halo(self.q, self.s, self.stride),
        )
    }
}

/// Input extent covering `p` outputs of a `r`-wide kernel at `stride`.
pub(super) fn halo(p: u64, r: u64, stride: u64) -> u64 {
    if p == 0 || r == 0 {
        0
    } else {
        (p - 1) * stride + r
    }
}

/// Per-dimension tiling factors for one placement level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factors(pub [u64; 7]);

impl Factors {
    pub fn ones() -> Self {
        Factors([1; 7])
    }

    pub fn get(&self, d: Dim) -> u64 {
        self.0[d.index()]
    }

    pub fn set(&mut self, d: Dim, v: u64) {
        self.0[d.index()] = v;
    }
}

/// Spatial placement: at most one dimension across grid rows and one across
/// grid columns, each with its factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SpatialAssign {
    pub rows: Option<(Dim, u64)>,
    pub cols: Option<(Dim, u64)>,
}

impl SpatialAssign {
    pub fn factor(&self, d: Dim) -> u64 {
        let mut f = 1;
        if let Some((rd, rf)) = self.rows {
            if rd == d {
                f *= rf;
            }
        }
        if let Some((cd, cf)) = self.cols {
            if cd == d {
                f *= cf;
            }
        }
        f
    }

    pub fn active_pes(&self) -> u64 {
        self.rows.map_or(1, |(_, f)| f) * self.cols.map_or(1, |(_, f)| f)
    }
}

/// A tiled, ordered loop nest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub dram: Factors,
    pub buf: Factors,
    pub spatial: SpatialAssign,
    pub pe: Factors,
    /// Outermost-first order of the DRAM-level loops (dims with factor > 1).
    pub order_dram: Vec<Dim>,
    /// Outermost-first order of the buffer-level loops.
    pub order_buf: Vec<Dim>,
    /// Order of the PE-level loops (cannot affect counted traffic).
    pub order_pe: Vec<Dim>,
}

impl Mapping {
    /// Everything mapped to the PE level, T at DRAM: the canonical untiled
    /// single-PE mapping.
    pub fn untiled(w: &Workload) -> Mapping {
        let mut pe = Factors::ones();
        for d in ALL_DIMS.iter().skip(1) {
            pe.set(*d, w.extent(*d));
        }
        let mut dram = Factors::ones();
        dram.set(Dim::T, w.t);
        let order_dram = if w.t > 1 { vec![Dim::T] } else { vec![] };
        let order_pe = ALL_DIMS
            .iter()
            .skip(1)
            .copied()
            .filter(|d| w.extent(*d) > 1)
            .collect();
        Mapping {
            dram,
            buf: Factors::ones(),
            spatial: SpatialAssign::default(),
            pe,
            order_dram,
            order_buf: vec![],
            order_pe,
        }
    }

    pub fn total_factor(&self, d: Dim) -> u64 {
        self.dram.get(d) * self.buf.get(d) * self.spatial.factor(d) * self.pe.get(d)
    }

    /// Product of factors at or below the buffer level.
    pub fn at_or_below_buf(&self, d: Dim) -> u64 {
        self.buf.get(d) * self.spatial.factor(d) * self.pe.get(d)
    }

    pub fn active_pes(&self) -> u64 {
        self.spatial.active_pes()
    }

    /// Per-PE weight tile in words.
    pub fn pe_weight_words(&self) -> u64 {
        self.pe.get(Dim::M) * self.pe.get(Dim::C) * self.pe.get(Dim::R) * self.pe.get(Dim::S)
    }

    /// Per-PE input tile in words (1-bit spike words), halo included.
    pub fn pe_input_words(&self, w: &Workload) -> u64 {
        let h = halo(self.pe.get(Dim::P), self.pe.get(Dim::R), w.stride);
        let wd = halo(self.pe.get(Dim::Q), self.pe.get(Dim::S), w.stride);
        self.pe.get(Dim::C) * h * wd
    }

    /// Shared-buffer input tile in words.
    pub fn buf_input_words(&self, w: &Workload) -> u64 {
        let h = halo(self.at_or_below_buf(Dim::P), self.at_or_below_buf(Dim::R), w.stride);
        let wd = halo(self.at_or_below_buf(Dim::Q), self.at_or_below_buf(Dim::S), w.stride);
        self.at_or_below_buf(Dim::C) * h * wd
    }

    /// Shared-buffer output tile in words.
    pub fn buf_output_words(&self) -> u64 {
        self.at_or_below_buf(Dim::M) * self.at_or_below_buf(Dim::P) * self.at_or_below_buf(Dim::Q)
    }

    /// Per-PE membrane tile in words.
    pub fn pe_membrane_words(&self) -> u64 {
        self.pe.get(Dim::M) * self.pe.get(Dim::P) * self.pe.get(Dim::Q)
    }

    /// Per-PE share of all neurons (persistence footprint across timesteps).
    pub fn per_pe_neurons(&self, w: &Workload) -> u64 {
        (w.m / self.spatial.factor(Dim::M))
            * (w.p / self.spatial.factor(Dim::P))
            * (w.q / self.spatial.factor(Dim::Q))
    }

    /// Deterministic lexicographic encoding used for tie-breaking.
    pub fn encoding(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(40);
        for d in ALL_DIMS {
            out.push(self.dram.get(d));
        }
        for d in ALL_DIMS {
            out.push(self.buf.get(d));
        }
        for d in ALL_DIMS {
            out.push(self.pe.get(d));
        }
        let enc_spatial = |slot: Option<(Dim, u64)>| match slot {
            None => (7, 0),
            Some((d, f)) => (d.index() as u64, f),
        };
        let (rd, rf) = enc_spatial(self.spatial.rows);
        let (cd, cf) = enc_spatial(self.spatial.cols);
        out.extend_from_slice(&[rd, rf, cd, cf]);
        for d in &self.order_dram {
            out.push(d.index() as u64);
        }
        out.push(u64::MAX); // level separator
        for d in &self.order_buf {
            out.push(d.index() as u64);
        }
        out
    }
}

/// Everything a mapping can violate, as data.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TilingProduct {
        dim: Dim,
        product: u64,
        extent: u64,
    },
    Causality {
        reason: String,
    },
    SpatialFit {
        axis: &'static str,
        factor: u64,
        limit: u64,
    },
    Capacity {
        level: &'static str,
        need_bits: u64,
        capacity_bits: u64,
    },
    MalformedOrder {
        level: &'static str,
        reason: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TilingProduct { dim, product, extent } => write!(
                f,
                "tiling factors of {} multiply to {product}, extent is {extent}",
                dim.label()
            ),
            Violation::Causality { reason } => write!(f, "causality: {reason}"),
            Violation::SpatialFit { axis, factor, limit } => {
                write!(f, "spatial factor {factor} exceeds {limit} {axis}")
            }
            Violation::Capacity { level, need_bits, capacity_bits } => write!(
                f,
                "{level} tile needs {need_bits} bits, capacity is {capacity_bits}"
            ),
            Violation::MalformedOrder { level, reason } => {
                write!(f, "{level} loop order: {reason}")
            }
        }
    }
}

fn check_order(
    level: &'static str,
    order: &[Dim],
    factors: &Factors,
    out: &mut Vec<Violation>,
) {
    let mut seen = [false; 7];
    for d in order {
        if seen[d.index()] {
            out.push(Violation::MalformedOrder {
                level,
                reason: format!("{} listed twice", d.label()),
            });
        }
        seen[d.index()] = true;
        if factors.get(*d) <= 1 {
            out.push(Violation::MalformedOrder {
                level,
                reason: format!("{} has factor 1 but is ordered", d.label()),
            });
        }
    }
    for d in ALL_DIMS {
        if factors.get(d) > 1 && !seen[d.index()] {
            out.push(Violation::MalformedOrder {
                level,
                reason: format!("{} has factor {} but is not ordered", d.label(), factors.get(d)),
            });
        }
    }
}

/// Checks tiling products, loop orders, causality, spatial fit and scratchpad
/// capacities. An empty result means the mapping is valid.
pub fn validate_mapping(
    workload: &Workload,
    arch: &super::ArchitectureSpec,
    mapping: &Mapping,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for d in ALL_DIMS {
        let product = mapping.total_factor(d);
        if product != workload.extent(d) {
            out.push(Violation::TilingProduct {
                dim: d,
                product,
                extent: workload.extent(d),
            });
        }
    }
    check_order("dram", &mapping.order_dram, &mapping.dram, &mut out);
    check_order("buffer", &mapping.order_buf, &mapping.buf, &mut out);
    check_order("pe", &mapping.order_pe, &mapping.pe, &mut out);

    // causality: T untiled, outermost, never spatial
    if mapping.buf.get(Dim::T) != 1 || mapping.pe.get(Dim::T) != 1 {
        out.push(Violation::Causality {
            reason: "T tiled below the outermost level".into(),
        });
    }
    if mapping.spatial.factor(Dim::T) != 1 {
        out.push(Violation::Causality {
            reason: "T mapped spatially".into(),
        });
    }
    if workload.t > 1 {
        if mapping.dram.get(Dim::T) != workload.t {
            out.push(Violation::Causality {
                reason: "T not kept whole at the outermost level".into(),
            });
        }
        if mapping.order_dram.first() != Some(&Dim::T) {
            out.push(Violation::Causality {
                reason: "temporal loop reordered: T is not the outermost loop".into(),
            });
        }
    }

    // spatial fit
    if let Some((d, f)) = mapping.spatial.rows {
        if f > arch.pe_rows {
            out.push(Violation::SpatialFit { axis: "grid rows", factor: f, limit: arch.pe_rows });
        }
        if f <= 1 {
            out.push(Violation::MalformedOrder {
                level: "spatial",
                reason: format!("rows dim {} has factor {f}", d.label()),
            });
        }
    }
    if let Some((d, f)) = mapping.spatial.cols {
        if f > arch.pe_cols {
            out.push(Violation::SpatialFit { axis: "grid cols", factor: f, limit: arch.pe_cols });
        }
        if f <= 1 {
            out.push(Violation::MalformedOrder {
                level: "spatial",
                reason: format!("cols dim {} has factor {f}", d.label()),
            });
        }
    }
    if let (Some((rd, _)), Some((cd, _))) = (mapping.spatial.rows, mapping.spatial.cols) {
        if rd == cd {
            out.push(Violation::MalformedOrder {
                level: "spatial",
                reason: format!("{} mapped to both grid axes", rd.label()),
            });
        }
    }

    // scratchpad and buffer capacities (dense tile footprints)
    let w_need = mapping.pe_weight_words() * workload.weight_bits as u64;
    if w_need > arch.w_spad.capacity_bits {
        out.push(Violation::Capacity {
            level: "W-Spad",
            need_bits: w_need,
            capacity_bits: arch.w_spad.capacity_bits,
        });
    }
    let i_need = mapping.pe_input_words(workload); // 1-bit words
    if i_need > arch.if_spad.capacity_bits {
        out.push(Violation::Capacity {
            level: "IF-Spad",
            need_bits: i_need,
            capacity_bits: arch.if_spad.capacity_bits,
        });
    }
    let v_need = mapping.pe_membrane_words() * arch.vmem_bits as u64;
    if v_need > arch.vmem_spad.capacity_bits {
        out.push(Violation::Capacity {
            level: "Vmem-Spad",
            need_bits: v_need,
            capacity_bits: arch.vmem_spad.capacity_bits,
        });
    }
    if (arch.vth_bits as u64) > arch.vth_reg.capacity_bits {
        out.push(Violation::Capacity {
            level: "Vth-register",
            need_bits: arch.vth_bits as u64,
            capacity_bits: arch.vth_reg.capacity_bits,
        });
    }
    let buf_need = mapping.buf_input_words(workload) + mapping.buf_output_words();
    if buf_need > arch.buffer.capacity_bits {
        out.push(Violation::Capacity {
            level: "SharedActivationBuffer",
            need_bits: buf_need,
            capacity_bits: arch.buffer.capacity_bits,
        });
    }
    out
}
