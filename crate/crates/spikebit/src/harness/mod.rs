//! Experiment orchestration: fine-tune under a compression scheme, measure
//! activity, pick storage formats, search mappings and aggregate energy into
//! plot-ready experiment points.

mod pareto;
mod report;

pub use pareto::pareto;
pub use report::{
    breakdown_csv, fnv1a64, parse_points_csv, points_csv, report, Manifest, CSV_SCHEMA_VERSION,
    POINTS_HEADER,
};

use crate::arch::{
    search_mappings, ArchitectureSpec, EnergyReport, Mapping, Objective, Storage, Workload,
};
use crate::error::{Error, Result};
use crate::quant::{induced_sparsity, Precision};
use crate::scheme::{scheme_hooks, SchemeConfig};
use crate::snn::{forward, ActivityStats, LayerSpec, NetworkSpec};
use crate::sparse::{best_format, expected_size_bits, FormatParams, SparseFormat};
use crate::tensor::Tensor;
use crate::train::{
    evaluate, train, BpttConfig, Dataset, NoHook, TraceRow, TrainHook, TrainSchedule,
};
use serde::{Deserialize, Serialize};

/// One operating point of the accuracy/energy trade-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub scheme: String,
    pub precision: String,
    pub omega: f64,
    pub accuracy: f64,
    /// Overall zero fraction of the deployed weights.
    pub model_sparsity: f64,
    /// Weight storage of the dominant (most weight bits) layer.
    pub format: String,
    pub energy: f64,
    pub cycles: f64,
    pub edp: f64,
}

/// A point plus its full per-component energy report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub point: ExperimentPoint,
    pub report: EnergyReport,
}

/// How to pick a tensor's storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoragePolicy {
    /// Cheapest of dense and the four sparse formats by expected bits.
    Auto,
    Fixed(Storage),
}

impl StoragePolicy {
    pub fn choose(&self, n: usize, density: f64, value_bits: u8, rle: &FormatParams) -> Storage {
        match self {
            StoragePolicy::Fixed(s) => *s,
            StoragePolicy::Auto => {
                let (fmt, bits) = best_format(density, n, value_bits, rle);
                let dense_bits = n as f64 * value_bits as f64;
                if dense_bits <= bits {
                    Storage::Dense
                } else {
                    Storage::Sparse(fmt)
                }
            }
        }
    }
}

/// Everything one experiment point needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub net: NetworkSpec,
    pub train_data: Dataset,
    pub eval_data: Dataset,
    pub sched: TrainSchedule,
    pub bptt: BpttConfig,
    /// None runs no fine-tuning: the float baseline point.
    pub scheme: Option<SchemeConfig>,
    /// Pre-trained float weights the fine-tune starts from.
    pub init_weights: Vec<Tensor>,
    pub arch: ArchitectureSpec,
    pub weight_policy: StoragePolicy,
    pub spike_policy: StoragePolicy,
    pub rle: FormatParams,
    pub search_budget: usize,
    pub objective: Objective,
    /// Stored weight width override (e.g. estimating an externally
    /// compressed model); defaults to the scheme's precision.
    pub weight_bits_override: Option<u8>,
}

impl RunConfig {
    fn scheme_label(&self) -> String {
        self.scheme
            .as_ref()
            .map_or("float".into(), |s| s.kind.label().into())
    }

    fn precision_label(&self) -> String {
        match &self.scheme {
            Some(s) => s
                .quant
                .map_or("float".into(), |q| q.precision.label()),
            None => "float".into(),
        }
    }

    fn omega(&self) -> f64 {
        self.scheme.as_ref().map_or(0.0, |s| {
            if matches!(
                s.kind,
                crate::scheme::SchemeKind::PruneOnly
                    | crate::scheme::SchemeKind::Cumulative
                    | crate::scheme::SchemeKind::Joint
            ) {
                s.omega
            } else {
                0.0
            }
        })
    }
}

/// Stored weight width for a point: quantized code width or 32-bit float.
fn deployed_weight_bits(scheme: &Option<SchemeConfig>) -> u8 {
    match scheme {
        Some(s) => s.quant.map_or(32, |q| q.precision.value_bits()),
        None => 32,
    }
}

/// Activity stats summed over a dataset (training-time sparsity).
fn dataset_stats(
    net: &NetworkSpec,
    weights: &[Tensor],
    data: &Dataset,
) -> Result<ActivityStats> {
    let mut total: Option<ActivityStats> = None;
    for (train, _) in &data.samples {
        let (_, stats) = forward(net, weights, train)?;
        total = Some(match total {
            None => stats,
            Some(mut acc) => {
                for (a, s) in acc.layers.iter_mut().zip(stats.layers.iter()) {
                    a.input_nonzeros += s.input_nonzeros;
                    a.input_elems += s.input_elems;
                    a.output_nonzeros += s.output_nonzeros;
                    a.output_elems += s.output_elems;
                }
                acc
            }
        });
    }
    total.ok_or_else(|| Error::InvalidArgument("empty dataset".into()))
}

/// Output-spike density attributed to a parameterized layer: the density of
/// the first LIF output at or after it.
fn downstream_output_density(stats: &ActivityStats, net: &NetworkSpec, layer: usize) -> f64 {
    for (i, l) in net.layers.iter().enumerate().skip(layer) {
        if matches!(l, LayerSpec::Lif { .. }) {
            return stats.layers[i].output_density();
        }
    }
    stats.layers[layer].output_density()
}

/// Builds the per-layer accelerator workloads for a deployed network.
pub fn build_workloads(
    net: &NetworkSpec,
    deployed: &[Tensor],
    stats: &ActivityStats,
    weight_bits: u8,
    weight_policy: StoragePolicy,
    spike_policy: StoragePolicy,
    rle: &FormatParams,
) -> Result<Vec<Workload>> {
    let shapes = net.shapes()?;
    let mut out = Vec::new();
    let mut w_idx = 0usize;
    for (i, layer) in net.layers.iter().enumerate() {
        let dims = match layer {
            LayerSpec::Dense { input, output, .. } => {
                (*output as u64, *input as u64, 1, 1, 1, 1, 1)
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, .. } => (
                *out_channels as u64,
                *in_channels as u64,
                kernel.0 as u64,
                kernel.1 as u64,
                shapes[i][1] as u64,
                shapes[i][2] as u64,
                *stride as u64,
            ),
            _ => continue,
        };
        let (m, c, r, s, p, q, stride) = dims;
        let weights = &deployed[w_idx];
        let la = &stats.layers[i];
        let weight_density = weights.density();
        let input_density = la.input_density();
        let output_density = downstream_output_density(stats, net, i);
        let n = weights.len();
        let weight_storage = weight_policy.choose(n, weight_density, weight_bits, rle);
        let in_words = (c * ((p - 1) * stride + r) * ((q - 1) * stride + s)) as usize;
        let input_storage = spike_policy.choose(in_words, input_density, 1, rle);
        let out_words = (m * p * q) as usize;
        let output_storage = spike_policy.choose(out_words, output_density, 1, rle);
        out.push(Workload {
            t: net.timesteps as u64,
            m,
            c,
            p,
            q,
            r,
            s,
            stride,
            weight_bits,
            weight_density,
            input_density,
            output_density,
            weight_storage,
            input_storage,
            output_storage,
            rle: *rle,
        });
        w_idx += 1;
    }
    Ok(out)
}

/// Output of one end-to-end point run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: PointRecord,
    pub trace: Vec<TraceRow>,
    pub deployed_weights: Vec<Tensor>,
    /// Learned per-layer quantizer settings, when the scheme quantized.
    pub quant_configs: Option<Vec<crate::quant::QuantConfig>>,
    pub workloads: Vec<Workload>,
    pub mappings: Vec<Mapping>,
}

/// Runs one experiment point end to end: fine-tune with the scheme's hooks,
/// measure activity, choose storage, search a mapping per layer and sum the
/// energy reports. Deterministic given the config (all seeds are explicit).
pub fn run_point(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.net.validate().map_err(|e| Error::stage("train", e))?;
    cfg.arch.validate().map_err(|e| Error::stage("estimate", e))?;

    // 1. fine-tune under the scheme (float baseline skips fine-tuning)
    let (deployed, trace, quant_configs) = match &cfg.scheme {
        Some(scheme) => {
            let mut hook = scheme_hooks(scheme).map_err(|e| Error::stage("train", e))?;
            let out = train(
                &cfg.net,
                &cfg.init_weights,
                &cfg.train_data,
                &cfg.sched,
                &cfg.bptt,
                &mut hook,
            )
            .map_err(|e| Error::stage("train", e))?;
            let deployed = hook
                .effective_weights(&out.weights)
                .map_err(|e| Error::stage("train", e))?;
            (deployed, out.trace, hook.quant_configs())
        }
        None => (cfg.init_weights.clone(), Vec::new(), None),
    };

    // 2. accuracy on held-out data
    let accuracy =
        evaluate(&cfg.net, &deployed, &cfg.eval_data).map_err(|e| Error::stage("train", e))?;

    // 3. activity statistics over the training set
    let stats = dataset_stats(&cfg.net, &deployed, &cfg.train_data)
        .map_err(|e| Error::stage("stats", e))?;

    // 4. deployed sparsity and storage choice
    let total: usize = deployed.iter().map(|w| w.len()).sum();
    let zeros: usize = deployed.iter().map(|w| w.zero_count()).sum();
    let model_sparsity = if total == 0 {
        0.0
    } else {
        zeros as f64 / total as f64
    };
    let weight_bits = cfg
        .weight_bits_override
        .unwrap_or_else(|| deployed_weight_bits(&cfg.scheme));
    let workloads = build_workloads(
        &cfg.net,
        &deployed,
        &stats,
        weight_bits,
        cfg.weight_policy,
        cfg.spike_policy,
        &cfg.rle,
    )
    .map_err(|e| Error::stage("encode", e))?;

    // dominant layer's weight storage labels the point
    let format = workloads
        .iter()
        .max_by_key(|w| w.m * w.c * w.r * w.s * weight_bits as u64)
        .map_or("dense".into(), |w| w.weight_storage.label());

    // 5. per-layer mapping search, summed
    let mut report = EnergyReport::empty();
    let mut mappings = Vec::with_capacity(workloads.len());
    for (li, w) in workloads.iter().enumerate() {
        let result = search_mappings(w, &cfg.arch, cfg.search_budget, cfg.objective, cfg.sched.seed)
            .map_err(|e| {
                Error::stage(
                    "map",
                    Error::InvalidArgument(format!("layer {li}: {e}")),
                )
            })?;
        report.accumulate(&result.report);
        mappings.push(result.mapping);
    }

    let point = ExperimentPoint {
        scheme: cfg.scheme_label(),
        precision: cfg.precision_label(),
        omega: cfg.omega(),
        accuracy,
        model_sparsity,
        format,
        energy: report.total_energy,
        cycles: report.cycles,
        edp: report.edp,
    };
    Ok(RunOutcome {
        record: PointRecord { point, report },
        trace,
        deployed_weights: deployed,
        quant_configs,
        workloads,
        mappings,
    })
}

/// A sweep failure, kept alongside the rows that did complete.
#[derive(Debug)]
pub struct SweepFailure {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub records: Vec<PointRecord>,
    pub failures: Vec<SweepFailure>,
}

/// Runs every configured point; failed points are recorded and the sweep
/// continues.
pub fn sweep(configs: &[RunConfig]) -> Result<SweepOutcome> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let mut outcome = SweepOutcome::default();
    for (index, cfg) in configs.iter().enumerate() {
        match run_point(cfg) {
            Ok(run) => outcome.records.push(run.record),
            Err(error) => outcome.failures.push(SweepFailure { index, error }),
        }
    }
    Ok(outcome)
}

/// Pre-trains the float model the fine-tuning points start from.
pub fn pretrain_float(
    net: &NetworkSpec,
    data: &Dataset,
    sched: &TrainSchedule,
    bptt: &BpttConfig,
    init_seed: u64,
) -> Result<Vec<Tensor>> {
    let init = net.init_weights(init_seed)?;
    let out = train(net, &init, data, sched, bptt, &mut NoHook)?;
    Ok(out.weights)
}

/// Expected stored size of a weight tensor in a given storage, in bits.
pub fn stored_bits(n: usize, density: f64, value_bits: u8, storage: Storage, rle: &FormatParams) -> f64 {
    match storage {
        Storage::Dense => n as f64 * value_bits as f64,
        Storage::Sparse(f) => expected_size_bits(f, n, density, value_bits, rle),
    }
}

/// Convenience: the induced sparsity of every deployed weight tensor.
pub fn per_layer_sparsity(deployed: &[Tensor]) -> Result<Vec<f64>> {
    deployed.iter().map(induced_sparsity).collect()
}

/// Storage label parser for CLI/config (`dense`, `auto`, or a format name).
pub fn parse_storage_policy(s: &str) -> Result<StoragePolicy> {
    Ok(match s {
        "auto" => StoragePolicy::Auto,
        "dense" => StoragePolicy::Fixed(Storage::Dense),
        "ubm" => StoragePolicy::Fixed(Storage::Sparse(SparseFormat::Ubm)),
        "uop" => StoragePolicy::Fixed(Storage::Sparse(SparseFormat::Uop)),
        "cp" => StoragePolicy::Fixed(Storage::Sparse(SparseFormat::Cp)),
        "rle" => StoragePolicy::Fixed(Storage::Sparse(SparseFormat::Rle)),
        other => {
            return Err(Error::Config(format!(
                "unknown storage `{other}` (want auto|dense|ubm|uop|cp|rle)"
            )))
        }
    })
}

/// Precision parser for CLI/config (`8b`, `8`, `ternary`, `float`).
pub fn parse_precision(s: &str) -> Result<Option<Precision>> {
    let t = s.trim().trim_end_matches('b');
    if s == "float" {
        return Ok(None);
    }
    if s == "ternary" {
        return Ok(Some(Precision::Ternary));
    }
    t.parse::<u8>()
        .map(|b| Some(Precision::Bits(b)))
        .map_err(|_| Error::Config(format!("unknown precision `{s}`")))
}
