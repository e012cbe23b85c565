//! TOML configuration for networks, training, schemes, storage, search and
//! the architecture, with a documented schema and conservative defaults.
//!
//! Minimal file:
//!
//! ```toml
//! [network]
//! input_shape = [2, 8, 8]
//! timesteps = 6
//! classes = 4
//!
//! [[network.layers]]
//! kind = "conv2d"
//! out_channels = 4
//! kernel = [3, 3]
//!
//! [[network.layers]]
//! kind = "lif"
//! tau = 0.9
//! v_th = 1.0
//! ```
//!
//! Sections `[dataset]`, `[training]`, `[scheme]`, `[storage]`, `[search]`,
//! `[sweep]` and `[arch]` are optional; `arch_file = "arch.toml"` loads a
//! standalone architecture spec (same keys as `[arch]`) relative to the
//! config file.

use crate::arch::{ArchitectureSpec, MemLevel, Objective};
use crate::error::{Error, Result};
use crate::harness::{parse_precision, parse_storage_policy, StoragePolicy};
use crate::scheme::{QuantSettings, SchemeConfig, SchemeKind};
use crate::snn::{LayerSpec, NetworkSpec};
use crate::sparse::FormatParams;
use crate::train::{
    synthetic_poisson, BpttConfig, Dataset, SpikeMode, SurrogateConfig, SyntheticSpec,
    TrainSchedule,
};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullConfig {
    pub network: NetworkConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub arch: ArchOverrides,
    #[serde(default)]
    pub arch_file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_shape: Vec<usize>,
    pub timesteps: usize,
    pub classes: usize,
    pub layers: Vec<LayerConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerConfig {
    Conv2d {
        out_channels: usize,
        kernel: [usize; 2],
        #[serde(default = "default_stride")]
        stride: usize,
    },
    Dense {
        output: usize,
    },
    Maxpool2d {
        window: usize,
    },
    Lif {
        tau: f64,
        v_th: f64,
    },
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub samples_per_class: usize,
    pub eval_samples_per_class: usize,
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            samples_per_class: 12,
            eval_samples_per_class: 6,
            rate_lo: 0.02,
            rate_hi: 0.4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Epochs for the float pre-training pass.
    pub pretrain_epochs: usize,
    /// Epochs for scheme fine-tuning.
    pub epochs: usize,
    pub peak_lr: f64,
    pub warmup_frac: f64,
    pub batch_size: usize,
    pub momentum: f64,
    /// Surrogate sharpness.
    pub alpha: f64,
    pub seed: u64,
    /// Weight initialization seed for pre-training.
    pub init_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            pretrain_epochs: 15,
            epochs: 15,
            peak_lr: 0.08,
            warmup_frac: 0.1,
            batch_size: 16,
            momentum: 0.9,
            alpha: 2.0,
            seed: 7,
            init_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    /// none | quant_only | prune_only | cumulative | joint
    pub kind: String,
    pub omega: f64,
    /// "8b", "6b", "4b", "3b", "ternary" (or a bare bit count).
    pub precision: String,
    pub delta: f64,
    /// Optional fixed initial quantizer step per parameterized layer.
    pub scale_overrides: Vec<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            kind: "none".into(),
            omega: 0.8,
            precision: "8b".into(),
            delta: 0.1,
            scale_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    /// auto | dense | ubm | uop | cp | rle
    pub weights: String,
    pub spikes: String,
    pub rle_run_bits: u8,
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            weights: "auto".into(),
            spikes: "auto".into(),
            rle_run_bits: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: usize,
    /// energy | edp
    pub objective: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 3000,
            objective: "energy".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub schemes: Vec<String>,
    pub precisions: Vec<String>,
    pub omegas: Vec<f64>,
    pub include_float_baseline: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schemes: vec![
                "quant_only".into(),
                "prune_only".into(),
                "cumulative".into(),
                "joint".into(),
            ],
            precisions: vec![
                "8b".into(),
                "6b".into(),
                "4b".into(),
                "3b".into(),
                "ternary".into(),
            ],
            omegas: vec![0.75, 0.80, 0.85, 0.90, 0.925, 0.95, 0.975],
            include_float_baseline: true,
        }
    }
}

/// Partial overlay on [`ArchitectureSpec::default`]. Memory levels are
/// replaced whole when given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchOverrides {
    pub pe_rows: Option<u64>,
    pub pe_cols: Option<u64>,
    pub acc_energy: Option<f64>,
    pub cmp_energy: Option<f64>,
    pub clock_gating: Option<bool>,
    pub input_read_skipping: Option<bool>,
    pub vmem_bits: Option<u32>,
    pub vth_bits: Option<u32>,
    pub ops_per_cycle: Option<f64>,
    pub dram: Option<MemLevel>,
    pub buffer: Option<MemLevel>,
    pub if_spad: Option<MemLevel>,
    pub w_spad: Option<MemLevel>,
    pub vmem_spad: Option<MemLevel>,
    pub vth_reg: Option<MemLevel>,
}

impl ArchOverrides {
    pub fn apply(&self, mut arch: ArchitectureSpec) -> ArchitectureSpec {
        macro_rules! over {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { arch.$field = v; })*
            };
        }
        over!(
            pe_rows, pe_cols, acc_energy, cmp_energy, clock_gating, input_read_skipping,
            vmem_bits, vth_bits, ops_per_cycle, dram, buffer, if_spad, w_spad, vmem_spad,
            vth_reg
        );
        arch
    }
}

/// Parses a config file; returns the config and its raw bytes (hashed into
/// the run manifest).
pub fn load_config(path: &Path) -> Result<(FullConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let cfg: FullConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

/// Builds the network spec, inferring each layer's input extents from the
/// shape chain.
pub fn build_network(cfg: &NetworkConfig) -> Result<NetworkSpec> {
    let mut layers = Vec::with_capacity(cfg.layers.len());
    let mut shape = cfg.input_shape.clone();
    for lc in &cfg.layers {
        let layer = match lc {
            LayerConfig::Conv2d { out_channels, kernel, stride } => {
                if shape.len() != 3 {
                    return Err(Error::Config(format!(
                        "conv2d needs a [C, H, W] input, got {shape:?}"
                    )));
                }
                LayerSpec::Conv2d {
                    in_channels: shape[0],
                    out_channels: *out_channels,
                    kernel: (kernel[0], kernel[1]),
                    stride: *stride,
                    affine: None,
                }
            }
            LayerConfig::Dense { output } => LayerSpec::Dense {
                input: shape.iter().product(),
                output: *output,
                affine: None,
            },
            LayerConfig::Maxpool2d { window } => LayerSpec::MaxPool2d { window: *window },
            LayerConfig::Lif { tau, v_th } => LayerSpec::Lif { tau: *tau, v_th: *v_th },
        };
        shape = layer
            .output_shape(&shape)
            .map_err(|e| Error::Config(format!("layer chain: {e}")))?;
        layers.push(layer);
    }
    let net = NetworkSpec {
        layers,
        input_shape: cfg.input_shape.clone(),
        timesteps: cfg.timesteps,
        classes: cfg.classes,
    };
    net.validate()?;
    Ok(net)
}

/// Everything derived from one config file, ready for the harness.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub net: NetworkSpec,
    pub train_data: Dataset,
    pub eval_data: Dataset,
    pub pretrain_sched: TrainSchedule,
    pub finetune_sched: TrainSchedule,
    pub bptt: BpttConfig,
    pub arch: ArchitectureSpec,
    pub weight_policy: StoragePolicy,
    pub spike_policy: StoragePolicy,
    pub rle: FormatParams,
    pub search_budget: usize,
    pub objective: Objective,
    pub init_seed: u64,
}

pub fn parse_objective(s: &str) -> Result<Objective> {
    match s {
        "energy" => Ok(Objective::Energy),
        "edp" => Ok(Objective::Edp),
        other => Err(Error::Config(format!(
            "unknown objective `{other}` (want energy|edp)"
        ))),
    }
}

/// Turns a parsed config into concrete harness inputs. `config_dir` anchors
/// the optional `arch_file` path.
pub fn build_setup(cfg: &FullConfig, config_dir: &Path) -> Result<ExperimentSetup> {
    let net = build_network(&cfg.network)?;
    let ds = &cfg.dataset;
    let make_data = |per_class: usize, noise_seed: u64| -> Result<Dataset> {
        synthetic_poisson(&SyntheticSpec {
            classes: cfg.network.classes,
            samples_per_class: per_class,
            timesteps: cfg.network.timesteps,
            frame_shape: cfg.network.input_shape.clone(),
            rate_lo: ds.rate_lo,
            rate_hi: ds.rate_hi,
            seed: ds.seed,
            noise_seed,
        })
    };
    let train_data = make_data(ds.samples_per_class, ds.seed)?;
    let eval_data = make_data(ds.eval_samples_per_class, ds.seed.wrapping_add(0x5eed))?;

    let tc = &cfg.training;
    let sched = |epochs: usize| TrainSchedule {
        epochs,
        peak_lr: tc.peak_lr,
        warmup_frac: tc.warmup_frac,
        seed: tc.seed,
        batch_size: tc.batch_size,
        momentum: tc.momentum,
    };
    let bptt = BpttConfig {
        surrogate: SurrogateConfig::new(tc.alpha)?,
        mode: SpikeMode::Hard,
    };

    let mut arch = ArchitectureSpec::default();
    if let Some(file) = &cfg.arch_file {
        let path = config_dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let overrides: ArchOverrides = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        arch = overrides.apply(arch);
    }
    arch = cfg.arch.apply(arch);
    arch.validate()?;

    Ok(ExperimentSetup {
        net,
        train_data,
        eval_data,
        pretrain_sched: sched(tc.pretrain_epochs),
        finetune_sched: sched(tc.epochs),
        bptt,
        arch,
        weight_policy: parse_storage_policy(&cfg.storage.weights)?,
        spike_policy: parse_storage_policy(&cfg.storage.spikes)?,
        rle: FormatParams::new(cfg.storage.rle_run_bits)?,
        search_budget: cfg.search.budget,
        objective: parse_objective(&cfg.search.objective)?,
        init_seed: cfg.training.init_seed,
    })
}

/// The scheme named by `[scheme]`, or None for "none"/float.
pub fn scheme_from_config(cfg: &FullConfig) -> Result<Option<SchemeConfig>> {
    let mut scheme = scheme_from_parts(
        &cfg.scheme.kind,
        cfg.scheme.omega,
        &cfg.scheme.precision,
        cfg.scheme.delta,
        cfg.training.epochs,
    )?;
    if let Some(s) = scheme.as_mut() {
        if !cfg.scheme.scale_overrides.is_empty() {
            s.scale_overrides = Some(cfg.scheme.scale_overrides.clone());
        }
    }
    Ok(scheme)
}

pub fn scheme_from_parts(
    kind: &str,
    omega: f64,
    precision: &str,
    delta: f64,
    epochs: usize,
) -> Result<Option<SchemeConfig>> {
    let kind = match kind {
        "none" | "float" => return Ok(None),
        "quant_only" => SchemeKind::QuantOnly,
        "prune_only" => SchemeKind::PruneOnly,
        "cumulative" => SchemeKind::Cumulative,
        "joint" => SchemeKind::Joint,
        other => {
            return Err(Error::Config(format!(
                "unknown scheme `{other}` (want none|quant_only|prune_only|cumulative|joint)"
            )))
        }
    };
    let quant = if matches!(kind, SchemeKind::PruneOnly) {
        None
    } else {
        let p = parse_precision(precision)?
            .ok_or_else(|| Error::Config("quantizing scheme needs a precision".into()))?;
        Some(QuantSettings { precision: p, delta })
    };
    let cfg = SchemeConfig {
        kind,
        omega,
        quant,
        epochs,
        scale_overrides: None,
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

/// Expands `[sweep]` into the scheme grid: quant-only sweeps precisions,
/// prune-only sweeps sparsity targets, the mixed schemes sweep both; the
/// float baseline is prepended when enabled.
pub fn sweep_grid(cfg: &FullConfig) -> Result<Vec<Option<SchemeConfig>>> {
    let sw = &cfg.sweep;
    if sw.schemes.is_empty() {
        return Err(Error::Config("sweep has no schemes".into()));
    }
    let mut out = Vec::new();
    if sw.include_float_baseline {
        out.push(None);
    }
    for scheme in &sw.schemes {
        match scheme.as_str() {
            "quant_only" => {
                for p in &sw.precisions {
                    out.push(scheme_from_parts(
                        scheme,
                        0.0,
                        p,
                        cfg.scheme.delta,
                        cfg.training.epochs,
                    )?);
                }
            }
            "prune_only" => {
                for &omega in &sw.omegas {
                    out.push(scheme_from_parts(
                        scheme,
                        omega,
                        "8b",
                        cfg.scheme.delta,
                        cfg.training.epochs,
                    )?);
                }
            }
            "cumulative" | "joint" => {
                for p in &sw.precisions {
                    for &omega in &sw.omegas {
                        out.push(scheme_from_parts(
                            scheme,
                            omega,
                            p,
                            cfg.scheme.delta,
                            cfg.training.epochs,
                        )?);
                    }
                }
            }
            other => {
                return Err(Error::Config(format!("unknown sweep scheme `{other}`")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[network]
input_shape = [2, 8, 8]
timesteps = 6
classes = 4

[[network.layers]]
kind = "conv2d"
out_channels = 4
kernel = [3, 3]

[[network.layers]]
kind = "lif"
tau = 0.9
v_th = 1.0

[[network.layers]]
kind = "maxpool2d"
window = 2

[[network.layers]]
kind = "dense"
output = 4

[[network.layers]]
kind = "lif"
tau = 0.9
v_th = 1.0
"#;

    #[test]
    fn minimal_config_parses_and_builds() {
        let cfg: FullConfig = toml::from_str(MINIMAL).unwrap();
        let setup = build_setup(&cfg, Path::new(".")).unwrap();
        assert_eq!(setup.net.layers.len(), 5);
        assert_eq!(setup.net.weight_shapes(), vec![vec![4, 2, 3, 3], vec![4, 36]]);
        assert_eq!(setup.train_data.samples.len(), 48);
        assert!(scheme_from_config(&cfg).unwrap().is_none());
    }

    #[test]
    fn scheme_and_arch_overrides() {
        let text = format!(
            "{MINIMAL}\n[scheme]\nkind = \"joint\"\nomega = 0.8\nprecision = \"ternary\"\n\n[arch]\npe_rows = 8\nclock_gating = false\n"
        );
        let cfg: FullConfig = toml::from_str(&text).unwrap();
        let setup = build_setup(&cfg, Path::new(".")).unwrap();
        assert_eq!(setup.arch.pe_rows, 8);
        assert_eq!(setup.arch.pe_cols, 4);
        assert!(!setup.arch.clock_gating);
        let scheme = scheme_from_config(&cfg).unwrap().unwrap();
        assert_eq!(scheme.kind, SchemeKind::Joint);
        assert_eq!(
            scheme.quant.unwrap().precision,
            crate::quant::Precision::Ternary
        );
    }

    #[test]
    fn default_sweep_grid_is_bounded_superset() {
        let cfg: FullConfig = toml::from_str(MINIMAL).unwrap();
        let grid = sweep_grid(&cfg).unwrap();
        // 1 float + 5 quant + 7 prune + 2 * 35 mixed
        assert_eq!(grid.len(), 1 + 5 + 7 + 70);
        assert!(grid.len() <= 1 + 4 * 5 * 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nnot_a_key = 1\n");
        assert!(toml::from_str::<FullConfig>(&text).is_err());
    }

    #[test]
    fn inconsistent_layer_chain_rejected() {
        let bad = r#"
[network]
input_shape = [4]
timesteps = 2
classes = 4

[[network.layers]]
kind = "conv2d"
out_channels = 2
kernel = [3, 3]

[[network.layers]]
kind = "lif"
tau = 0.5
v_th = 1.0
"#;
        let cfg: FullConfig = toml::from_str(bad).unwrap();
        assert!(build_network(&cfg.network).is_err());
    }
}
