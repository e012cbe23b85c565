//! Thin CLI over the spikebit library: file-driven training, compression,
//! cost estimation, sweeps and reports. All heavy lifting lives in the
//! library; see the crate examples for the programmatic interface.

use clap::{Parser, Subcommand, ValueEnum};
use spikebit::arch::Objective;
use spikebit::config::{build_setup, load_config, scheme_from_config, sweep_grid};
use spikebit::error::{Error, Result};
use spikebit::harness::{
    self, parse_points_csv, parse_storage_policy, pretrain_float, run_point, Manifest,
    PointRecord, RunConfig,
};
use spikebit::quant::quantize_codes;
use spikebit::sparse::{container, encode, SparseFormat};
use spikebit::tensor::Tensor;
use spikebit::train::trace_to_csv;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "spikebit",
    version,
    about = "Spiking network compression lab: train, compress, estimate, sweep, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the training seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Mapping-search objective.
    #[arg(long, global = true, value_enum)]
    objective: Option<ObjectiveArg>,

    /// Weight storage: auto|dense|ubm|uop|cp|rle.
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Energy,
    Edp,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Energy => Objective::Energy,
            ObjectiveArg::Edp => Objective::Edp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pre-trains the float model and writes weights + accuracy trace.
    Train,
    /// Fine-tunes under the configured scheme; writes compressed weights,
    /// per-layer encodings and the accuracy trace.
    Compress,
    /// Costs a trained model on the architecture (mapping search + energy).
    Estimate {
        /// Weights file (defaults to <out>/weights_compressed.json, falling
        /// back to <out>/weights.json).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Stored weight word width in bits.
        #[arg(long)]
        weight_bits: Option<u8>,
    },
    /// Runs the configured scheme grid end to end and writes all reports.
    Sweep,
    /// Recomputes the Pareto frontier of an existing points.csv.
    Pareto {
        #[arg(long)]
        points: PathBuf,
    },
    /// Re-emits all report files from a saved records.json.
    Report {
        #[arg(long)]
        points: PathBuf,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            eprintln!("  caused by: {s}");
            source = s.source();
        }
        std::process::exit(1);
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

struct Loaded {
    setup: spikebit::config::ExperimentSetup,
    scheme: Option<spikebit::scheme::SchemeConfig>,
    raw: String,
}

fn load(cli: &Cli) -> Result<Loaded> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let (cfg, raw) = load_config(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut setup = build_setup(&cfg, dir)?;
    if let Some(seed) = cli.seed {
        setup.pretrain_sched.seed = seed;
        setup.finetune_sched.seed = seed;
    }
    if let Some(obj) = cli.objective {
        setup.objective = obj.into();
    }
    if let Some(fmt) = &cli.format {
        setup.weight_policy = parse_storage_policy(fmt)?;
    }
    let scheme = scheme_from_config(&cfg)?;
    Ok(Loaded { setup, scheme, raw })
}

fn to_run_config(
    loaded: &Loaded,
    scheme: Option<spikebit::scheme::SchemeConfig>,
    init: Vec<Tensor>,
) -> RunConfig {
    let s = &loaded.setup;
    RunConfig {
        net: s.net.clone(),
        train_data: s.train_data.clone(),
        eval_data: s.eval_data.clone(),
        sched: s.finetune_sched.clone(),
        bptt: s.bptt,
        scheme,
        init_weights: init,
        arch: s.arch.clone(),
        weight_policy: s.weight_policy,
        spike_policy: s.spike_policy,
        rle: s.rle,
        search_budget: s.search_budget,
        objective: s.objective,
        weight_bits_override: None,
    }
}

fn pretrained(loaded: &Loaded, out: &Path) -> Result<Vec<Tensor>> {
    let path = out.join("weights.json");
    if path.exists() {
        return read_json(&path);
    }
    let s = &loaded.setup;
    pretrain_float(&s.net, &s.train_data, &s.pretrain_sched, &s.bptt, s.init_seed)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train => {
            let loaded = load(&cli)?;
            ensure_dir(&cli.out)?;
            let s = &loaded.setup;
            let init = s.net.init_weights(s.init_seed)?;
            let out = spikebit::train::train(
                &s.net,
                &init,
                &s.train_data,
                &s.pretrain_sched,
                &s.bptt,
                &mut spikebit::train::NoHook,
            )
            .map_err(|e| Error::stage("train", e))?;
            write_json(&cli.out.join("weights.json"), &out.weights)?;
            std::fs::write(cli.out.join("trace.csv"), trace_to_csv(&out.trace)).map_err(|e| {
                Error::Io { path: "trace.csv".into(), source: e }
            })?;
            let last = out.trace.last().expect("trace");
            println!(
                "trained {} epochs: loss {:.4}, accuracy {:.3}",
                out.trace.len(),
                last.loss,
                last.accuracy
            );
            println!("wrote {}", cli.out.join("weights.json").display());
            Ok(())
        }
        Command::Compress => {
            let loaded = load(&cli)?;
            ensure_dir(&cli.out)?;
            let scheme = loaded
                .scheme
                .clone()
                .ok_or_else(|| Error::Config("config [scheme] is `none`; nothing to compress".into()))?;
            let init = pretrained(&loaded, &cli.out)?;
            let outcome = run_point(&to_run_config(&loaded, Some(scheme), init))?;
            write_json(
                &cli.out.join("weights_compressed.json"),
                &outcome.deployed_weights,
            )?;
            std::fs::write(cli.out.join("trace.csv"), trace_to_csv(&outcome.trace))
                .map_err(|e| Error::Io { path: "trace.csv".into(), source: e })?;
            // container files for the quantized codes
            if let Some(quant) = &outcome.quant_configs {
                let enc_dir = cli.out.join("encoded");
                ensure_dir(&enc_dir)?;
                for (i, (w, qc)) in outcome.deployed_weights.iter().zip(quant).enumerate() {
                    // deployed weights are code * s_out, so recover codes
                    let raw = Tensor::new(
                        w.shape().to_vec(),
                        w.data().iter().map(|v| v * qc.s_in / qc.s_out).collect(),
                    )?;
                    let codes = quantize_codes(&raw, qc)?;
                    let format = match outcome.workloads[i].weight_storage {
                        spikebit::arch::Storage::Sparse(f) => f,
                        spikebit::arch::Storage::Dense => SparseFormat::Uop,
                    };
                    let enc =
                        encode(&codes, format, qc.precision.value_bits(), &loaded.setup.rle)?;
                    container::write_file(&enc, &enc_dir.join(format!("layer{i}.sbe")))?;
                }
            }
            write_json(&cli.out.join("point.json"), &outcome.record)?;
            let p = &outcome.record.point;
            println!(
                "{} {} omega={}: accuracy {:.3}, sparsity {:.3}, energy {:.1}, edp {:.1}",
                p.scheme, p.precision, p.omega, p.accuracy, p.model_sparsity, p.energy, p.edp
            );
            let layer_sparsity = harness::per_layer_sparsity(&outcome.deployed_weights)?;
            for (i, (w, s)) in outcome.workloads.iter().zip(&layer_sparsity).enumerate() {
                let bits = harness::stored_bits(
                    outcome.deployed_weights[i].len(),
                    w.weight_density,
                    w.weight_bits,
                    w.weight_storage,
                    &loaded.setup.rle,
                );
                println!(
                    "  layer {i}: sparsity {:.3}, {} storage, ~{:.0} bits",
                    s,
                    w.weight_storage.label(),
                    bits
                );
            }
            Ok(())
        }
        Command::Estimate { weights, weight_bits } => {
            let loaded = load(&cli)?;
            ensure_dir(&cli.out)?;
            let weights_path = match weights {
                Some(p) => p.clone(),
                None => {
                    let compressed = cli.out.join("weights_compressed.json");
                    if compressed.exists() {
                        compressed
                    } else {
                        cli.out.join("weights.json")
                    }
                }
            };
            let deployed: Vec<Tensor> = read_json(&weights_path)?;
            let mut cfg = to_run_config(&loaded, None, deployed);
            cfg.weight_bits_override = *weight_bits;
            let outcome = run_point(&cfg)?;
            write_json(&cli.out.join("estimate.json"), &outcome.record)?;
            let manifest = Manifest::new(loaded.raw.as_bytes(), cfg.sched.seed, cfg.objective);
            harness::report(
                std::slice::from_ref(&outcome.record),
                cfg.objective,
                &manifest,
                &cli.out,
            )?;
            let r = &outcome.record.report;
            println!(
                "energy {:.1} (compute {:.1}, metadata {:.1}), cycles {:.0}, edp {:.1}",
                r.total_energy, r.compute_energy, r.metadata_energy, r.cycles, r.edp
            );
            Ok(())
        }
        Command::Sweep => {
            let loaded = load(&cli)?;
            ensure_dir(&cli.out)?;
            let path = cli.config.as_ref().unwrap();
            let (cfg, _) = load_config(path)?;
            let grid = sweep_grid(&cfg)?;
            let init = pretrained(&loaded, &cli.out)?;
            let runs: Vec<RunConfig> = grid
                .into_iter()
                .map(|scheme| to_run_config(&loaded, scheme, init.clone()))
                .collect();
            let outcome = harness::sweep(&runs)?;
            for f in &outcome.failures {
                eprintln!("point {} failed: {}", f.index, f.error);
            }
            let manifest = Manifest::new(
                loaded.raw.as_bytes(),
                loaded.setup.finetune_sched.seed,
                loaded.setup.objective,
            );
            let files = harness::report(
                &outcome.records,
                loaded.setup.objective,
                &manifest,
                &cli.out,
            )?;
            write_json(&cli.out.join("records.json"), &outcome.records)?;
            println!(
                "{} points ({} failed); wrote {} report files to {}",
                outcome.records.len(),
                outcome.failures.len(),
                files.len() + 1,
                cli.out.display()
            );
            if !outcome.failures.is_empty() {
                std::process::exit(2);
            }
            Ok(())
        }
        Command::Pareto { points } => {
            ensure_dir(&cli.out)?;
            let text = std::fs::read_to_string(points).map_err(|e| Error::Io {
                path: points.display().to_string(),
                source: e,
            })?;
            let parsed = parse_points_csv(&text)?;
            let objective = cli.objective.map_or(Objective::Energy, Into::into);
            let frontier = harness::pareto(&parsed, objective);
            let out_path = cli.out.join("pareto.csv");
            std::fs::write(&out_path, harness::points_csv(&frontier)).map_err(|e| Error::Io {
                path: out_path.display().to_string(),
                source: e,
            })?;
            println!(
                "frontier: {} of {} points ({}); wrote {}",
                frontier.len(),
                parsed.len(),
                objective.label(),
                out_path.display()
            );
            Ok(())
        }
        Command::Report { points } => {
            ensure_dir(&cli.out)?;
            let records: Vec<PointRecord> = read_json(points)?;
            let objective = cli.objective.map_or(Objective::Energy, Into::into);
            // reports derived from a records file hash that file
            let bytes = std::fs::read(points).map_err(|e| Error::Io {
                path: points.display().to_string(),
                source: e,
            })?;
            let manifest = Manifest::new(&bytes, cli.seed.unwrap_or(0), objective);
            let files = harness::report(&records, objective, &manifest, &cli.out)?;
            println!("wrote {} files to {}", files.len(), cli.out.display());
            Ok(())
        }
    }
}
