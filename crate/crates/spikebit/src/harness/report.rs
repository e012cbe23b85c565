//! Plot-ready report files: points, frontier, energy breakdown, manifest.

use super::{ExperimentPoint, PointRecord};
use crate::arch::{Level, Objective};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CSV_SCHEMA_VERSION: &str = "v1";

/// 64-bit FNV-1a; stable across runs and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Run provenance written next to every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub csv_schema: String,
    pub config_hash: String,
    pub seed: u64,
    /// Energies cover all timesteps of one inference.
    pub energy_basis: String,
    pub objective: String,
}

impl Manifest {
    pub fn new(config_bytes: &[u8], seed: u64, objective: Objective) -> Manifest {
        Manifest {
            tool: "spikebit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            csv_schema: CSV_SCHEMA_VERSION.into(),
            config_hash: format!("{:016x}", fnv1a64(config_bytes)),
            seed,
            energy_basis: "per_inference".into(),
            objective: objective.label().into(),
        }
    }
}

pub const POINTS_HEADER: &str =
    "scheme,precision,omega,accuracy,model_sparsity,format,energy,cycles,edp";

pub fn points_csv(points: &[ExperimentPoint]) -> String {
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.scheme,
            p.precision,
            p.omega,
            p.accuracy,
            p.model_sparsity,
            p.format,
            p.energy,
            p.cycles,
            p.edp
        ));
    }
    out
}

pub fn breakdown_header() -> String {
    let mut cols = vec!["scheme".into(), "precision".to_string(), "omega".into()];
    for level in Level::ALL {
        cols.push(level.label().into());
    }
    cols.push("compute".into());
    cols.push("metadata".into());
    cols.push("total".into());
    cols.join(",")
}

/// One breakdown row per point; the component columns sum to the total
/// column exactly (same summation the cost model used).
pub fn breakdown_csv(records: &[PointRecord]) -> String {
    let mut out = breakdown_header();
    out.push('\n');
    for r in records {
        let mut cols = vec![
            r.point.scheme.clone(),
            r.point.precision.clone(),
            format!("{}", r.point.omega),
        ];
        for level in Level::ALL {
            let e = r.report.level(level).map_or(0.0, |l| l.energy);
            cols.push(format!("{e}"));
        }
        cols.push(format!("{}", r.report.compute_energy));
        cols.push(format!("{}", r.report.metadata_energy));
        cols.push(format!("{}", r.report.total_energy));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Emits points.csv, points.json, pareto.csv, energy_breakdown.csv and
/// manifest.json into `out_dir`; returns the written paths.
pub fn report(
    records: &[PointRecord],
    objective: Objective,
    manifest: &Manifest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let points: Vec<ExperimentPoint> = records.iter().map(|r| r.point.clone()).collect();
    let mut written = Vec::new();

    let p_csv = out_dir.join("points.csv");
    write(&p_csv, &points_csv(&points))?;
    written.push(p_csv);

    let p_json = out_dir.join("points.json");
    let json = serde_json::to_string_pretty(&points)
        .map_err(|e| Error::Parse(format!("points.json: {e}")))?;
    write(&p_json, &json)?;
    written.push(p_json);

    let frontier = super::pareto(&points, objective);
    let p_pareto = out_dir.join("pareto.csv");
    write(&p_pareto, &points_csv(&frontier))?;
    written.push(p_pareto);

    let p_breakdown = out_dir.join("energy_breakdown.csv");
    write(&p_breakdown, &breakdown_csv(records))?;
    written.push(p_breakdown);

    let p_manifest = out_dir.join("manifest.json");
    let mj = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Parse(format!("manifest.json: {e}")))?;
    write(&p_manifest, &mj)?;
    written.push(p_manifest);

    Ok(written)
}

/// Parses a points.csv produced by [`points_csv`].
pub fn parse_points_csv(text: &str) -> Result<Vec<ExperimentPoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty points csv".into()))?;
    if header != POINTS_HEADER {
        return Err(Error::Parse(format!("unexpected csv header `{header}`")));
    }
    let mut out = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse(format!(
                "line {}: expected 9 fields, got {}",
                no + 2,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", no + 2)))
        };
        out.push(ExperimentPoint {
            scheme: f[0].into(),
            precision: f[1].into(),
            omega: num(f[2])?,
            accuracy: num(f[3])?,
            model_sparsity: num(f[4])?,
            format: f[5].into(),
            energy: num(f[6])?,
            cycles: num(f[7])?,
            edp: num(f[8])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::EnergyReport;

    fn record(scheme: &str, energy: f64, accuracy: f64) -> PointRecord {
        let mut report = EnergyReport::empty();
        report.total_energy = energy;
        PointRecord {
            point: ExperimentPoint {
                scheme: scheme.into(),
                precision: "8b".into(),
                omega: 0.5,
                accuracy,
                model_sparsity: 0.25,
                format: "rle".into(),
                energy,
                cycles: 2.0,
                edp: energy * 2.0,
            },
            report,
        }
    }

    #[test]
    fn empty_reports_are_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new(b"config", 1, Objective::Energy);
        let files = report(&[], Objective::Energy, &manifest, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let csv = std::fs::read_to_string(dir.path().join("points.csv")).unwrap();
        assert_eq!(csv.trim(), POINTS_HEADER);
        let bd = std::fs::read_to_string(dir.path().join("energy_breakdown.csv")).unwrap();
        assert_eq!(bd.trim(), breakdown_header());
    }

    #[test]
    fn points_roundtrip_via_csv() {
        let recs = [record("a", 10.0, 0.9), record("b", 5.5, 0.85)];
        let points: Vec<ExperimentPoint> = recs.iter().map(|r| r.point.clone()).collect();
        let text = points_csv(&points);
        let back = parse_points_csv(&text).unwrap();
        assert_eq!(back, points);
    }

    #[test]
    fn manifest_hash_changes_iff_config_changes() {
        let a = Manifest::new(b"config-a", 1, Objective::Energy);
        let a2 = Manifest::new(b"config-a", 1, Objective::Energy);
        let b = Manifest::new(b"config-b", 1, Objective::Energy);
        assert_eq!(a.config_hash, a2.config_hash);
        assert_ne!(a.config_hash, b.config_hash);
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let recs = vec![record("a", 10.0, 0.9), record("b", 5.5, 0.85)];
        let manifest = Manifest::new(b"same", 7, Objective::Energy);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        report(&recs, Objective::Energy, &manifest, d1.path()).unwrap();
        report(&recs, Objective::Energy, &manifest, d2.path()).unwrap();
        for name in ["points.csv", "points.json", "pareto.csv", "energy_breakdown.csv"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name}");
        }
    }
}
