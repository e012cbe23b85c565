//! Loop-interchange mapping search.
//!
//! Candidates factorize every dimension across (DRAM, buffer, spatial, PE)
//! and permute the DRAM- and buffer-level loop orders; T is pinned whole and
//! outermost by construction. The search is exhaustive when the candidate
//! space fits the budget and falls back to seeded uniform sampling
//! otherwise. Ties break on the lexicographic mapping encoding.

use super::energy::{energy, EnergyReport};
use super::latency::latency_from_counts;
use super::mapping::{validate_mapping, Dim, Factors, Mapping, SpatialAssign, Workload};
use super::{counts::access_counts, ArchitectureSpec};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Energy,
    Edp,
}

impl Objective {
    pub fn score(&self, report: &EnergyReport) -> f64 {
        match self {
            Objective::Energy => report.total_energy,
            Objective::Edp => report.edp,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Objective::Energy => "energy",
            Objective::Edp => "edp",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub mapping: Mapping,
    pub report: EnergyReport,
    /// Valid candidates evaluated.
    pub evaluated: usize,
    pub exhaustive: bool,
}

const SEARCH_DIMS: [Dim; 6] = [Dim::M, Dim::C, Dim::P, Dim::Q, Dim::R, Dim::S];

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

/// All ordered (dram, buf, spatial, pe) factor quadruples with the given
/// product.
fn factor_splits(extent: u64) -> Vec<[u64; 4]> {
    let mut out = Vec::new();
    for a in divisors(extent) {
        let rest_a = extent / a;
        for b in divisors(rest_a) {
            let rest_b = rest_a / b;
            for c in divisors(rest_b) {
                out.push([a, b, c, rest_b / c]);
            }
        }
    }
    out
}

fn permutations(items: &[Dim]) -> Vec<Vec<Dim>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &d) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, d);
            out.push(tail);
        }
    }
    out
}

fn active_dims(factors: &Factors) -> Vec<Dim> {
    super::mapping::ALL_DIMS
        .iter()
        .copied()
        .filter(|d| factors.get(*d) > 1)
        .collect()
}

fn build_candidate(
    workload: &Workload,
    splits: &[[u64; 4]; 6],
    orientation_swap: bool,
    order_dram_tail: &[Dim],
    order_buf: &[Dim],
) -> Option<Mapping> {
    let mut dram = Factors::ones();
    let mut buf = Factors::ones();
    let mut pe = Factors::ones();
    dram.set(Dim::T, workload.t);
    let mut spatial_dims: Vec<(Dim, u64)> = Vec::new();
    for (i, d) in SEARCH_DIMS.iter().enumerate() {
        let [fd, fb, fs, fp] = splits[i];
        dram.set(*d, fd);
        buf.set(*d, fb);
        pe.set(*d, fp);
        if fs > 1 {
            spatial_dims.push((*d, fs));
        }
    }
    if spatial_dims.len() > 2 {
        return None;
    }
    let spatial = match (spatial_dims.first(), spatial_dims.get(1)) {
        (None, _) => SpatialAssign::default(),
        (Some(&a), None) => {
            if orientation_swap {
                SpatialAssign { rows: None, cols: Some(a) }
            } else {
                SpatialAssign { rows: Some(a), cols: None }
            }
        }
        (Some(&a), Some(&b)) => {
            if orientation_swap {
                SpatialAssign { rows: Some(b), cols: Some(a) }
            } else {
                SpatialAssign { rows: Some(a), cols: Some(b) }
            }
        }
    };
    let mut order_dram = Vec::with_capacity(order_dram_tail.len() + 1);
    if workload.t > 1 {
        order_dram.push(Dim::T);
    }
    order_dram.extend_from_slice(order_dram_tail);
    Some(Mapping {
        dram,
        buf,
        spatial,
        pe,
        order_dram,
        order_buf: order_buf.to_vec(),
        order_pe: active_dims(&pe),
    })
}

/// Visits every candidate; stops early when `f` returns false.
fn for_each_candidate(workload: &Workload, mut f: impl FnMut(Mapping) -> bool) {
    let split_lists: Vec<Vec<[u64; 4]>> = SEARCH_DIMS
        .iter()
        .map(|d| factor_splits(workload.extent(*d)))
        .collect();
    let mut choice = [0usize; 6];
    'outer: loop {
        let splits: [[u64; 4]; 6] =
            std::array::from_fn(|i| split_lists[i][choice[i]]);
        let spatial_count = splits.iter().filter(|s| s[2] > 1).count();
        if spatial_count <= 2 {
            let orientations: &[bool] = if spatial_count == 0 { &[false] } else { &[false, true] };
            // dram/buffer loop orders over the active dims
            let mut dram_factors = Factors::ones();
            let mut buf_factors = Factors::ones();
            for (i, d) in SEARCH_DIMS.iter().enumerate() {
                dram_factors.set(*d, splits[i][0]);
                buf_factors.set(*d, splits[i][1]);
            }
            let dram_tails = permutations(&active_dims(&dram_factors));
            let buf_orders = permutations(&active_dims(&buf_factors));
            for &swap in orientations {
                for dram_tail in &dram_tails {
                    for buf_order in &buf_orders {
                        if let Some(m) =
                            build_candidate(workload, &splits, swap, dram_tail, buf_order)
                        {
                            if !f(m) {
                                return;
                            }
                        }
                    }
                }
            }
        }
        // odometer over split choices
        let mut i = 0;
        loop {
            if i == 6 {
                break 'outer;
            }
            choice[i] += 1;
            if choice[i] < split_lists[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Number of candidates, counted up to `cap + 1`.
pub fn count_candidates(workload: &Workload, cap: usize) -> usize {
    let mut n = 0usize;
    for_each_candidate(workload, |_| {
        n += 1;
        n <= cap
    });
    n
}

fn evaluate(
    workload: &Workload,
    arch: &ArchitectureSpec,
    mapping: &Mapping,
) -> Result<EnergyReport> {
    let counts = access_counts(workload, arch, mapping)?;
    let mut report = energy(&counts, arch);
    report.cycles = latency_from_counts(&counts, arch)?;
    report.edp = report.total_energy * report.cycles;
    Ok(report)
}

fn sample_candidate(workload: &Workload, split_lists: &[Vec<[u64; 4]>], rng: &mut ChaCha8Rng) -> Option<Mapping> {
    let splits: [[u64; 4]; 6] =
        std::array::from_fn(|i| split_lists[i][rng.random_range(0..split_lists[i].len())]);
    if splits.iter().filter(|s| s[2] > 1).count() > 2 {
        return None;
    }
    let mut dram_factors = Factors::ones();
    let mut buf_factors = Factors::ones();
    for (i, d) in SEARCH_DIMS.iter().enumerate() {
        dram_factors.set(*d, splits[i][0]);
        buf_factors.set(*d, splits[i][1]);
    }
    let mut dram_tail = active_dims(&dram_factors);
    dram_tail.shuffle(rng);
    let mut buf_order = active_dims(&buf_factors);
    buf_order.shuffle(rng);
    let swap = rng.random::<bool>();
    build_candidate(workload, &splits, swap, &dram_tail, &buf_order)
}

/// Draws up to `n` valid mappings via the sampling path.
pub fn sample_mappings(
    workload: &Workload,
    arch: &ArchitectureSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Mapping>> {
    workload.validate()?;
    let split_lists: Vec<Vec<[u64; 4]>> = SEARCH_DIMS
        .iter()
        .map(|d| factor_splits(workload.extent(*d)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let max_attempts = n.saturating_mul(200).max(10_000);
    let mut attempts = 0usize;
    while out.len() < n && attempts < max_attempts {
        attempts += 1;
        if let Some(m) = sample_candidate(workload, &split_lists, &mut rng) {
            if validate_mapping(workload, arch, &m).is_empty() {
                out.push(m);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoValidMapping(
            "sampling found no valid mapping (check scratchpad capacities)".into(),
        ));
    }
    Ok(out)
}

/// Searches for the best mapping by the objective.
///
/// Exhaustive when the candidate space has at most `budget` candidates,
/// otherwise evaluates `budget` seeded samples. Deterministic for a fixed
/// seed; ties break on the lexicographic mapping encoding.
pub fn search_mappings(
    workload: &Workload,
    arch: &ArchitectureSpec,
    budget: usize,
    objective: Objective,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("search budget must be >= 1".into()));
    }
    workload.validate()?;
    let space = count_candidates(workload, budget);
    let exhaustive = space <= budget;

    let mut best: Option<(f64, Vec<u64>, Mapping, EnergyReport)> = None;
    let mut evaluated = 0usize;
    let mut last_violation = String::new();
    let consider = |m: Mapping,
                        workload: &Workload,
                        arch: &ArchitectureSpec,
                        best: &mut Option<(f64, Vec<u64>, Mapping, EnergyReport)>,
                        evaluated: &mut usize,
                        last_violation: &mut String| {
        let violations = validate_mapping(workload, arch, &m);
        if !violations.is_empty() {
            *last_violation = violations[0].to_string();
            return;
        }
        let report = match evaluate(workload, arch, &m) {
            Ok(r) => r,
            Err(e) => {
                *last_violation = e.to_string();
                return;
            }
        };
        *evaluated += 1;
        let score = objective.score(&report);
        let enc = m.encoding();
        let better = match best {
            None => true,
            Some((bs, benc, _, _)) => score < *bs || (score == *bs && enc < *benc),
        };
        if better {
            *best = Some((score, enc, m, report));
        }
    };

    if exhaustive {
        for_each_candidate(workload, |m| {
            consider(m, workload, arch, &mut best, &mut evaluated, &mut last_violation);
            true
        });
    } else {
        let split_lists: Vec<Vec<[u64; 4]>> = SEARCH_DIMS
            .iter()
            .map(|d| factor_splits(workload.extent(*d)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_attempts = budget.saturating_mul(200).max(10_000);
        let mut attempts = 0usize;
        while evaluated < budget && attempts < max_attempts {
            attempts += 1;
            if let Some(m) = sample_candidate(workload, &split_lists, &mut rng) {
                consider(m, workload, arch, &mut best, &mut evaluated, &mut last_violation);
            }
        }
    }

    match best {
        Some((_, _, mapping, report)) => Ok(SearchResult {
            mapping,
            report,
            evaluated,
            exhaustive,
        }),
        None => Err(Error::NoValidMapping(if last_violation.is_empty() {
            "no candidates generated".into()
        } else {
            format!("all candidates invalid; e.g. {last_violation}")
        })),
    }
}
