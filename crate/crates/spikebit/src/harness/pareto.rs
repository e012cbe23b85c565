//! Pareto frontier over (cost, accuracy) operating points.

use super::ExperimentPoint;
use crate::arch::Objective;

fn cost(p: &ExperimentPoint, objective: Objective) -> f64 {
    match objective {
        Objective::Energy => p.energy,
        Objective::Edp => p.edp,
    }
}

/// Non-dominated points: no other point has lower-or-equal cost and
/// higher-or-equal accuracy with at least one strict. Exact duplicates keep
/// their first occurrence; the result is ordered by ascending cost with
/// input order as the tie-break.
pub fn pareto(points: &[ExperimentPoint], objective: Objective) -> Vec<ExperimentPoint> {
    let mut frontier: Vec<(usize, &ExperimentPoint)> = Vec::new();
    'candidate: for (i, p) in points.iter().enumerate() {
        let (px, py) = (cost(p, objective), p.accuracy);
        for (j, q) in points.iter().enumerate() {
            let (qx, qy) = (cost(q, objective), q.accuracy);
            let dominates = qx <= px && qy >= py && (qx < px || qy > py);
            if dominates {
                continue 'candidate;
            }
            // duplicate: keep only the first occurrence
            if j < i && qx == px && qy == py {
                continue 'candidate;
            }
        }
        frontier.push((i, p));
    }
    frontier.sort_by(|(ia, a), (ib, b)| {
        cost(a, objective)
            .total_cmp(&cost(b, objective))
            .then(ia.cmp(ib))
    });
    frontier.into_iter().map(|(_, p)| p.clone()).collect()
}
