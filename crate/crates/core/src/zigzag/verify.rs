//! Schedule audits: per-helper counts, solvability and repair-set algebra.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{RepairSchedule, ZigzagCode, ZigzagLayout};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountReport {
    pub per_helper: BTreeMap<usize, usize>,
    pub expected_per_helper: usize,
    pub total: usize,
    pub expected_total: usize,
    pub pass: bool,
}

/// Compares a schedule with `t alpha / r` symbols per each of `n - t` helpers.
pub fn verify_schedule_counts(schedule: &RepairSchedule, code: &ZigzagCode) -> CountReport {
    let lay = code.layout();
    let t = schedule.failed().len();
    let expected_per_helper = t * lay.alpha() / lay.r();
    let expected_total = (lay.n() - t) * expected_per_helper;
    let per_helper = schedule.per_helper();
    let total = schedule.total_download();
    let pass = (t * lay.alpha()).is_multiple_of(lay.r())
        && per_helper.len() == lay.n() - t
        && per_helper.values().all(|&c| c == expected_per_helper)
        && total == expected_total;
    CountReport {
        per_helper,
        expected_per_helper,
        total,
        expected_total,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Deficiency {
    /// No perfect matching between equations and unknowns.
    Matching { size: usize, needed: usize },
    /// A perfect matching exists but the actual coefficients are dependent.
    Rank { rank: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Solvability {
    Solvable,
    Deficient(Deficiency),
}

/// Matching test on the equation/unknown graph, then an exact rank check.
pub fn verify_solvability(code: &ZigzagCode, schedule: &RepairSchedule) -> Solvability {
    let needed = schedule.failed().len() * code.alpha();
    let size = code.structural_matching(schedule);
    if size < needed {
        return Solvability::Deficient(Deficiency::Matching { size, needed });
    }
    let rank = code.system_rank(schedule);
    if rank < needed {
        return Solvability::Deficient(Deficiency::Rank { rank, needed });
    }
    Solvability::Solvable
}

/// Parity-`l` rows lying in the single-repair set of every node of `subset`
/// and of no other node of `failed`.
pub fn u_set(layout: &ZigzagLayout, failed: &[usize], subset: &[usize], l: usize) -> Vec<usize> {
    (0..layout.alpha())
        .filter(|&s| {
            failed
                .iter()
                .all(|&j| layout.in_repair_set(s, j, l) == subset.contains(&j))
        })
        .collect()
}
