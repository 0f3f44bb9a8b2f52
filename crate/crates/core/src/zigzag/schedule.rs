//! Download schedules for repairing systematic zigzag nodes.
//!
//! Every schedule with at least one surviving systematic node has the same
//! shape: all systematic helpers send the same row set `U`, and parity `l`
//! sends `U + l e_h` for any systematic helper `h`. For this to be well
//! defined `U` must be a union of cosets of the group generated by the
//! helper offsets. `U` always contains the rows implied by the single-node
//! repair sets of each failed node (stage 1); the remaining cosets
//! (stage 2) are either taken from a closed form or searched for.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ZigzagError, ZigzagLayout};
use crate::algebra::{max_matching, FlowNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairMethod {
    /// Bandwidth-optimal linear repair from all `n - t` survivors.
    Schedule,
    /// Full download of `k` survivors, decode and re-encode.
    Decode,
}

/// Symbols fetched per helper, in the helper's schedule order.
pub type Downloaded = BTreeMap<usize, Vec<u32>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairSchedule {
    failed: Vec<usize>,
    method: RepairMethod,
    downloads: BTreeMap<usize, Vec<(usize, Stage)>>,
}

impl RepairSchedule {
    pub(crate) fn new(
        failed: Vec<usize>,
        method: RepairMethod,
        downloads: BTreeMap<usize, Vec<(usize, Stage)>>,
    ) -> Self {
        let downloads = downloads
            .into_iter()
            .map(|(node, mut rows)| {
                rows.sort_unstable();
                rows.dedup_by_key(|e| e.0);
                (node, rows)
            })
            .collect();
        Self {
            failed,
            method,
            downloads,
        }
    }

    /// A hand-written linear-repair schedule for systematic failures.
    pub fn custom(failed: &[usize], downloads: BTreeMap<usize, Vec<(usize, Stage)>>) -> Self {
        let mut failed = failed.to_vec();
        failed.sort_unstable();
        Self::new(failed, RepairMethod::Schedule, downloads)
    }

    pub fn failed(&self) -> &[usize] {
        &self.failed
    }

    pub fn method(&self) -> RepairMethod {
        self.method
    }

    pub fn helpers(&self) -> Vec<usize> {
        self.downloads.keys().copied().collect()
    }

    pub fn entries(&self, node: usize) -> &[(usize, Stage)] {
        self.downloads.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn rows(&self, node: usize) -> Vec<usize> {
        self.entries(node).iter().map(|e| e.0).collect()
    }

    pub fn stage_rows(&self, node: usize, stage: Stage) -> Vec<usize> {
        self.entries(node)
            .iter()
            .filter(|e| e.1 == stage)
            .map(|e| e.0)
            .collect()
    }

    pub fn per_helper(&self) -> BTreeMap<usize, usize> {
        self.downloads
            .iter()
            .map(|(&n, rows)| (n, rows.len()))
            .collect()
    }

    pub fn total_download(&self) -> usize {
        self.downloads.values().map(Vec::len).sum()
    }

    /// Drops one downloaded row; returns whether it was present.
    pub fn remove_row(&mut self, node: usize, row: usize) -> bool {
        let Some(rows) = self.downloads.get_mut(&node) else {
            return false;
        };
        let before = rows.len();
        rows.retain(|e| e.0 != row);
        rows.len() != before
    }

    /// Picks the scheduled symbols out of full node payloads.
    pub fn gather(&self, payloads: &[Option<&[u32]>]) -> Result<Downloaded, ZigzagError> {
        let mut out = Downloaded::new();
        for (&node, rows) in &self.downloads {
            let payload = payloads
                .get(node)
                .copied()
                .flatten()
                .ok_or(ZigzagError::MissingHelper(node))?;
            out.insert(node, rows.iter().map(|e| payload[e.0]).collect());
        }
        Ok(out)
    }
}

/// Systematic helpers for a failure pattern.
pub(crate) fn systematic_helpers(layout: &ZigzagLayout, failed: &[usize]) -> Vec<usize> {
    (0..layout.k()).filter(|j| !failed.contains(j)).collect()
}

/// Rows each systematic helper sends in stage 1: row `i` such that some
/// failed node's single-repair set for some parity uses `x_{i,h}`.
pub(crate) fn stage_one_rows(layout: &ZigzagLayout, failed: &[usize]) -> Vec<bool> {
    (0..layout.alpha())
        .map(|i| failed.iter().any(|&f| layout.in_repair_set(i, f, 0)))
        .collect()
}

/// Cosets of the helper-offset group, as sorted row lists.
fn helper_cosets(layout: &ZigzagLayout, helpers: &[usize]) -> Vec<Vec<usize>> {
    let moves: Vec<Box<dyn Fn(usize) -> usize + '_>> = if helpers.contains(&0) {
        helpers
            .iter()
            .filter(|&&h| h != 0)
            .map(|&h| Box::new(move |i| layout.shift(i, h, 1)) as Box<dyn Fn(usize) -> usize>)
            .collect()
    } else {
        let h0 = helpers[0];
        helpers[1..]
            .iter()
            .map(|&h| {
                Box::new(move |i| layout.unshift(layout.shift(i, h, 1), h0, 1))
                    as Box<dyn Fn(usize) -> usize>
            })
            .collect()
    };
    let mut seen = vec![false; layout.alpha()];
    let mut cosets = Vec::new();
    for start in 0..layout.alpha() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut coset = vec![start];
        let mut idx = 0;
        while idx < coset.len() {
            let i = coset[idx];
            for mv in &moves {
                let j = mv(i);
                if !seen[j] {
                    seen[j] = true;
                    coset.push(j);
                }
            }
            idx += 1;
        }
        coset.sort_unstable();
        cosets.push(coset);
    }
    cosets
}

/// Schedule induced by a systematic row set `u` (a union of helper cosets).
fn coset_schedule(
    layout: &ZigzagLayout,
    failed: &[usize],
    u: &[bool],
    stage1: &[bool],
) -> RepairSchedule {
    let helpers = systematic_helpers(layout, failed);
    let h = helpers[0];
    let stage = |i: usize| {
        if stage1[i] {
            Stage::First
        } else {
            Stage::Second
        }
    };
    let mut downloads = BTreeMap::new();
    let rows: Vec<usize> = (0..layout.alpha()).filter(|&i| u[i]).collect();
    for &node in &helpers {
        downloads.insert(node, rows.iter().map(|&i| (i, stage(i))).collect());
    }
    for l in 0..layout.r() {
        let entries = rows
            .iter()
            .map(|&i| (layout.shift(i, h, l), stage(i)))
            .collect();
        downloads.insert(layout.k() + l, entries);
    }
    let mut failed = failed.to_vec();
    failed.sort_unstable();
    RepairSchedule::new(failed, RepairMethod::Schedule, downloads)
}

/// Closed-form stage-2 rows for patterns containing node 0.
fn closed_form_stage_two(layout: &ZigzagLayout, failed: &[usize]) -> Option<Vec<bool>> {
    if !failed.contains(&0) || systematic_helpers(layout, failed).is_empty() {
        return None;
    }
    let r = layout.r();
    let others: Vec<usize> = failed.iter().copied().filter(|&f| f != 0).collect();
    let neg = |v: usize| (r - v % r) % r;
    let rows: Vec<bool> = match others.as_slice() {
        [] => vec![false; layout.alpha()],
        &[a] => (0..layout.alpha())
            .map(|s| layout.coord_sum(s) == 1 && layout.coord(s, a) == r - 1)
            .collect(),
        &[a, b] if r >= 4 => (0..layout.alpha())
            .map(|s| {
                let (sum, ia, ib) = (layout.coord_sum(s), layout.coord(s, a), layout.coord(s, b));
                (sum == 1 && ia != 0 && ib == r - 1)
                    || (sum == 2 && ia == r - 1 && ib != 0)
                    || (sum == 1 && ia == r - 1 && ib == r - 2)
                    || (sum != 0 && ia == r - 2 && ib == r - 2)
                    || (sum == 3 % r && ia == neg(3) && ib == r - 1)
            })
            .collect(),
        _ => return None,
    };
    Some(rows)
}

/// Maximum matching size between downloaded parity equations and unknowns.
pub(crate) fn structural_matching(layout: &ZigzagLayout, schedule: &RepairSchedule) -> usize {
    let failed = schedule.failed();
    let alpha = layout.alpha();
    let mut adj = Vec::new();
    for l in 0..layout.r() {
        for s in schedule.rows(layout.k() + l) {
            adj.push(
                failed
                    .iter()
                    .enumerate()
                    .map(|(pos, &f)| pos * alpha + layout.unshift(s, f, l))
                    .collect(),
            );
        }
    }
    max_matching(&adj, failed.len() * alpha)
}

/// Lazily produces structurally sound schedules for one failure pattern,
/// the closed form first when it applies.
pub(crate) struct Candidates<'a> {
    layout: &'a ZigzagLayout,
    failed: Vec<usize>,
    stage1: Vec<bool>,
    mode: Mode,
    rng: ChaCha8Rng,
    emitted_closed_form: bool,
    budget: usize,
}

enum Mode {
    Cosets { free: Vec<Vec<usize>>, need: usize },
    Flow,
}

impl<'a> Candidates<'a> {
    pub(crate) fn new(
        layout: &'a ZigzagLayout,
        failed: &[usize],
        seed: u64,
    ) -> Result<Self, ZigzagError> {
        let mut failed = failed.to_vec();
        failed.sort_unstable();
        let t = failed.len();
        let alpha = layout.alpha();
        let per_helper = t * alpha / layout.r();
        let stage1 = stage_one_rows(layout, &failed);
        let helpers = systematic_helpers(layout, &failed);
        let (mode, budget) = if helpers.is_empty() {
            (Mode::Flow, 64)
        } else {
            let cosets = helper_cosets(layout, &helpers);
            let size = cosets[0].len();
            let have = stage1.iter().filter(|&&b| b).count();
            let free: Vec<Vec<usize>> = cosets
                .into_iter()
                .filter(|c| c.iter().all(|&i| !stage1[i]))
                .collect();
            if have > per_helper || !(per_helper - have).is_multiple_of(size) {
                return Err(ZigzagError::UnsupportedPattern(format!(
                    "stage-1 rows do not fit for failed set {failed:?}"
                )));
            }
            (
                Mode::Cosets {
                    free,
                    need: (per_helper - have) / size,
                },
                4096,
            )
        };
        let mix = failed.iter().fold(seed, |acc, &f| {
            acc.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(f as u64 + 1)
        });
        Ok(Self {
            layout,
            failed,
            stage1,
            mode,
            rng: ChaCha8Rng::seed_from_u64(mix),
            emitted_closed_form: false,
            budget,
        })
    }

    fn sound(&self, s: &RepairSchedule) -> bool {
        structural_matching(self.layout, s) == self.failed.len() * self.layout.alpha()
    }

    fn next_coset(&mut self) -> Option<RepairSchedule> {
        let Mode::Cosets { free, need } = &self.mode else {
            unreachable!()
        };
        let (need, total) = (*need, free.len());
        if !self.emitted_closed_form {
            self.emitted_closed_form = true;
            if let Some(extra) = closed_form_stage_two(self.layout, &self.failed) {
                let u: Vec<bool> = self
                    .stage1
                    .iter()
                    .zip(&extra)
                    .map(|(a, b)| *a || *b)
                    .collect();
                let disjoint = self.stage1.iter().zip(&extra).all(|(a, b)| !(*a && *b));
                let size_ok = u.iter().filter(|&&b| b).count()
                    == self.failed.len() * self.layout.alpha() / self.layout.r();
                if disjoint && size_ok {
                    let s = coset_schedule(self.layout, &self.failed, &u, &self.stage1);
                    if self.sound(&s) {
                        return Some(s);
                    }
                }
            }
            if need == 0 || need == total {
                // Only one choice exists.
                self.budget = 0;
                let u = if need == 0 {
                    self.stage1.clone()
                } else {
                    vec![true; self.layout.alpha()]
                };
                let s = coset_schedule(self.layout, &self.failed, &u, &self.stage1);
                return self.sound(&s).then_some(s);
            }
        }
        while self.budget > 0 {
            self.budget -= 1;
            let Mode::Cosets { free, .. } = &self.mode else {
                unreachable!()
            };
            let mut u = self.stage1.clone();
            for idx in rand::seq::index::sample(&mut self.rng, total, need) {
                for &i in &free[idx] {
                    u[i] = true;
                }
            }
            let s = coset_schedule(self.layout, &self.failed, &u, &self.stage1);
            if self.sound(&s) {
                return Some(s);
            }
        }
        None
    }

    /// Max-flow selection of parity rows when no systematic node survives.
    /// Later candidates shuffle the edge order to reach other matchings.
    fn next_flow(&mut self) -> Option<RepairSchedule> {
        let per_helper = self.failed.len() * self.layout.alpha() / self.layout.r();
        while self.budget > 0 {
            self.budget -= 1;
            let shuffle = self.emitted_closed_form;
            self.emitted_closed_form = true;
            let found = self
                .flow_once(per_helper, true, shuffle)
                .or_else(|| self.flow_once(per_helper, false, shuffle));
            if found.is_none() {
                // The flow value does not depend on edge order.
                self.budget = 0;
            }
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn flow_once(
        &mut self,
        per_helper: usize,
        forced: bool,
        shuffle: bool,
    ) -> Option<RepairSchedule> {
        let lay = self.layout;
        let (r, k, alpha) = (lay.r(), lay.k(), lay.alpha());
        let t = self.failed.len();
        let in_stage1 =
            |l: usize, s: usize| self.failed.iter().any(|&f| lay.in_repair_set(s, f, l));
        // Nodes: 0 source, 1 sink, parities, equations, unknowns.
        let par = |l: usize| 2 + l;
        let eq = |l: usize, s: usize| 2 + r + l * alpha + s;
        let unk = |pos: usize, i: usize| 2 + r + r * alpha + pos * alpha + i;
        let mut net = FlowNetwork::new(2 + r + r * alpha + t * alpha);
        let mut order: Vec<(usize, usize)> = (0..r)
            .flat_map(|l| (0..alpha).map(move |s| (l, s)))
            .collect();
        if shuffle {
            order.shuffle(&mut self.rng);
        }
        let mut fixed = vec![0usize; r];
        if forced {
            for &(l, s) in &order {
                if in_stage1(l, s) {
                    fixed[l] += 1;
                }
            }
            if fixed.iter().any(|&c| c > per_helper) {
                return None;
            }
        }
        for (l, &c) in fixed.iter().enumerate() {
            net.add_edge(0, par(l), (per_helper - c) as u64);
        }
        let mut eq_in = Vec::with_capacity(order.len());
        for &(l, s) in &order {
            let id = if forced && in_stage1(l, s) {
                net.add_edge(0, eq(l, s), 1)
            } else {
                net.add_edge(par(l), eq(l, s), 1)
            };
            eq_in.push(id);
            for (pos, &f) in self.failed.iter().enumerate() {
                net.add_edge(eq(l, s), unk(pos, lay.unshift(s, f, l)), 1);
            }
        }
        for pos in 0..t {
            for i in 0..alpha {
                net.add_edge(unk(pos, i), 1, 1);
            }
        }
        if net.max_flow(0, 1) != (t * alpha) as u64 {
            return None;
        }
        let mut downloads: BTreeMap<usize, Vec<(usize, Stage)>> = BTreeMap::new();
        for (&(l, s), &id) in order.iter().zip(&eq_in) {
            if net.flow(id) == 1 {
                let stage = if in_stage1(l, s) {
                    Stage::First
                } else {
                    Stage::Second
                };
                downloads.entry(k + l).or_default().push((s, stage));
            }
        }
        Some(RepairSchedule::new(
            self.failed.clone(),
            RepairMethod::Schedule,
            downloads,
        ))
    }
}

impl Iterator for Candidates<'_> {
    type Item = RepairSchedule;

    fn next(&mut self) -> Option<RepairSchedule> {
        match self.mode {
            Mode::Cosets { .. } => self.next_coset(),
            Mode::Flow => self.next_flow(),
        }
    }
}

/// All-rows download from `k` survivors for decode-and-re-encode repair.
pub(crate) fn decode_schedule(
    layout: &ZigzagLayout,
    failed: &[usize],
) -> Result<RepairSchedule, ZigzagError> {
    let mut failed = failed.to_vec();
    failed.sort_unstable();
    failed.dedup();
    let survivors: Vec<usize> = (0..layout.n())
        .filter(|v| !failed.contains(v))
        .take(layout.k())
        .collect();
    if survivors.len() < layout.k() {
        return Err(ZigzagError::UnsupportedPattern(format!(
            "{} failures leave fewer than k = {} survivors",
            failed.len(),
            layout.k()
        )));
    }
    let downloads = survivors
        .into_iter()
        .map(|v| (v, (0..layout.alpha()).map(|i| (i, Stage::First)).collect()))
        .collect();
    Ok(RepairSchedule::new(failed, RepairMethod::Decode, downloads))
}
