//! Zigzag MDS array code: construction, encoding, decoding and repair.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schedule::{
    decode_schedule, structural_matching, systematic_helpers, Candidates, Downloaded, RepairMethod,
    RepairSchedule,
};
use super::{ZigzagError, ZigzagLayout};
use crate::algebra::{Dependency, Field, Matrix};

/// What [`ZigzagCode::build_with`] checks before accepting coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub verify_mds: bool,
    pub verify_repairs: bool,
    /// Fresh coefficient draws after the first one.
    pub max_reseeds: u32,
    /// Targeted redraws allowed within one draw.
    pub max_resamples: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            verify_mds: true,
            verify_repairs: true,
            max_reseeds: 32,
            max_resamples: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZigzagCode {
    layout: ZigzagLayout,
    field: Field,
    /// `coeffs[(l * alpha + s) * k + j]` multiplies `x_{s - l e_j, j}`.
    coeffs: Vec<u32>,
    seed: u64,
    schedules: BTreeMap<Vec<usize>, RepairSchedule>,
}

/// One downloaded parity symbol expressed over the unknown symbols.
pub(crate) struct Equation {
    pub node: usize,
    pub row: usize,
    /// `(unknown column, coefficient)` pairs.
    pub unknown: Vec<(usize, u32)>,
    /// `(systematic node, row, coefficient)` for symbols that must be known.
    pub known: Vec<(usize, usize, u32)>,
}

impl ZigzagCode {
    pub fn build(r: usize, k: usize, field: &Field, seed: u64) -> Result<Self, ZigzagError> {
        Self::build_with(r, k, field, seed, BuildOptions::default())
    }

    /// Draws nonzero coefficients and verifies them.
    ///
    /// A failing check yields a left null vector of the offending system;
    /// only the coefficients of the equations it touches are redrawn. When
    /// `max_resamples` redraws do not settle every check, the whole draw is
    /// repeated with the next seed.
    pub fn build_with(
        r: usize,
        k: usize,
        field: &Field,
        seed: u64,
        opts: BuildOptions,
    ) -> Result<Self, ZigzagError> {
        let layout = ZigzagLayout::new(r, k)?;
        let subsets = if opts.verify_mds {
            k_subsets(layout.n(), k)
        } else {
            Vec::new()
        };
        let mut last = String::new();
        let attempts = opts.max_reseeds + 1;
        for attempt in 0..attempts {
            let attempt_seed = seed.wrapping_add(attempt as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed);
            let count = r * layout.alpha() * k;
            let coeffs = (0..count).map(|_| field.random_nonzero(&mut rng)).collect();
            let mut code = Self::from_coefficients(layout, field, coeffs)?;
            code.seed = attempt_seed;
            match code.settle(&mut rng, &subsets, opts) {
                Ok(()) => return Ok(code),
                Err(detail) => last = detail,
            }
        }
        Err(ZigzagError::RetriesExhausted {
            attempts,
            detail: last,
        })
    }

    fn settle(
        &mut self,
        rng: &mut ChaCha8Rng,
        subsets: &[Vec<usize>],
        opts: BuildOptions,
    ) -> Result<(), String> {
        let (k, alpha) = (self.k(), self.alpha());
        let patterns = self.supported_patterns();
        let mut schedules = Vec::with_capacity(patterns.len());
        for p in &patterns {
            let first = Candidates::new(&self.layout, p, self.seed)
                .ok()
                .and_then(|mut c| c.next());
            schedules.push(
                first.ok_or_else(|| {
                    format!("no structurally sound schedule for failed set {p:?}")
                })?,
            );
        }
        let mut subset_ok = vec![false; subsets.len()];
        let mut pattern_ok = vec![!opts.verify_repairs; patterns.len()];
        let mut resamples = 0;
        loop {
            // Coefficients `(parity, row, node)` to change, from every failing
            // check in this pass. `true` marks a single rank-raising entry.
            let mut changes: Vec<((usize, usize, usize), bool)> = Vec::new();
            let mut detail = String::new();
            for (idx, subset) in subsets.iter().enumerate() {
                if subset_ok[idx] {
                    continue;
                }
                let (parities, missing) = self.split_subset(subset);
                let coeff_of = |row: usize, col: usize| {
                    (parities[row / alpha], row % alpha, missing[col / alpha])
                };
                match (!missing.is_empty())
                    .then(|| self.decode_matrix(&parities, &missing).dependency())
                    .flatten()
                {
                    None => subset_ok[idx] = true,
                    Some(Dependency::Entry(row, col)) => changes.push((coeff_of(row, col), true)),
                    Some(Dependency::Rows(rows)) => {
                        for row in rows {
                            let (l, s) = (parities[row / alpha], row % alpha);
                            changes.extend(missing.iter().map(|&j| ((l, s, j), false)));
                        }
                    }
                }
                if !subset_ok[idx] && detail.is_empty() {
                    detail = format!("node subset {subset:?} is not full rank");
                }
            }
            if changes.is_empty() {
                for (pi, schedule) in schedules.iter().enumerate() {
                    if pattern_ok[pi] {
                        continue;
                    }
                    let eqs = self.equations(schedule);
                    let failed = schedule.failed();
                    let m = self.system_matrix(&eqs, failed.len() * alpha);
                    match m.dependency() {
                        None => pattern_ok[pi] = true,
                        Some(Dependency::Entry(row, col)) => {
                            changes.push((
                                (eqs[row].node - k, eqs[row].row, failed[col / alpha]),
                                true,
                            ));
                        }
                        Some(Dependency::Rows(rows)) => {
                            for row in rows {
                                let (l, s) = (eqs[row].node - k, eqs[row].row);
                                changes.extend(failed.iter().map(|&j| ((l, s, j), false)));
                            }
                        }
                    }
                    if !pattern_ok[pi] && detail.is_empty() {
                        detail = format!(
                            "repair system for failed set {:?} is rank deficient",
                            patterns[pi]
                        );
                    }
                }
            }
            if changes.is_empty() {
                break;
            }
            if resamples == opts.max_resamples || self.field.order() == 2 {
                return Err(detail);
            }
            resamples += 1;
            changes.sort_unstable();
            changes.dedup_by_key(|c| c.0);
            let mut touched = vec![false; self.layout.r() * k];
            for &((l, s, j), single) in &changes {
                let slot = &mut self.coeffs[(l * alpha + s) * k + j];
                let old = *slot;
                loop {
                    *slot = self.field.random_nonzero(rng);
                    if !single || *slot != old {
                        break;
                    }
                }
                touched[l * k + j] = true;
            }
            for (idx, subset) in subsets.iter().enumerate() {
                let hit = subset
                    .iter()
                    .filter(|&&v| v >= k)
                    .any(|&v| (0..k).any(|j| !subset.contains(&j) && touched[(v - k) * k + j]));
                if hit {
                    subset_ok[idx] = false;
                }
            }
            if opts.verify_repairs {
                for (pi, p) in patterns.iter().enumerate() {
                    if (0..self.layout.r()).any(|l| p.iter().any(|&j| touched[l * k + j])) {
                        pattern_ok[pi] = false;
                    }
                }
            }
        }
        for (p, s) in patterns.into_iter().zip(schedules) {
            self.schedules.insert(p, s);
        }
        Ok(())
    }

    /// Wraps caller-chosen coefficients without any verification.
    pub fn from_coefficients(
        layout: ZigzagLayout,
        field: &Field,
        coeffs: Vec<u32>,
    ) -> Result<Self, ZigzagError> {
        let expected = layout.r() * layout.alpha() * layout.k();
        if coeffs.len() != expected {
            return Err(ZigzagError::LengthMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|&c| c == 0 || c >= field.order()) {
            return Err(ZigzagError::InvalidParams(
                "coefficients must be nonzero field elements".into(),
            ));
        }
        Ok(Self {
            layout,
            field: field.clone(),
            coeffs,
            seed: 0,
            schedules: BTreeMap::new(),
        })
    }

    pub fn layout(&self) -> &ZigzagLayout {
        &self.layout
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Seed of the accepted coefficient draw.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn k(&self) -> usize {
        self.layout.k()
    }

    pub fn alpha(&self) -> usize {
        self.layout.alpha()
    }

    pub fn coefficient(&self, l: usize, s: usize, j: usize) -> u32 {
        self.coeffs[(l * self.alpha() + s) * self.k() + j]
    }

    /// Systematic failure sets of size `1..=min(3, r, k)`, sorted.
    pub fn supported_patterns(&self) -> Vec<Vec<usize>> {
        let max_t = 3.min(self.layout.r()).min(self.k());
        let mut out = Vec::new();
        for mask in 1u32..(1 << self.k()) {
            let set: Vec<usize> = (0..self.k()).filter(|&j| mask >> j & 1 == 1).collect();
            if set.len() <= max_t {
                out.push(set);
            }
        }
        out.sort_by_key(|s| (s.len(), s.clone()));
        out
    }

    /// Terms `(systematic node, row, coefficient)` of parity `l`, row `s`.
    pub fn parity_terms(
        &self,
        l: usize,
        s: usize,
    ) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.k()).map(move |j| (j, self.layout.unshift(s, j, l), self.coefficient(l, s, j)))
    }

    /// Node payloads; `data[j * alpha + i]` is row `i` of systematic node `j`.
    pub fn encode(&self, data: &[u32]) -> Result<Vec<Vec<u32>>, ZigzagError> {
        let (k, alpha) = (self.k(), self.alpha());
        if data.len() != k * alpha {
            return Err(ZigzagError::LengthMismatch {
                expected: k * alpha,
                got: data.len(),
            });
        }
        let f = &self.field;
        let mut nodes: Vec<Vec<u32>> = data.chunks(alpha).map(<[u32]>::to_vec).collect();
        for l in 0..self.layout.r() {
            let parity = (0..alpha)
                .map(|s| {
                    self.parity_terms(l, s).fold(0, |acc, (j, i, c)| {
                        f.add(acc, f.mul(c, data[j * alpha + i]))
                    })
                })
                .collect();
            nodes.push(parity);
        }
        Ok(nodes)
    }

    /// Parity equations restricted to the missing systematic nodes `missing`.
    fn decode_matrix(&self, present_parities: &[usize], missing: &[usize]) -> Matrix {
        let alpha = self.alpha();
        let mut col_of = vec![usize::MAX; self.k()];
        for (pos, &j) in missing.iter().enumerate() {
            col_of[j] = pos;
        }
        let mut m = Matrix::zeros(
            &self.field,
            present_parities.len() * alpha,
            missing.len() * alpha,
        );
        for (pi, &l) in present_parities.iter().enumerate() {
            for s in 0..alpha {
                for (j, i, c) in self.parity_terms(l, s) {
                    if col_of[j] != usize::MAX {
                        m.set(pi * alpha + s, col_of[j] * alpha + i, c);
                    }
                }
            }
        }
        m
    }

    fn split_subset(&self, subset: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let parities = subset
            .iter()
            .filter(|&&v| v >= self.k())
            .map(|&v| v - self.k())
            .collect();
        let missing = (0..self.k()).filter(|j| !subset.contains(j)).collect();
        (parities, missing)
    }

    /// Whether the `k` nodes in `subset` determine the data.
    pub fn subset_full_rank(&self, subset: &[usize]) -> bool {
        let (parities, missing) = self.split_subset(subset);
        missing.is_empty()
            || self.decode_matrix(&parities, &missing).block_rank() == missing.len() * self.alpha()
    }

    /// Checks every `k`-subset of nodes; returns the first failing subset.
    pub fn check_mds(&self) -> Result<(), Vec<usize>> {
        for subset in k_subsets(self.n(), self.k()) {
            if !self.subset_full_rank(&subset) {
                return Err(subset);
            }
        }
        Ok(())
    }

    /// Recovers the data from exactly `k` distinct nodes.
    pub fn decode_any_k(&self, nodes: &[(usize, &[u32])]) -> Result<Vec<u32>, ZigzagError> {
        let (k, alpha) = (self.k(), self.alpha());
        let mut idx: Vec<usize> = nodes.iter().map(|n| n.0).collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != k || nodes.len() != k {
            return Err(ZigzagError::InvalidParams(format!(
                "need exactly {k} distinct nodes"
            )));
        }
        let mut payloads: Vec<Option<&[u32]>> = vec![None; self.n()];
        for &(v, p) in nodes {
            if v >= self.n() {
                return Err(ZigzagError::NodeOutOfRange {
                    node: v,
                    n: self.n(),
                });
            }
            if p.len() != alpha {
                return Err(ZigzagError::LengthMismatch {
                    expected: alpha,
                    got: p.len(),
                });
            }
            payloads[v] = Some(p);
        }
        let (parities, missing) = self.split_subset(&idx);
        let mut data = vec![0u32; k * alpha];
        for j in 0..k {
            if let Some(p) = payloads[j] {
                data[j * alpha..(j + 1) * alpha].copy_from_slice(p);
            }
        }
        if missing.is_empty() {
            return Ok(data);
        }
        let f = &self.field;
        let a = self.decode_matrix(&parities, &missing);
        let mut rhs = Vec::with_capacity(parities.len() * alpha);
        for &l in &parities {
            let p = payloads[k + l].expect("parity present");
            for s in 0..alpha {
                let known = self
                    .parity_terms(l, s)
                    .filter(|(j, _, _)| payloads[*j].is_some())
                    .fold(0, |acc, (j, i, c)| {
                        f.add(acc, f.mul(c, data[j * alpha + i]))
                    });
                rhs.push(f.sub(p[s], known));
            }
        }
        let x = a
            .solve(&Matrix::column(f, &rhs))
            .map_err(ZigzagError::internal)?;
        for (pos, &j) in missing.iter().enumerate() {
            for i in 0..alpha {
                data[j * alpha + i] = x.get(pos * alpha + i, 0);
            }
        }
        Ok(data)
    }

    pub fn single_repair_schedule(&self, j: usize) -> Result<RepairSchedule, ZigzagError> {
        if j >= self.k() {
            return Err(ZigzagError::NodeOutOfRange {
                node: j,
                n: self.k(),
            });
        }
        self.multi_repair_schedule(&[j])
    }

    /// Bandwidth-optimal schedule for `1 <= t <= min(3, r)` systematic failures.
    pub fn multi_repair_schedule(&self, failed: &[usize]) -> Result<RepairSchedule, ZigzagError> {
        let mut key = failed.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.len() != failed.len() || key.is_empty() {
            return Err(ZigzagError::UnsupportedPattern(format!(
                "bad failed set {failed:?}"
            )));
        }
        if let Some(&j) = key.iter().find(|&&j| j >= self.k()) {
            return Err(ZigzagError::UnsupportedPattern(format!(
                "node {j} is not systematic"
            )));
        }
        let t = key.len();
        if t > self.layout.r() {
            return Err(ZigzagError::UnsupportedPattern(format!(
                "t = {t} exceeds n - k = {}, fewer than k helpers remain",
                self.layout.r()
            )));
        }
        if t > 3 {
            return Err(ZigzagError::UnsupportedPattern(format!(
                "t = {t} > 3 is not supported"
            )));
        }
        if let Some(s) = self.schedules.get(&key) {
            return Ok(s.clone());
        }
        let mut candidates = Candidates::new(&self.layout, &key, self.seed)?;
        candidates
            .next()
            .ok_or_else(|| ZigzagError::Unsolvable(format!("no schedule found for {key:?}")))
    }

    /// Optimal schedule when available, else decode-and-re-encode.
    pub fn repair_schedule(&self, failed: &[usize]) -> Result<RepairSchedule, ZigzagError> {
        let all_systematic = failed.iter().all(|&j| j < self.k());
        if all_systematic && !failed.is_empty() && failed.len() <= 3.min(self.layout.r()) {
            return self.multi_repair_schedule(failed);
        }
        if let Some(&v) = failed.iter().find(|&&v| v >= self.n()) {
            return Err(ZigzagError::NodeOutOfRange {
                node: v,
                n: self.n(),
            });
        }
        decode_schedule(&self.layout, failed)
    }

    /// Linear system of a schedule: one equation per downloaded parity row.
    pub(crate) fn equations(&self, schedule: &RepairSchedule) -> Vec<Equation> {
        let alpha = self.alpha();
        let failed = schedule.failed();
        let mut pos_of = vec![usize::MAX; self.k()];
        for (p, &f) in failed.iter().enumerate() {
            pos_of[f] = p;
        }
        let mut out = Vec::new();
        for l in 0..self.layout.r() {
            let node = self.k() + l;
            for s in schedule.rows(node) {
                let mut eq = Equation {
                    node,
                    row: s,
                    unknown: Vec::new(),
                    known: Vec::new(),
                };
                for (j, i, c) in self.parity_terms(l, s) {
                    if pos_of[j] != usize::MAX {
                        eq.unknown.push((pos_of[j] * alpha + i, c));
                    } else {
                        eq.known.push((j, i, c));
                    }
                }
                out.push(eq);
            }
        }
        out
    }

    fn system_matrix(&self, eqs: &[Equation], unknowns: usize) -> Matrix {
        let mut m = Matrix::zeros(&self.field, eqs.len(), unknowns);
        for (r, eq) in eqs.iter().enumerate() {
            for &(c, v) in &eq.unknown {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Rank of the schedule's coefficient matrix over the unknowns.
    pub(crate) fn system_rank(&self, schedule: &RepairSchedule) -> usize {
        let unknowns = schedule.failed().len() * self.alpha();
        self.system_matrix(&self.equations(schedule), unknowns)
            .block_rank()
    }

    pub(crate) fn structural_matching(&self, schedule: &RepairSchedule) -> usize {
        structural_matching(&self.layout, schedule)
    }

    /// Rebuilds the failed nodes' payloads, in `schedule.failed()` order,
    /// from exactly the scheduled symbols.
    pub fn execute_repair(
        &self,
        schedule: &RepairSchedule,
        downloaded: &Downloaded,
    ) -> Result<Vec<Vec<u32>>, ZigzagError> {
        let alpha = self.alpha();
        for node in schedule.helpers() {
            let got = downloaded
                .get(&node)
                .ok_or(ZigzagError::MissingHelper(node))?;
            if got.len() != schedule.entries(node).len() {
                return Err(ZigzagError::LengthMismatch {
                    expected: schedule.entries(node).len(),
                    got: got.len(),
                });
            }
        }
        if schedule.method() == RepairMethod::Decode {
            let nodes: Vec<(usize, &[u32])> = schedule
                .helpers()
                .into_iter()
                .map(|v| (v, downloaded[&v].as_slice()))
                .collect();
            let data = self.decode_any_k(&nodes)?;
            let all = self.encode(&data)?;
            return Ok(schedule.failed().iter().map(|&v| all[v].clone()).collect());
        }
        // Known systematic symbols, indexed by node then row.
        let mut known: Vec<Vec<Option<u32>>> = vec![vec![None; alpha]; self.k()];
        for h in systematic_helpers(&self.layout, schedule.failed()) {
            if let Some(values) = downloaded.get(&h) {
                for (&(row, _), &v) in schedule.entries(h).iter().zip(values) {
                    known[h][row] = Some(v);
                }
            }
        }
        let f = &self.field;
        let eqs = self.equations(schedule);
        let unknowns = schedule.failed().len() * alpha;
        let mut rhs = Vec::with_capacity(eqs.len());
        for eq in &eqs {
            let pos = schedule
                .rows(eq.node)
                .iter()
                .position(|&r| r == eq.row)
                .expect("row scheduled");
            let mut v = downloaded[&eq.node][pos];
            for &(j, i, c) in &eq.known {
                let x = known[j][i].ok_or(ZigzagError::MissingSymbol { node: j, row: i })?;
                v = f.sub(v, f.mul(c, x));
            }
            rhs.push(v);
        }
        let x = self
            .system_matrix(&eqs, unknowns)
            .solve(&Matrix::column(f, &rhs))
            .map_err(|e| ZigzagError::Unsolvable(e.to_string()))?;
        Ok((0..schedule.failed().len())
            .map(|p| (0..alpha).map(|i| x.get(p * alpha + i, 0)).collect())
            .collect())
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < k - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}
