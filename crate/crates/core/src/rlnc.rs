//! Functional-repair simulator at the minimum-storage point using random
//! linear network coding.
//!
//! The file has `M = k(d - k + t)` symbols and each node keeps
//! `alpha = d - k + t` coded rows over the file. A repair of `t` nodes pulls
//! `t` random combinations from each of `d` helpers, so every round costs
//! exactly `d t` symbols.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{Field, Matrix};
use crate::bounds::{msmr_point, Rational};
use crate::zigzag::k_subsets;

/// Fresh draws allowed when the initial code misses the data-collection property.
pub const INIT_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlncError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no full-rank initial code over {field} after {attempts} attempts")]
    FieldTooSmall { field: String, attempts: usize },
    #[error("bad repair sets: {0}")]
    SetSize(String),
    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("node {0} is both failed and helper")]
    NotDisjoint(usize),
}

#[derive(Debug, Clone)]
pub struct DssState {
    n: usize,
    k: usize,
    d: usize,
    t: usize,
    field: Field,
    nodes: Vec<Matrix>,
    round: usize,
    ledger: u64,
}

impl DssState {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn alpha(&self) -> usize {
        self.d - self.k + self.t
    }

    pub fn file_size(&self) -> usize {
        self.k * self.alpha()
    }

    /// `alpha x M` coefficient matrix of a node.
    pub fn node(&self, i: usize) -> &Matrix {
        &self.nodes[i]
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Total symbols downloaded over all repairs so far.
    pub fn ledger(&self) -> u64 {
        self.ledger
    }

    /// Rank of the union of `nodes`.
    pub fn subset_rank(&self, nodes: &[usize]) -> usize {
        let mut g = Matrix::zeros(&self.field, 0, self.file_size());
        for &v in nodes {
            g = g.vstack(&self.nodes[v]).expect("same field");
        }
        g.rank()
    }

    /// Every `k`-subset whose rank falls short of `M`, with its rank.
    pub fn data_collection_failures(&self) -> Vec<(Vec<usize>, usize)> {
        let m = self.file_size();
        k_subsets(self.n, self.k)
            .into_iter()
            .filter_map(|s| {
                let r = self.subset_rank(&s);
                (r < m).then_some((s, r))
            })
            .collect()
    }

    fn random<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        d: usize,
        t: usize,
        field: &Field,
        rng: &mut R,
    ) -> Self {
        let alpha = d - k + t;
        let m = k * alpha;
        let nodes = (0..n)
            .map(|_| random_matrix(field, alpha, m, rng))
            .collect();
        Self {
            n,
            k,
            d,
            t,
            field: field.clone(),
            nodes,
            round: 0,
            ledger: 0,
        }
    }
}

fn random_matrix<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| field.random(rng)).collect();
    Matrix::from_vec(field, rows, cols, data)
}

fn check_params(n: usize, k: usize, d: usize, t: usize) -> Result<(), RlncError> {
    if k == 0 || t == 0 || k > d || d + t > n {
        return Err(RlncError::InvalidParams(format!(
            "need 1 <= k <= d <= n - t and t >= 1, got n={n}, k={k}, d={d}, t={t}"
        )));
    }
    Ok(())
}

/// Random initial code with every `k`-subset of full rank.
pub fn rlnc_init<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    d: usize,
    t: usize,
    field: &Field,
    rng: &mut R,
) -> Result<DssState, RlncError> {
    check_params(n, k, d, t)?;
    for _ in 0..INIT_ATTEMPTS {
        let state = DssState::random(n, k, d, t, field, rng);
        if state.data_collection_failures().is_empty() {
            return Ok(state);
        }
    }
    Err(RlncError::FieldTooSmall {
        field: field.spec().to_string(),
        attempts: INIT_ATTEMPTS,
    })
}

/// One centralized repair of `failed` from `helpers`.
pub fn rlnc_repair_round<R: Rng + ?Sized>(
    state: &mut DssState,
    failed: &[usize],
    helpers: &[usize],
    rng: &mut R,
) -> Result<(), RlncError> {
    if failed.len() != state.t || helpers.len() != state.d {
        return Err(RlncError::SetSize(format!(
            "need {} failed and {} helpers, got {} and {}",
            state.t,
            state.d,
            failed.len(),
            helpers.len()
        )));
    }
    let mut seen = vec![false; state.n];
    for &v in failed.iter().chain(helpers) {
        if v >= state.n {
            return Err(RlncError::NodeOutOfRange {
                node: v,
                n: state.n,
            });
        }
        if seen[v] {
            return Err(RlncError::NotDisjoint(v));
        }
        seen[v] = true;
    }
    let field = state.field.clone();
    let (alpha, m, t) = (state.alpha(), state.file_size(), state.t);
    let mut received = Matrix::zeros(&field, 0, m);
    for &h in helpers {
        let mix = random_matrix(&field, t, alpha, rng);
        received = received
            .vstack(&mix.mul(&state.nodes[h]).expect("shapes"))
            .expect("same field");
    }
    for &f in failed {
        let mix = random_matrix(&field, alpha, received.rows(), rng);
        state.nodes[f] = mix.mul(&received).expect("shapes");
    }
    state.ledger += received.rows() as u64;
    state.round += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StressOptions {
    /// Check data collection after every `check_every`-th round; 0 disables checks.
    pub check_every: usize,
}

impl Default for StressOptions {
    fn default() -> Self {
        Self { check_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StressParams {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub alpha: usize,
    pub file_size: usize,
    pub field: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankFailure {
    /// 0 is the initial code.
    pub round: usize,
    pub nodes: Vec<usize>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressReport {
    pub params: StressParams,
    pub rounds: usize,
    pub rounds_survived: usize,
    pub checked_rounds: usize,
    pub failures: Vec<RankFailure>,
    pub bandwidth_per_round: u64,
    pub ledger: u64,
    /// Per-round bandwidth over the minimum-storage bound.
    pub bound_ratio: f64,
    #[serde(skip)]
    pub bound_ratio_exact: Rational,
}

impl StressReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.bound_ratio_exact == Rational::from_integer(1)
    }
}

/// Runs `rounds` repairs with random failure patterns and logs every
/// data-collection failure. Over a tiny field the initial code may already
/// fail; those failures are logged at round 0 instead of aborting.
pub fn rlnc_stress(
    n: usize,
    k: usize,
    d: usize,
    t: usize,
    field: &Field,
    rounds: usize,
    seed: u64,
    options: StressOptions,
) -> Result<StressReport, RlncError> {
    check_params(n, k, d, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut state = match rlnc_init(n, k, d, t, field, &mut rng) {
        Ok(s) => s,
        Err(RlncError::FieldTooSmall { .. }) => {
            let s = DssState::random(n, k, d, t, field, &mut rng);
            failures.extend(
                s.data_collection_failures()
                    .into_iter()
                    .map(|(nodes, rank)| RankFailure {
                        round: 0,
                        nodes,
                        rank,
                    }),
            );
            s
        }
        Err(e) => return Err(e),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut checked = 0;
    let mut bad_rounds = 0;
    for round in 1..=rounds {
        order.shuffle(&mut rng);
        let before = state.ledger;
        rlnc_repair_round(&mut state, &order[..t], &order[t..t + d], &mut rng)?;
        assert_eq!(state.ledger - before, (d * t) as u64);
        if options.check_every != 0 && round % options.check_every == 0 {
            checked += 1;
            let found = state.data_collection_failures();
            if !found.is_empty() {
                bad_rounds += 1;
            }
            failures.extend(found.into_iter().map(|(nodes, rank)| RankFailure {
                round,
                nodes,
                rank,
            }));
        }
    }
    let m = state.file_size();
    let (_, gamma) =
        msmr_point(m as u64, k, d, t).map_err(|e| RlncError::InvalidParams(e.to_string()))?;
    let per_round = (d * t) as u64;
    let ratio = Rational::from_integer(per_round as i64) / gamma;
    Ok(StressReport {
        params: StressParams {
            n,
            k,
            d,
            t,
            alpha: state.alpha(),
            file_size: m,
            field: field.spec().to_string(),
            seed,
        },
        rounds,
        rounds_survived: rounds - bad_rounds,
        checked_rounds: checked,
        failures,
        bandwidth_per_round: per_round,
        ledger: state.ledger,
        bound_ratio: *ratio.numer() as f64 / *ratio.denom() as f64,
        bound_ratio_exact: ratio,
    })
}
