//! Repair-capable secret sharing by puncturing a CMR code.
//!
//! The file `f` is split into secret symbols `m` and uniform randomness `r`,
//! placed so that `m` lands on systematic positions of `t` base nodes. Those
//! nodes are dropped; the remaining `N = n - t` nodes are the shares.
//!
//! Secrecy is checked exactly. The view of share set `E` is `G_E f`. With `m`
//! and `r` independent and uniform, `H(G_E f) = rank(G_E)` and
//! `H(G_E f | m) = rank(G_E^r)`, where `G_E^r` keeps only the randomness
//! columns, so `I(m; G_E f) = rank(G_E) - rank(G_E^r)` q-ary symbols.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::algebra::{Field, Matrix};
use crate::bounds::{secret_bw_bound, BoundsError, Rational, SecretParams};
use crate::mbcr::{MbcrCode, MbcrError, MbcrLayout};
use crate::zigzag::{ZigzagCode, ZigzagError};

/// Largest `q^R` the enumeration oracle accepts by default.
pub const BRUTE_FORCE_BUDGET: u64 = 1_000_000;
/// Secrets tried by the enumeration oracle when the secret space is larger.
const SECRET_SAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecretError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} shares, got {got}")]
    TooFewShares { needed: usize, got: usize },
    #[error("share {share} out of range (N = {shares})")]
    ShareOutOfRange { share: usize, shares: usize },
    #[error("share {0} given twice or both failed and helper")]
    DuplicateShare(usize),
    #[error("share {0} is required but was not supplied")]
    MissingShare(usize),
    #[error("enumeration needs {needed} evaluations per secret, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error(transparent)]
    Zigzag(#[from] ZigzagError),
    #[error(transparent)]
    Mbcr(#[from] MbcrError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecretKind {
    MsmrZigzag,
    Mbmr,
}

impl SecretKind {
    pub fn name(self) -> &'static str {
        match self {
            SecretKind::MsmrZigzag => "msmr-zigzag",
            SecretKind::Mbmr => "mbmr",
        }
    }
}

#[derive(Debug, Clone)]
enum Base {
    Zigzag(ZigzagCode),
    Mbcr(MbcrCode),
}

#[derive(Debug, Clone)]
pub struct SecretScheme {
    kind: SecretKind,
    base: Base,
    n: usize,
    k: usize,
    d: usize,
    t: usize,
    z: usize,
    alpha: usize,
    punctured: Vec<usize>,
    shares: Vec<usize>,
    /// `n alpha x M` map from the file to every base node's payload.
    generator: Matrix,
    secret_cols: Vec<usize>,
    random_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageReport {
    pub subset: Vec<usize>,
    pub leaked_symbols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceReport {
    pub subset: Vec<usize>,
    pub secrets_tested: usize,
    /// Randomness values enumerated for every secret, `q^R`.
    pub per_secret: u64,
    pub perfect: bool,
    /// Largest total-variation distance from the first secret's distribution.
    pub max_distance: f64,
}

impl SecretScheme {
    /// Punctured zigzag code: `k = z + t`, `r = n - k` parities, the secret in
    /// systematic nodes `0..t` and every share needed for reconstruction.
    pub fn msmr_zigzag(
        n: usize,
        t: usize,
        z: usize,
        field: &Field,
        seed: u64,
    ) -> Result<Self, SecretError> {
        let k = z + t;
        if t == 0 || n <= k || t > n - k {
            return Err(SecretError::InvalidParams(format!(
                "need t >= 1, k = z + t < n and t <= n - k, got n={n}, t={t}, z={z}"
            )));
        }
        let code = ZigzagCode::build(n - k, k, field, seed)?;
        let alpha = code.alpha();
        let m = k * alpha;
        let mut generator = Matrix::zeros(field, n * alpha, m);
        let mut unit = vec![0; m];
        for c in 0..m {
            unit[c] = 1;
            for (v, payload) in code.encode(&unit)?.iter().enumerate() {
                for (i, &x) in payload.iter().enumerate() {
                    generator.set(v * alpha + i, c, x);
                }
            }
            unit[c] = 0;
        }
        Ok(Self {
            kind: SecretKind::MsmrZigzag,
            base: Base::Zigzag(code),
            n,
            k,
            d: n - t,
            t,
            z,
            alpha,
            punctured: (0..t).collect(),
            shares: (t..n).collect(),
            generator,
            secret_cols: (0..t * alpha).collect(),
            random_cols: (t * alpha..m).collect(),
        })
    }

    /// Punctured bivariate MBCR code with `k = z + t`. Randomness fills nodes
    /// `0..z`; the secret sits on nodes `z..z + t` at evaluations whose points
    /// belong to no share, so `z` shares never see it directly.
    pub fn mbmr(
        n: usize,
        d: usize,
        t: usize,
        z: usize,
        field: &Field,
    ) -> Result<Self, SecretError> {
        let k = z + t;
        if d <= z {
            return Err(SecretError::InvalidParams(format!(
                "need d > z, got d={d}, z={z}"
            )));
        }
        let (layout, secret_positions) = MbcrLayout::secret(n, d, t, z)?;
        let alpha = 2 * d + t - 1;
        let mut preferred: Vec<(usize, usize)> = (0..z)
            .flat_map(|v| (0..alpha).map(move |p| (v, p)))
            .collect();
        preferred.extend(&secret_positions);
        let code = MbcrCode::with_layout(n, k, d, t, field, layout, &preferred)?;
        let m = code.file_size();
        let r = z * (2 * d + t - z);
        if code.info_positions()[r..] != secret_positions[..] {
            return Err(SecretError::InvalidParams(
                "secret positions are not systematic".into(),
            ));
        }
        let mut generator = Matrix::zeros(field, 0, m);
        for v in 0..n {
            generator = generator.vstack(code.generator(v)).expect("same field");
        }
        let punctured: Vec<usize> = (z..k).collect();
        Ok(Self {
            kind: SecretKind::Mbmr,
            base: Base::Mbcr(code),
            n,
            k,
            d,
            t,
            z,
            alpha,
            shares: (0..n).filter(|v| !punctured.contains(v)).collect(),
            punctured,
            generator,
            secret_cols: (r..m).collect(),
            random_cols: (0..r).collect(),
        })
    }

    pub fn kind(&self) -> SecretKind {
        self.kind
    }

    pub fn field(&self) -> &Field {
        self.generator.field()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Shares contacted for reconstruction.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn share_count(&self) -> usize {
        self.shares.len()
    }

    pub fn share_size(&self) -> usize {
        self.alpha
    }

    pub fn secret_size(&self) -> usize {
        self.secret_cols.len()
    }

    pub fn randomness_size(&self) -> usize {
        self.random_cols.len()
    }

    pub fn punctured(&self) -> &[usize] {
        &self.punctured
    }

    /// Base-code node of share `s`.
    pub fn share_node(&self, s: usize) -> usize {
        self.shares[s]
    }

    pub fn zigzag(&self) -> Option<&ZigzagCode> {
        match &self.base {
            Base::Zigzag(c) => Some(c),
            Base::Mbcr(_) => None,
        }
    }

    pub fn mbcr(&self) -> Option<&MbcrCode> {
        match &self.base {
            Base::Mbcr(c) => Some(c),
            Base::Zigzag(_) => None,
        }
    }

    /// The bound `d M_s / (d - z)` for reconstruction from `d` shares.
    pub fn bandwidth_bound(&self) -> Result<Rational, SecretError> {
        let n = self.share_count();
        let p = SecretParams::new(
            n,
            self.z,
            n - self.d,
            self.secret_size() as u64,
            self.alpha as u64,
        )?;
        Ok(secret_bw_bound(&p, self.d)?)
    }

    fn assemble(&self, secret: &[u32], randomness: &[u32]) -> Vec<u32> {
        let mut f = vec![0; self.generator.cols()];
        for (&c, &v) in self.secret_cols.iter().zip(secret) {
            f[c] = v;
        }
        for (&c, &v) in self.random_cols.iter().zip(randomness) {
            f[c] = v;
        }
        f
    }

    fn encode_file(&self, f: &[u32]) -> Result<Vec<Vec<u32>>, SecretError> {
        Ok(match &self.base {
            Base::Zigzag(c) => c.encode(f)?,
            Base::Mbcr(c) => c.encode(f)?,
        })
    }

    /// Shares for `secret` with explicit randomness.
    pub fn share_with_randomness(
        &self,
        secret: &[u32],
        randomness: &[u32],
    ) -> Result<Vec<Vec<u32>>, SecretError> {
        if secret.len() != self.secret_size() {
            return Err(SecretError::LengthMismatch {
                expected: self.secret_size(),
                got: secret.len(),
            });
        }
        if randomness.len() != self.randomness_size() {
            return Err(SecretError::LengthMismatch {
                expected: self.randomness_size(),
                got: randomness.len(),
            });
        }
        let mut nodes = self.encode_file(&self.assemble(secret, randomness))?;
        Ok(self
            .shares
            .iter()
            .map(|&v| std::mem::take(&mut nodes[v]))
            .collect())
    }

    pub fn share<R: Rng + ?Sized>(
        &self,
        secret: &[u32],
        rng: &mut R,
    ) -> Result<Vec<Vec<u32>>, SecretError> {
        let randomness: Vec<u32> = (0..self.randomness_size())
            .map(|_| self.field().random(rng))
            .collect();
        self.share_with_randomness(secret, &randomness)
    }

    /// Base-node payload table from `(share, payload)` pairs.
    fn payload_table<'a>(
        &self,
        given: &[(usize, &'a [u32])],
    ) -> Result<Vec<Option<&'a [u32]>>, SecretError> {
        let mut table = vec![None; self.n];
        for &(s, p) in given {
            if s >= self.share_count() {
                return Err(SecretError::ShareOutOfRange {
                    share: s,
                    shares: self.share_count(),
                });
            }
            if p.len() != self.alpha {
                return Err(SecretError::LengthMismatch {
                    expected: self.alpha,
                    got: p.len(),
                });
            }
            let v = self.shares[s];
            if table[v].is_some() {
                return Err(SecretError::DuplicateShare(s));
            }
            table[v] = Some(p);
        }
        Ok(table)
    }

    fn share_of(&self, node: usize) -> usize {
        self.shares
            .iter()
            .position(|&v| v == node)
            .unwrap_or(usize::MAX)
    }

    /// Rebuilds base nodes `group` from the available payloads; returns the
    /// payloads in `group` order and the symbols downloaded.
    fn repair_group(
        &self,
        group: &[usize],
        table: &[Option<&[u32]>],
    ) -> Result<(Vec<Vec<u32>>, usize), SecretError> {
        match &self.base {
            Base::Zigzag(code) => {
                let schedule = code.repair_schedule(group)?;
                if let Some(h) = schedule.helpers().into_iter().find(|&h| table[h].is_none()) {
                    return Err(SecretError::MissingShare(self.share_of(h)));
                }
                let downloaded = schedule.gather(table)?;
                let rebuilt = code.execute_repair(&schedule, &downloaded)?;
                // Results follow the schedule's sorted order.
                let order = schedule.failed().to_vec();
                let out = group
                    .iter()
                    .map(|v| rebuilt[order.iter().position(|o| o == v).expect("repaired")].clone())
                    .collect();
                Ok((out, schedule.total_download()))
            }
            Base::Mbcr(code) => {
                let helpers: Vec<usize> = (0..self.n)
                    .filter(|v| table[*v].is_some() && !group.contains(v))
                    .take(self.d)
                    .collect();
                if helpers.len() < self.d {
                    return Err(SecretError::TooFewShares {
                        needed: self.d,
                        got: helpers.len(),
                    });
                }
                Ok(code.centralized_repair(group, &helpers, table)?)
            }
        }
    }

    /// Recovers the secret from shares; returns it with the download count.
    pub fn reconstruct(
        &self,
        shares: &[(usize, &[u32])],
    ) -> Result<(Vec<u32>, usize), SecretError> {
        if shares.len() < self.d {
            return Err(SecretError::TooFewShares {
                needed: self.d,
                got: shares.len(),
            });
        }
        let table = self.payload_table(shares)?;
        let (rebuilt, bandwidth) = self.repair_group(&self.punctured, &table)?;
        let secret = match &self.base {
            Base::Zigzag(_) => rebuilt.concat(),
            Base::Mbcr(code) => code.info_positions()[self.randomness_size()..]
                .iter()
                .map(|&(node, pos)| rebuilt[node - self.z][pos])
                .collect(),
        };
        Ok((secret, bandwidth))
    }

    /// Repairs up to `t` lost shares from the helper shares. The punctured
    /// nodes are rebuilt alongside and discarded.
    pub fn repair_shares(
        &self,
        failed: &[usize],
        helpers: &[(usize, &[u32])],
    ) -> Result<(Vec<Vec<u32>>, usize), SecretError> {
        if failed.is_empty() || failed.len() > self.t {
            return Err(SecretError::InvalidParams(format!(
                "can repair 1..={} shares at once, got {}",
                self.t,
                failed.len()
            )));
        }
        let table = self.payload_table(helpers)?;
        let mut group = Vec::with_capacity(self.t + failed.len());
        for &s in failed {
            if s >= self.share_count() {
                return Err(SecretError::ShareOutOfRange {
                    share: s,
                    shares: self.share_count(),
                });
            }
            let v = self.shares[s];
            if table[v].is_some() || group.contains(&v) {
                return Err(SecretError::DuplicateShare(s));
            }
            group.push(v);
        }
        match self.kind {
            SecretKind::Mbmr => {
                // Pad to a full t-group with punctured nodes.
                group.extend(self.punctured.iter().take(self.t - failed.len()));
                let available = helpers.len();
                if available < self.d {
                    return Err(SecretError::TooFewShares {
                        needed: self.d,
                        got: available,
                    });
                }
            }
            SecretKind::MsmrZigzag => group.extend(&self.punctured),
        }
        let (mut rebuilt, bandwidth) = self.repair_group(&group, &table)?;
        rebuilt.truncate(failed.len());
        Ok((rebuilt, bandwidth))
    }

    fn view(&self, subset: &[usize]) -> Result<Matrix, SecretError> {
        let mut rows = Vec::with_capacity(subset.len() * self.alpha);
        for &s in subset {
            if s >= self.share_count() {
                return Err(SecretError::ShareOutOfRange {
                    share: s,
                    shares: self.share_count(),
                });
            }
            let v = self.shares[s];
            rows.extend(v * self.alpha..(v + 1) * self.alpha);
        }
        Ok(self.generator.select_rows(&rows))
    }

    /// Secret symbols revealed by the shares in `subset`.
    pub fn leakage(&self, subset: &[usize]) -> Result<LeakageReport, SecretError> {
        let view = self.view(subset)?;
        let leaked = view.rank() - view.select_cols(&self.random_cols).rank();
        Ok(LeakageReport {
            subset: subset.to_vec(),
            leaked_symbols: leaked,
        })
    }

    /// Enumerates all randomness for a set of secrets and compares the
    /// distributions of what `subset` observes.
    pub fn brute_force_secrecy<R: Rng + ?Sized>(
        &self,
        subset: &[usize],
        budget: u64,
        rng: &mut R,
    ) -> Result<BruteForceReport, SecretError> {
        let q = self.field().order() as u128;
        let per_secret = q
            .checked_pow(self.randomness_size() as u32)
            .filter(|&v| v <= budget as u128)
            .ok_or(SecretError::BudgetExceeded {
                needed: q.saturating_pow(self.randomness_size() as u32),
                budget,
            })?;
        let view = self.view(subset)?;
        let ms = self.secret_size();
        let secrets: Vec<Vec<u32>> = match q
            .checked_pow(ms as u32)
            .filter(|&c| c <= SECRET_SAMPLES as u128)
        {
            Some(count) => (0..count as u64).map(|i| digits(i, q as u64, ms)).collect(),
            None => {
                let mut v = vec![vec![0; ms]];
                v.extend(
                    (1..SECRET_SAMPLES)
                        .map(|_| (0..ms).map(|_| self.field().random(rng)).collect()),
                );
                v
            }
        };
        let dists: Vec<HashMap<Vec<u32>, u64>> = secrets
            .iter()
            .map(|s| {
                let mut dist = HashMap::new();
                for i in 0..per_secret as u64 {
                    let r = digits(i, q as u64, self.randomness_size());
                    *dist.entry(view.mul_vec(&self.assemble(s, &r))).or_insert(0) += 1;
                }
                dist
            })
            .collect();
        let total = per_secret as f64;
        let max_distance = dists[1..]
            .iter()
            .map(|d| {
                let mut sum: u64 = dists[0]
                    .iter()
                    .map(|(k, &a)| a.abs_diff(d.get(k).copied().unwrap_or(0)))
                    .sum();
                sum += d
                    .iter()
                    .filter(|(k, _)| !dists[0].contains_key(*k))
                    .map(|(_, &b)| b)
                    .sum::<u64>();
                sum as f64 / (2.0 * total)
            })
            .fold(0.0, f64::max);
        Ok(BruteForceReport {
            subset: subset.to_vec(),
            secrets_tested: secrets.len(),
            per_secret: per_secret as u64,
            perfect: dists[1..].iter().all(|d| *d == dists[0]),
            max_distance,
        })
    }
}

/// Base-`q` digits of `i`, least significant first.
fn digits(mut i: u64, q: u64, len: usize) -> Vec<u32> {
    (0..len)
        .map(|_| {
            let v = (i % q) as u32;
            i /= q;
            v
        })
        .collect()
}
