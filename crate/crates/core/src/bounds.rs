//! Cut-set style bounds and operating points for centralized multi-node repair.
//!
//! Everything is an exact rational; callers decide whether a value must be
//! integral.

use num_rational::Ratio;
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid partition {sizes:?}: {reason}")]
    InvalidPartition { sizes: Vec<usize>, reason: String },
    #[error("file size {m} is not divisible by {divisor}")]
    NotDivisible { m: u64, divisor: usize },
}

fn int(v: impl TryInto<i64>) -> Rational {
    Rational::from_integer(v.try_into().ok().expect("parameter fits in i64"))
}

/// `(n, k, d, t, alpha, beta)` for one repair round; `gamma = d * beta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmrParams {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub alpha: Rational,
    pub beta: Rational,
}

impl CmrParams {
    pub fn new(
        n: usize,
        k: usize,
        d: usize,
        t: usize,
        alpha: Rational,
        beta: Rational,
    ) -> Result<Self, BoundsError> {
        check_nkdt(Some(n), k, d, t)?;
        if alpha < int(0) || beta < int(0) {
            return Err(BoundsError::InvalidParams(
                "alpha and beta must be non-negative".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            d,
            t,
            alpha,
            beta,
        })
    }

    pub fn gamma(&self) -> Rational {
        self.beta * int(self.d)
    }
}

fn check_nkdt(n: Option<usize>, k: usize, d: usize, t: usize) -> Result<(), BoundsError> {
    if k == 0 || t == 0 {
        return Err(BoundsError::InvalidParams(
            "k and t must be at least 1".into(),
        ));
    }
    if k > d {
        return Err(BoundsError::InvalidParams(format!(
            "need k <= d, got k={k}, d={d}"
        )));
    }
    if let Some(n) = n {
        if d + t > n {
            return Err(BoundsError::InvalidParams(format!(
                "need d <= n - t, got n={n}, d={d}, t={t}"
            )));
        }
    }
    Ok(())
}

/// Ordered block sizes `n_1, ..., n_g` of a data collector's k nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    sizes: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(sizes: Vec<usize>, k: usize, t: usize) -> Result<Self, BoundsError> {
        let bad = |reason: String| BoundsError::InvalidPartition {
            sizes: sizes.clone(),
            reason,
        };
        if sizes.iter().any(|&s| s == 0 || s > t) {
            return Err(bad(format!("every block must have size 1..={t}")));
        }
        if sizes.iter().sum::<usize>() != k {
            return Err(bad(format!("block sizes must sum to k={k}")));
        }
        Ok(Self { sizes })
    }

    /// `(b, t, t, ..., t)` with `b = k mod t` (omitted when zero).
    pub fn canonical(k: usize, t: usize) -> Self {
        let mut sizes = Vec::new();
        if !k.is_multiple_of(t) {
            sizes.push(k % t);
        }
        sizes.extend(std::iter::repeat_n(t, k / t));
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// `sum_i min{ n_i alpha, (d - sum_{j<i} n_j) beta }`.
pub fn file_size_bound(p: &CmrParams, part: &PartitionSpec) -> Result<Rational, BoundsError> {
    let part = PartitionSpec::new(part.sizes.clone(), p.k, p.t)?;
    Ok(eval_partition(p, &part.sizes))
}

fn eval_partition(p: &CmrParams, sizes: &[usize]) -> Rational {
    let mut seen = 0;
    let mut total = int(0);
    for &s in sizes {
        total += (int(s) * p.alpha).min(int(p.d - seen) * p.beta);
        seen += s;
    }
    total
}

/// Largest `k` for which every composition is enumerated.
pub const EXHAUSTIVE_K: usize = 12;

/// Minimum of [`file_size_bound`] over compositions of k with parts at most t.
///
/// Ties keep the first composition in lexicographic order of block sizes.
pub fn min_file_size_bound(p: &CmrParams) -> (Rational, PartitionSpec) {
    let mut best: Option<(Rational, Vec<usize>)> = None;
    let mut consider = |sizes: &[usize]| {
        let v = eval_partition(p, sizes);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, sizes.to_vec()));
        }
    };
    if p.k <= EXHAUSTIVE_K {
        let mut stack = Vec::new();
        compositions(p.k, p.t, &mut stack, &mut consider);
    } else {
        for b in 1..=p.t.min(p.k) {
            // (b', t, ..., t) plus leftover, for every leading size.
            let rest = p.k - b;
            let mut sizes = vec![b];
            if !rest.is_multiple_of(p.t) {
                sizes.push(rest % p.t);
            }
            sizes.extend(std::iter::repeat_n(p.t, rest / p.t));
            consider(&sizes);
        }
        consider(PartitionSpec::canonical(p.k, p.t).sizes());
    }
    let (v, sizes) = best.expect("k >= 1 has at least one composition");
    (v, PartitionSpec { sizes })
}

fn compositions(left: usize, t: usize, stack: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if left == 0 {
        f(stack);
        return;
    }
    for s in 1..=t.min(left) {
        stack.push(s);
        compositions(left - s, t, stack, f);
        stack.pop();
    }
}

/// `(alpha, gamma)` at the minimum-storage point.
pub fn msmr_point(
    m: u64,
    k: usize,
    d: usize,
    t: usize,
) -> Result<(Rational, Rational), BoundsError> {
    check_nkdt(None, k, d, t)?;
    if !m.is_multiple_of(k as u64) {
        return Err(BoundsError::NotDivisible { m, divisor: k });
    }
    let alpha = int(m) / int(k);
    let gamma = int(m) * int(d) * int(t) / (int(k) * int(d - k + t));
    Ok((alpha, gamma))
}

/// Repair bandwidth at the minimum-bandwidth point; requires `t | k`.
pub fn mbmr_point(m: u64, k: usize, d: usize, t: usize) -> Result<Rational, BoundsError> {
    check_nkdt(None, k, d, t)?;
    if !k.is_multiple_of(t) {
        return Err(BoundsError::NotDivisible {
            m: k as u64,
            divisor: t,
        });
    }
    Ok(int(2) * int(m) * int(d) * int(t) / (int(k) * int(2 * d + t - k)))
}

fn b_weight(b: usize, d: usize, t: usize) -> Rational {
    // b(2d+t-1)/2 - C(b,2)
    int(b * (2 * d + t - 1)) / int(2) - int(b * b.saturating_sub(1) / 2)
}

/// Entropy threshold `(beta/t) [ b(2d+t-1)/2 - C(b,2) ]` that `H_b` must meet
/// when `t` does not divide `k`.
pub fn mbmr_hb_condition(b: usize, d: usize, t: usize, beta: Rational) -> Rational {
    beta / int(t) * b_weight(b, d, t)
}

/// Storage and per-helper traffic of the cooperative minimum-bandwidth code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbcrPoint {
    pub alpha: Rational,
    pub beta: Rational,
    pub beta_prime: Rational,
    d: usize,
    t: usize,
}

impl MbcrPoint {
    /// Entropy of any `b` nodes.
    pub fn h(&self, b: usize) -> Rational {
        b_weight(b, self.d, self.t) * self.beta
    }
}

pub fn mbcr_operating_params(
    m: u64,
    k: usize,
    d: usize,
    t: usize,
) -> Result<MbcrPoint, BoundsError> {
    check_nkdt(None, k, d, t)?;
    let unit = int(m) / int(k) / int(2 * d + t - k);
    Ok(MbcrPoint {
        alpha: unit * int(2 * d + t - 1),
        beta: unit * int(2),
        beta_prime: unit,
        d,
        t,
    })
}

/// `(N, M_s, r, z)` secret-sharing parameters with share size `alpha`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretParams {
    pub shares: usize,
    pub z: usize,
    pub r_tolerance: usize,
    pub secret_size: u64,
    pub share_size: u64,
}

impl SecretParams {
    pub fn new(
        shares: usize,
        z: usize,
        r_tolerance: usize,
        secret_size: u64,
        share_size: u64,
    ) -> Result<Self, BoundsError> {
        if r_tolerance > shares || z + 1 > shares - r_tolerance {
            return Err(BoundsError::InvalidParams(format!(
                "need z + 1 <= N - r <= N, got N={shares}, z={z}, r={r_tolerance}"
            )));
        }
        if secret_size == 0 {
            return Err(BoundsError::InvalidParams(
                "secret size must be at least 1".into(),
            ));
        }
        Ok(Self {
            shares,
            z,
            r_tolerance,
            secret_size,
            share_size,
        })
    }
}

/// Least download `d M_s / (d - z)` for recovering the secret from `d` shares.
pub fn secret_bw_bound(p: &SecretParams, d: usize) -> Result<Rational, BoundsError> {
    if d <= p.z {
        return Err(BoundsError::InvalidParams(format!(
            "need d > z, got d={d}, z={}",
            p.z
        )));
    }
    if d + p.r_tolerance < p.shares || d > p.shares {
        return Err(BoundsError::InvalidParams(format!(
            "need N - r <= d <= N, got d={d}, N={}, r={}",
            p.shares, p.r_tolerance
        )));
    }
    Ok(int(d) * int(p.secret_size) / int(d - p.z))
}
