//! Bivariate-polynomial minimum-bandwidth code with centralized repair.
//!
//! The file is carried by
//! `F(X, Y) = sum a_ij X^i Y^j (i, j < k) + sum b_ij X^i Y^j (i < k <= j < d + t)
//!          + sum c_ij X^i Y^j (k <= i < d, j < k)`,
//! so `deg_X F < d` and `deg_Y F < d + t`. Node `i` owns points `x_i`, `y_i`
//! and stores `h_i(Y) = F(x_i, Y)` at `d + t` y-points starting at `y_i`
//! followed by `g_i(X) = F(X, y_i)` at the `d - 1` x-points after `x_i`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebra::{lagrange_interpolate, poly_eval, AlgebraError, Field, Matrix};
use crate::zigzag::k_subsets;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MbcrError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("field of order {order} is too small; need at least {needed} points")]
    FieldTooSmall { needed: u32, order: u32 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("failed and helper sets overlap at node {0}")]
    NotDisjoint(usize),
    #[error("need {expected} helpers, got {got}")]
    WrongHelperCount { expected: usize, got: usize },
    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("missing data from node {0}")]
    MissingNode(usize),
    #[error("payload of node {node} is inconsistent: {source}")]
    Corrupted { node: usize, source: AlgebraError },
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// A stored evaluation `F(x[xi], y[yi])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Evaluation {
    pub xi: usize,
    pub yi: usize,
}

/// Which points each node evaluates at. Node `i` owns `x[i]` and `y[i]`;
/// `h_windows[i]` lists the `d + t` y-indices of its `h` values (starting
/// with `i`) and `g_windows[i]` the `d - 1` further x-indices of its `g` values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MbcrLayout {
    pub x_len: usize,
    pub y_len: usize,
    pub h_windows: Vec<Vec<usize>>,
    pub g_windows: Vec<Vec<usize>>,
}

impl MbcrLayout {
    /// Consecutive windows over `n + d - 1` x-points and `n + d + t - 1`
    /// y-points, or over the `n` node points cyclically when the field holds
    /// fewer than `n + d + t - 1` elements.
    pub fn standard(n: usize, d: usize, t: usize, order: u32) -> Result<Self, MbcrError> {
        let (x_len, y_len) = if order as usize >= n + d + t - 1 {
            (n + d - 1, n + d + t - 1)
        } else if order as usize >= n {
            (n, n)
        } else {
            return Err(MbcrError::FieldTooSmall {
                needed: n as u32,
                order,
            });
        };
        Ok(Self {
            x_len,
            y_len,
            h_windows: (0..n)
                .map(|i| (0..d + t).map(|j| (i + j) % y_len).collect())
                .collect(),
            g_windows: (0..n)
                .map(|i| (1..d).map(|j| (i + j) % x_len).collect())
                .collect(),
        })
    }

    /// Layout for secret sharing with `z` randomness nodes `0..z` and `t`
    /// punctured nodes `z..z + t`. Each punctured node's windows hold the
    /// punctured points, `d - z` free y-points and `d - z - t` free x-points
    /// owned by no node, padded with the randomness nodes' points. Returns the
    /// layout with the secret positions `(node, position)`.
    pub fn secret(
        n: usize,
        d: usize,
        t: usize,
        z: usize,
    ) -> Result<(Self, Vec<(usize, usize)>), MbcrError> {
        let k = z + t;
        if k > d || d + t > n || t == 0 {
            return Err(MbcrError::InvalidParams(format!(
                "need 1 <= t, z + t <= d <= n - t, got n={n}, d={d}, t={t}, z={z}"
            )));
        }
        let (x_len, y_len) = (n + d - z - t, n + d - z);
        let punctured: Vec<usize> = (z..k).collect();
        let free_y: Vec<usize> = (n..y_len).collect();
        let free_x: Vec<usize> = (n..x_len).collect();
        let mut h_windows = Vec::with_capacity(n);
        let mut g_windows = Vec::with_capacity(n);
        let mut secret = Vec::new();
        for i in 0..n {
            if punctured.contains(&i) {
                let mut h = vec![i];
                h.extend(punctured.iter().copied().filter(|&j| j != i));
                h.extend(&free_y);
                secret.extend((0..h.len()).map(|p| (i, p)));
                h.extend(0..z);
                let mut g: Vec<usize> = punctured.iter().copied().filter(|&j| j != i).collect();
                secret.extend((0..free_x.len()).map(|p| (i, d + t + g.len() + p)));
                g.extend(&free_x);
                g.extend(0..z);
                h_windows.push(h);
                g_windows.push(g);
            } else {
                let ys = (0..y_len).cycle().skip(i + 1).take(y_len - 1);
                let mut h = vec![i];
                h.extend(ys.take(d + t - 1));
                g_windows.push((0..x_len).cycle().skip(i + 1).take(d - 1).collect());
                h_windows.push(h);
            }
        }
        Ok((
            Self {
                x_len,
                y_len,
                h_windows,
                g_windows,
            },
            secret,
        ))
    }

    fn validate(&self, n: usize, d: usize, t: usize, order: u32) -> Result<(), MbcrError> {
        let needed = self.x_len.max(self.y_len);
        if needed > order as usize {
            return Err(MbcrError::FieldTooSmall {
                needed: needed as u32,
                order,
            });
        }
        let bad = |msg: String| Err(MbcrError::InvalidParams(msg));
        if self.x_len < n
            || self.y_len < n
            || self.h_windows.len() != n
            || self.g_windows.len() != n
        {
            return bad("layout does not cover every node".into());
        }
        for i in 0..n {
            let (h, g) = (&self.h_windows[i], &self.g_windows[i]);
            let distinct = |w: &[usize], len: usize| {
                let mut s = w.to_vec();
                s.sort_unstable();
                s.dedup();
                s.len() == w.len() && w.iter().all(|&v| v < len)
            };
            if h.len() != d + t || h[0] != i || !distinct(h, self.y_len) {
                return bad(format!(
                    "node {i}: h window must be d + t distinct y-points starting at its own"
                ));
            }
            if g.len() + 1 != d || g.contains(&i) || !distinct(g, self.x_len) {
                return bad(format!(
                    "node {i}: g window must be d - 1 distinct x-points other than its own"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MbcrCode {
    n: usize,
    k: usize,
    d: usize,
    t: usize,
    field: Field,
    x: Vec<u32>,
    y: Vec<u32>,
    layout: MbcrLayout,
    /// Monomial exponents `(i, j)` in coefficient order.
    monomials: Vec<(usize, usize)>,
    /// Per node, `alpha x M` map from the file to the payload.
    generators: Vec<Matrix>,
    /// Systematic positions `(node, position)`; file symbol `m` sits at `info[m]`.
    info: Vec<(usize, usize)>,
    precode: Matrix,
}

fn check_params(n: usize, k: usize, d: usize, t: usize) -> Result<(), MbcrError> {
    if k == 0 || t == 0 || k > d || d + t > n {
        return Err(MbcrError::InvalidParams(format!(
            "need 1 <= k <= d <= n - t and t >= 1, got n={n}, k={k}, d={d}, t={t}"
        )));
    }
    Ok(())
}

impl MbcrCode {
    /// Smallest prime field with at least `n + d + t` elements.
    pub fn default_field(n: usize, d: usize, t: usize) -> Field {
        Field::new(crate::algebra::FieldSpec::smallest_prime_at_least(
            (n + d + t) as u32,
        ))
    }

    /// Code with the standard layout; the systematic positions are picked
    /// greedily over nodes `0..k` in payload order.
    pub fn build(n: usize, k: usize, d: usize, t: usize, field: &Field) -> Result<Self, MbcrError> {
        check_params(n, k, d, t)?;
        let layout = MbcrLayout::standard(n, d, t, field.order())?;
        Self::with_layout(n, k, d, t, field, layout, &[])
    }

    /// Code with an explicit layout. The systematic positions are chosen by a
    /// greedy rank scan over `preferred` first, then nodes `0..k`.
    pub fn with_layout(
        n: usize,
        k: usize,
        d: usize,
        t: usize,
        field: &Field,
        layout: MbcrLayout,
        preferred: &[(usize, usize)],
    ) -> Result<Self, MbcrError> {
        check_params(n, k, d, t)?;
        layout.validate(n, d, t, field.order())?;
        let x: Vec<u32> = (0..layout.x_len as u32).collect();
        let y: Vec<u32> = (0..layout.y_len as u32).collect();
        let mut monomials = Vec::with_capacity(k * (2 * d + t - k));
        for i in 0..k {
            for j in 0..k {
                monomials.push((i, j));
            }
        }
        for i in 0..k {
            for j in k..d + t {
                monomials.push((i, j));
            }
        }
        for i in k..d {
            for j in 0..k {
                monomials.push((i, j));
            }
        }
        let mut code = Self {
            n,
            k,
            d,
            t,
            field: field.clone(),
            x,
            y,
            layout,
            monomials,
            generators: Vec::new(),
            info: Vec::new(),
            precode: Matrix::zeros(field, 0, 0),
        };
        let eval: Vec<Matrix> = (0..n).map(|i| code.evaluation_matrix(i)).collect();
        code.info = code.information_set(&eval, preferred)?;
        let m = code.file_size();
        let mut info_rows = Matrix::zeros(field, 0, m);
        for &(node, pos) in &code.info {
            info_rows.push_row(eval[node].row(pos));
        }
        code.precode = info_rows
            .inverse()
            .map_err(|e| MbcrError::Internal(format!("information set is singular: {e}")))?;
        code.generators = eval
            .iter()
            .map(|e| e.mul(&code.precode).expect("same field"))
            .collect::<Vec<_>>();
        Ok(code)
    }

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
        2 * self.d + self.t - 1
    }

    pub fn file_size(&self) -> usize {
        self.k * (2 * self.d + self.t - self.k)
    }

    pub fn x_points(&self) -> &[u32] {
        &self.x
    }

    pub fn y_points(&self) -> &[u32] {
        &self.y
    }

    pub fn monomials(&self) -> &[(usize, usize)] {
        &self.monomials
    }

    /// The `M x M` map taking the file to polynomial coefficients.
    pub fn precode(&self) -> &Matrix {
        &self.precode
    }

    pub fn generator(&self, node: usize) -> &Matrix {
        &self.generators[node]
    }

    pub fn info_positions(&self) -> &[(usize, usize)] {
        &self.info
    }

    pub fn layout(&self) -> &MbcrLayout {
        &self.layout
    }

    /// Point pairs of node `i`'s stored values, in payload order.
    pub fn evaluations(&self, i: usize) -> Vec<Evaluation> {
        let mut out: Vec<Evaluation> = self.layout.h_windows[i]
            .iter()
            .map(|&yi| Evaluation { xi: i, yi })
            .collect();
        out.extend(
            self.layout.g_windows[i]
                .iter()
                .map(|&xi| Evaluation { xi, yi: i }),
        );
        out
    }

    fn evaluation_row(&self, e: Evaluation) -> Vec<u32> {
        let f = &self.field;
        let (xv, yv) = (self.x[e.xi], self.y[e.yi]);
        self.monomials
            .iter()
            .map(|&(i, j)| f.mul(f.pow(xv, i as u64), f.pow(yv, j as u64)))
            .collect()
    }

    fn evaluation_matrix(&self, node: usize) -> Matrix {
        let rows: Vec<Vec<u32>> = self
            .evaluations(node)
            .into_iter()
            .map(|e| self.evaluation_row(e))
            .collect();
        Matrix::from_rows(&self.field, &rows)
    }

    fn information_set(
        &self,
        eval: &[Matrix],
        preferred: &[(usize, usize)],
    ) -> Result<Vec<(usize, usize)>, MbcrError> {
        let m = self.file_size();
        let f = &self.field;
        let mut basis: Vec<(usize, Vec<u32>)> = Vec::new();
        let mut info = Vec::with_capacity(m);
        let scan = (0..self.k).flat_map(|node| (0..self.alpha()).map(move |pos| (node, pos)));
        for (node, pos) in preferred.iter().copied().chain(scan) {
            if info.len() == m {
                break;
            }
            if node >= self.n || pos >= self.alpha() {
                return Err(MbcrError::InvalidParams(format!(
                    "no position {pos} on node {node}"
                )));
            }
            {
                let mut v = eval[node].row(pos).to_vec();
                for (pivot, b) in &basis {
                    let c = v[*pivot];
                    if c != 0 {
                        f.axpy(&mut v, f.neg(c), b);
                    }
                }
                if let Some(p) = v.iter().position(|&c| c != 0) {
                    let inv = f.inv(v[p]).expect("nonzero");
                    f.scale(&mut v, inv);
                    basis.push((p, v));
                    info.push((node, pos));
                }
            }
        }
        if info.len() != m {
            return Err(MbcrError::Internal(format!(
                "first k nodes have rank {} < {m}",
                info.len()
            )));
        }
        Ok(info)
    }

    pub fn encode(&self, file: &[u32]) -> Result<Vec<Vec<u32>>, MbcrError> {
        let m = self.file_size();
        if file.len() != m {
            return Err(MbcrError::LengthMismatch {
                expected: m,
                got: file.len(),
            });
        }
        Ok(self.generators.iter().map(|g| g.mul_vec(file)).collect())
    }

    /// Polynomial coefficients `A f` of the file.
    pub fn coefficients(&self, file: &[u32]) -> Vec<u32> {
        self.precode.mul_vec(file)
    }

    /// `F(x, y)` from coefficients.
    pub fn evaluate(&self, coeffs: &[u32], x: u32, y: u32) -> u32 {
        let f = &self.field;
        self.monomials
            .iter()
            .zip(coeffs)
            .fold(0, |acc, (&(i, j), &c)| {
                f.add(acc, f.mul(c, f.mul(f.pow(x, i as u64), f.pow(y, j as u64))))
            })
    }

    /// Interpolates `(h_i, g_i)` from node `i`'s payload, checking that the
    /// payload is consistent with the degree bounds.
    pub fn node_polynomials(
        &self,
        payload: &[u32],
        i: usize,
    ) -> Result<(Vec<u32>, Vec<u32>), MbcrError> {
        if i >= self.n {
            return Err(MbcrError::NodeOutOfRange { node: i, n: self.n });
        }
        if payload.len() != self.alpha() {
            return Err(MbcrError::LengthMismatch {
                expected: self.alpha(),
                got: payload.len(),
            });
        }
        let evals = self.evaluations(i);
        let ht = self.d + self.t;
        let h_pts: Vec<(u32, u32)> = evals[..ht]
            .iter()
            .zip(payload)
            .map(|(e, &v)| (self.y[e.yi], v))
            .collect();
        let mut g_pts = vec![(self.x[i], payload[0])];
        g_pts.extend(
            evals[ht..]
                .iter()
                .zip(&payload[ht..])
                .map(|(e, &v)| (self.x[e.xi], v)),
        );
        let corrupted = |source| MbcrError::Corrupted { node: i, source };
        let h = lagrange_interpolate(&self.field, &h_pts, ht).map_err(corrupted)?;
        let g = lagrange_interpolate(&self.field, &g_pts, self.d).map_err(corrupted)?;
        Ok((h, g))
    }

    /// The `2t` symbols helper `j` sends: `g_j(x_i)` then `h_j(y_i)`, `i in failed`.
    pub fn helper_message(
        &self,
        j: usize,
        payload: &[u32],
        failed: &[usize],
    ) -> Result<Vec<u32>, MbcrError> {
        let (h, g) = self.node_polynomials(payload, j)?;
        let mut out: Vec<u32> = failed
            .iter()
            .map(|&i| poly_eval(&self.field, &g, self.x[i]))
            .collect();
        out.extend(
            failed
                .iter()
                .map(|&i| poly_eval(&self.field, &h, self.y[i])),
        );
        Ok(out)
    }

    fn check_sets(&self, failed: &[usize], helpers: &[usize]) -> Result<(), MbcrError> {
        if failed.len() != self.t {
            return Err(MbcrError::InvalidParams(format!(
                "need exactly t = {} failed nodes",
                self.t
            )));
        }
        if helpers.len() != self.d {
            return Err(MbcrError::WrongHelperCount {
                expected: self.d,
                got: helpers.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &v in failed.iter().chain(helpers) {
            if v >= self.n {
                return Err(MbcrError::NodeOutOfRange { node: v, n: self.n });
            }
            if seen[v] {
                return Err(MbcrError::NotDisjoint(v));
            }
            seen[v] = true;
        }
        Ok(())
    }

    /// Rebuilds the `t` failed payloads from the helpers' messages.
    pub fn repair_from_messages(
        &self,
        failed: &[usize],
        messages: &BTreeMap<usize, Vec<u32>>,
    ) -> Result<Vec<Vec<u32>>, MbcrError> {
        let helpers: Vec<usize> = messages.keys().copied().collect();
        self.check_sets(failed, &helpers)?;
        let t = self.t;
        for (&j, msg) in messages {
            if msg.is_empty() {
                return Err(MbcrError::MissingNode(j));
            }
            if msg.len() != 2 * t {
                return Err(MbcrError::LengthMismatch {
                    expected: 2 * t,
                    got: msg.len(),
                });
            }
        }
        let f = &self.field;
        let interp = |pts: &[(u32, u32)], bound: usize| {
            lagrange_interpolate(f, pts, bound).map_err(|e| MbcrError::Internal(e.to_string()))
        };
        // g_i from F(x_j, y_i) = h_j(y_i).
        let mut gs = Vec::with_capacity(t);
        for (pos, _) in failed.iter().enumerate() {
            let pts: Vec<(u32, u32)> = messages
                .iter()
                .map(|(&j, m)| (self.x[j], m[t + pos]))
                .collect();
            gs.push(interp(&pts, self.d)?);
        }
        let mut out = Vec::with_capacity(t);
        for (pos, &i) in failed.iter().enumerate() {
            // h_i from F(x_i, y_j) = g_j(x_i) and F(x_i, y_i') = g_i'(x_i).
            let mut pts: Vec<(u32, u32)> =
                messages.iter().map(|(&j, m)| (self.y[j], m[pos])).collect();
            pts.extend(
                failed
                    .iter()
                    .zip(&gs)
                    .map(|(&i2, g)| (self.y[i2], poly_eval(f, g, self.x[i]))),
            );
            let h = interp(&pts, self.d + self.t)?;
            let payload = self
                .evaluations(i)
                .into_iter()
                .enumerate()
                .map(|(p, e)| {
                    if p < self.d + self.t {
                        poly_eval(f, &h, self.y[e.yi])
                    } else {
                        poly_eval(f, &gs[pos], self.x[e.xi])
                    }
                })
                .collect();
            out.push(payload);
        }
        Ok(out)
    }

    /// Centralized repair of `failed` from `helpers`; returns the rebuilt
    /// payloads and the number of symbols downloaded.
    pub fn centralized_repair(
        &self,
        failed: &[usize],
        helpers: &[usize],
        payloads: &[Option<&[u32]>],
    ) -> Result<(Vec<Vec<u32>>, usize), MbcrError> {
        self.check_sets(failed, helpers)?;
        let mut messages = BTreeMap::new();
        for &j in helpers {
            let p = payloads
                .get(j)
                .copied()
                .flatten()
                .ok_or(MbcrError::MissingNode(j))?;
            messages.insert(j, self.helper_message(j, p, failed)?);
        }
        let bandwidth = messages.values().map(Vec::len).sum();
        Ok((self.repair_from_messages(failed, &messages)?, bandwidth))
    }

    /// Recovers the file from any `k` distinct nodes.
    pub fn reconstruct(&self, nodes: &[(usize, &[u32])]) -> Result<Vec<u32>, MbcrError> {
        let mut idx: Vec<usize> = nodes.iter().map(|n| n.0).collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != self.k || nodes.len() != self.k {
            return Err(MbcrError::InvalidParams(format!(
                "need exactly {} distinct nodes",
                self.k
            )));
        }
        let mut g = Matrix::zeros(&self.field, 0, self.file_size());
        let mut rhs = Vec::new();
        for &(v, p) in nodes {
            if v >= self.n {
                return Err(MbcrError::NodeOutOfRange { node: v, n: self.n });
            }
            if p.len() != self.alpha() {
                return Err(MbcrError::LengthMismatch {
                    expected: self.alpha(),
                    got: p.len(),
                });
            }
            g = g.vstack(&self.generators[v]).expect("same field");
            rhs.extend_from_slice(p);
        }
        let x = g
            .solve(&Matrix::column(&self.field, &rhs))
            .map_err(|e| MbcrError::Internal(e.to_string()))?;
        Ok(x.col_values(0))
    }

    /// Stacked generator rows of `nodes`.
    pub fn generator_rows(&self, nodes: &[usize]) -> Matrix {
        let mut g = Matrix::zeros(&self.field, 0, self.file_size());
        for &v in nodes {
            g = g.vstack(&self.generators[v]).expect("same field");
        }
        g
    }

    /// Rank of every `b`-subset of nodes.
    pub fn entropy_accumulation_rank(&self, b: usize) -> Result<EntropyReport, MbcrError> {
        if b == 0 || b > self.k {
            return Err(MbcrError::InvalidParams(format!(
                "need 1 <= b <= k = {}, got {b}",
                self.k
            )));
        }
        let ranks: Vec<(Vec<usize>, usize)> = k_subsets(self.n, b)
            .into_iter()
            .map(|s| {
                let r = self.generator_rows(&s).rank();
                (s, r)
            })
            .collect();
        Ok(EntropyReport {
            b,
            expected: b * (2 * self.d + self.t - b),
            ranks,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntropyReport {
    pub b: usize,
    /// `b (2d + t - b)`.
    pub expected: usize,
    pub ranks: Vec<(Vec<usize>, usize)>,
}

impl EntropyReport {
    pub fn max(&self) -> usize {
        self.ranks.iter().map(|r| r.1).max().unwrap_or(0)
    }

    pub fn min(&self) -> usize {
        self.ranks.iter().map(|r| r.1).min().unwrap_or(0)
    }

    pub fn uniform(&self) -> bool {
        self.min() == self.expected && self.max() == self.expected
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let f = Field::prime(257).unwrap();
        let c = MbcrCode::build(6, 3, 4, 2, &f).unwrap();
        assert_eq!((c.file_size(), c.alpha()), (21, 9));
        let c = MbcrCode::build(4, 2, 2, 1, &Field::prime(13).unwrap()).unwrap();
        assert_eq!((c.file_size(), c.alpha()), (6, 4));
        let c = MbcrCode::build(5, 2, 3, 1, &Field::prime(17).unwrap()).unwrap();
        assert_eq!((c.file_size(), c.alpha()), (10, 6));
        let e = c.evaluations(0);
        assert_eq!(e.iter().filter(|p| p.xi == 0).count(), 4);
        assert_eq!(e.iter().filter(|p| p.xi != 0).count(), 2);
    }

    #[test]
    fn parameter_errors() {
        let f = Field::prime(13).unwrap();
        assert!(MbcrCode::build(4, 3, 2, 1, &f).is_err());
        assert!(MbcrCode::build(4, 2, 4, 1, &f).is_err());
        assert_eq!(
            MbcrCode::build(6, 2, 3, 1, &Field::prime(5).unwrap()).unwrap_err(),
            MbcrError::FieldTooSmall {
                needed: 6,
                order: 5
            }
        );
    }

    #[test]
    fn default_field_is_smallest_prime() {
        assert_eq!(MbcrCode::default_field(6, 4, 2).order(), 13);
    }
}
