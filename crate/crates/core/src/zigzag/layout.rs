//! Row indexing of the zigzag array.
//!
//! Row `i` is identified with a vector in `Z_r^m`, `m = k - 1`, written in
//! base `r` with the first coordinate most significant. Systematic node
//! `j >= 1` is tied to the unit vector on coordinate `j`; node 0 to zero.

use super::ZigzagError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZigzagLayout {
    r: usize,
    k: usize,
    alpha: usize,
}

impl ZigzagLayout {
    pub fn new(r: usize, k: usize) -> Result<Self, ZigzagError> {
        if r < 2 || k < 2 {
            return Err(ZigzagError::InvalidParams(format!(
                "need r >= 2 and k >= 2, got r={r}, k={k}"
            )));
        }
        let alpha = r
            .checked_pow((k - 1) as u32)
            .filter(|&a| a <= 1 << 20)
            .ok_or_else(|| {
                ZigzagError::InvalidParams(format!("alpha = {r}^{} is too large", k - 1))
            })?;
        Ok(Self { r, k, alpha })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.k - 1
    }

    pub fn n(&self) -> usize {
        self.k + self.r
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    fn place(&self, coord: usize) -> usize {
        self.r.pow((self.m() - coord) as u32)
    }

    pub fn to_vec(&self, i: usize) -> Vec<usize> {
        (1..=self.m()).map(|c| self.coord(i, c)).collect()
    }

    pub fn from_vec(&self, v: &[usize]) -> usize {
        assert_eq!(v.len(), self.m());
        v.iter().fold(0, |acc, &d| acc * self.r + d % self.r)
    }

    /// Coordinate `c` (1-based) of row `i`.
    #[inline]
    pub fn coord(&self, i: usize, c: usize) -> usize {
        (i / self.place(c)) % self.r
    }

    pub fn coord_sum(&self, i: usize) -> usize {
        (1..=self.m()).map(|c| self.coord(i, c)).sum::<usize>() % self.r
    }

    /// `i + delta * e_node`, coordinate-wise mod r.
    #[inline]
    pub fn shift(&self, i: usize, node: usize, delta: usize) -> usize {
        if node == 0 {
            return i;
        }
        let place = self.place(node);
        let digit = (i / place) % self.r;
        let new = (digit + delta) % self.r;
        i + new * place - digit * place
    }

    /// `i - delta * e_node`.
    #[inline]
    pub fn unshift(&self, i: usize, node: usize, delta: usize) -> usize {
        self.shift(i, node, self.r - delta % self.r)
    }

    /// Parity rows that involve systematic node `j` when only `j` fails.
    pub fn single_repair_rows(&self, j: usize, l: usize) -> Vec<usize> {
        (0..self.alpha)
            .filter(|&s| self.in_repair_set(s, j, l))
            .collect()
    }

    /// Membership of parity-`l` row `s` in the single-repair set of node `j`.
    #[inline]
    pub fn in_repair_set(&self, s: usize, j: usize, l: usize) -> bool {
        if j == 0 {
            self.coord_sum(s) == l % self.r
        } else {
            self.coord(s, j) == 0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_round_trip() {
        for (r, k) in [(2, 2), (3, 3), (4, 4), (3, 5)] {
            let lay = ZigzagLayout::new(r, k).unwrap();
            for i in 0..lay.alpha() {
                assert_eq!(lay.from_vec(&lay.to_vec(i)), i);
            }
        }
    }

    #[test]
    fn first_coordinate_is_most_significant() {
        let lay = ZigzagLayout::new(3, 3).unwrap();
        assert_eq!(lay.to_vec(5), vec![1, 2]);
        assert_eq!(lay.shift(8, 2, 1), 6);
        assert_eq!(lay.unshift(0, 1, 1), 6);
        assert_eq!(lay.shift(4, 0, 2), 4);
    }

    #[test]
    fn figure_repair_sets() {
        let lay = ZigzagLayout::new(3, 3).unwrap();
        assert_eq!(lay.single_repair_rows(0, 0), vec![0, 5, 7]);
        for l in 0..3 {
            assert_eq!(lay.single_repair_rows(1, l), vec![0, 1, 2]);
        }
        let small = ZigzagLayout::new(2, 2).unwrap();
        assert_eq!(small.single_repair_rows(0, 0), vec![0]);
        assert_eq!(small.single_repair_rows(0, 1), vec![1]);
    }
}
