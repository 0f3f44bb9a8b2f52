//! Univariate polynomials as little-endian coefficient vectors.

use super::{AlgebraError, Field, Matrix};

/// Horner evaluation of `coeffs[0] + coeffs[1] x + ...`.
pub fn poly_eval(field: &Field, coeffs: &[u32], x: u32) -> u32 {
    coeffs
        .iter()
        .rev()
        .fold(0, |acc, &c| field.add(field.mul(acc, x), c))
}

/// Unique polynomial with fewer than `degree_bound` coefficients through
/// `points`. Extra points beyond `degree_bound` must agree with it.
pub fn lagrange_interpolate(
    field: &Field,
    points: &[(u32, u32)],
    degree_bound: usize,
) -> Result<Vec<u32>, AlgebraError> {
    let mut xs: Vec<u32> = points.iter().map(|p| p.0).collect();
    xs.sort_unstable();
    if let Some(w) = xs.windows(2).find(|w| w[0] == w[1]) {
        return Err(AlgebraError::DuplicatePoint(w[0]));
    }
    if points.len() < degree_bound {
        return Err(AlgebraError::TooFewPoints {
            needed: degree_bound,
            got: points.len(),
        });
    }
    let (basis, rest) = points.split_at(degree_bound);
    let coeffs = newton(field, basis);
    for &(x, y) in rest {
        if poly_eval(field, &coeffs, x) != y {
            return Err(AlgebraError::InconsistentPoints(degree_bound));
        }
    }
    Ok(coeffs)
}

/// Newton divided differences, expanded to monomial coefficients.
fn newton(field: &Field, pts: &[(u32, u32)]) -> Vec<u32> {
    let n = pts.len();
    let mut dd: Vec<u32> = pts.iter().map(|p| p.1).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            let num = field.sub(dd[i], dd[i - 1]);
            let den = field.sub(pts[i].0, pts[i - level].0);
            dd[i] = field.div(num, den).expect("distinct points");
        }
    }
    let mut coeffs = vec![0u32; n];
    for i in (0..n).rev() {
        // coeffs <- coeffs * (X - x_i) + dd[i]
        let xi = pts[i].0;
        for j in (1..n).rev() {
            coeffs[j] = field.sub(coeffs[j - 1], field.mul(coeffs[j], xi));
        }
        coeffs[0] = field.sub(dd[i], field.mul(coeffs[0], xi));
    }
    coeffs
}

/// Vandermonde rows `(1, x, x^2, ..., x^{len-1})`.
pub fn vandermonde(field: &Field, xs: &[u32], len: usize) -> Matrix {
    let mut m = Matrix::zeros(field, xs.len(), len);
    for (r, &x) in xs.iter().enumerate() {
        let mut p = 1;
        for c in 0..len {
            m.set(r, c, p);
            p = field.mul(p, x);
        }
    }
    m
}
