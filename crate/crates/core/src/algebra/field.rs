//! Prime fields GF(p) and binary extension fields GF(2^w), w <= 16.
//!
//! Elements are carried as raw `u32` values in `[0, q)`. The [`Field`] handle
//! owns the log/antilog tables for binary fields and is cheap to clone.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AlgebraError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Prime,
    BinaryExtension,
}

/// Identifies a finite field: a prime modulus, or an irreducible polynomial
/// bitmask (bit `w` set for degree `w`) for GF(2^w).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    kind: FieldKind,
    modulus: u32,
}

/// x^8 + x^4 + x^3 + x^2 + 1
pub const GF256_POLY: u32 = 0x11D;
/// x^16 + x^12 + x^3 + x + 1
pub const GF65536_POLY: u32 = 0x1100B;

const MAX_PRIME: u32 = 1 << 31;

impl FieldSpec {
    pub fn prime(p: u32) -> Result<Self, AlgebraError> {
        if !(2..MAX_PRIME).contains(&p) || !is_prime(p) {
            return Err(AlgebraError::InvalidField(format!(
                "{p} is not a supported prime"
            )));
        }
        Ok(Self {
            kind: FieldKind::Prime,
            modulus: p,
        })
    }

    pub fn binary(poly: u32) -> Result<Self, AlgebraError> {
        let w = poly_degree(poly);
        if !(1..=16).contains(&w) {
            return Err(AlgebraError::InvalidField(format!(
                "polynomial {poly:#x} has degree {w}, expected 1..=16"
            )));
        }
        if !is_irreducible(poly) {
            return Err(AlgebraError::InvalidField(format!(
                "polynomial {poly:#x} is reducible"
            )));
        }
        Ok(Self {
            kind: FieldKind::BinaryExtension,
            modulus: poly,
        })
    }

    pub fn gf256() -> Self {
        Self {
            kind: FieldKind::BinaryExtension,
            modulus: GF256_POLY,
        }
    }

    pub fn gf65536() -> Self {
        Self {
            kind: FieldKind::BinaryExtension,
            modulus: GF65536_POLY,
        }
    }

    /// Smallest prime field with at least `min_order` elements.
    pub fn smallest_prime_at_least(min_order: u32) -> Self {
        let mut p = min_order.max(2);
        while !is_prime(p) {
            p += 1;
        }
        Self {
            kind: FieldKind::Prime,
            modulus: p,
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn order(&self) -> u32 {
        match self.kind {
            FieldKind::Prime => self.modulus,
            FieldKind::BinaryExtension => 1 << poly_degree(self.modulus),
        }
    }

    /// Bytes per serialized symbol: `ceil(ceil(log2 q) / 8)`.
    pub fn symbol_bytes(&self) -> usize {
        let bits = 32 - (self.order() - 1).leading_zeros();
        (bits as usize).div_ceil(8).max(1)
    }

    /// Number of whole data bits that fit in one symbol: `floor(log2 q)`.
    pub fn bits_per_symbol(&self) -> u32 {
        31 - self.order().leading_zeros()
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FieldKind::Prime => write!(f, "GF({})", self.modulus),
            FieldKind::BinaryExtension => {
                write!(
                    f,
                    "GF(2^{}; {:#x})",
                    poly_degree(self.modulus),
                    self.modulus
                )
            }
        }
    }
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let p = p as u64;
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn poly_degree(poly: u32) -> u32 {
    if poly == 0 {
        0
    } else {
        31 - poly.leading_zeros()
    }
}

fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b);
    while a != 0 && poly_degree(a) >= db {
        a ^= b << (poly_degree(a) - db);
    }
    a
}

fn is_irreducible(poly: u32) -> bool {
    let w = poly_degree(poly);
    for deg in 1..=w / 2 {
        for f in (1u32 << deg)..(1u32 << (deg + 1)) {
            if poly_mod(poly, f) == 0 {
                return false;
            }
        }
    }
    true
}

/// Carry-less multiply followed by reduction; table-free reference path.
pub(crate) fn clmul_reduce(a: u32, b: u32, poly: u32) -> u32 {
    let w = poly_degree(poly);
    let mut acc: u64 = 0;
    for bit in 0..w {
        if (b >> bit) & 1 == 1 {
            acc ^= (a as u64) << bit;
        }
    }
    let p = poly as u64;
    for bit in (w..2 * w).rev() {
        if (acc >> bit) & 1 == 1 {
            acc ^= p << (bit - w);
        }
    }
    acc as u32
}

enum Arith {
    Prime { p: u64 },
    Binary { log: Vec<u32>, exp: Vec<u32> },
}

struct Inner {
    spec: FieldSpec,
    arith: Arith,
}

/// Arithmetic handle for a [`FieldSpec`].
#[derive(Clone)]
pub struct Field {
    inner: Arc<Inner>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.inner.spec)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.inner.spec == other.inner.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let arith = match spec.kind {
            FieldKind::Prime => Arith::Prime {
                p: spec.modulus as u64,
            },
            FieldKind::BinaryExtension => {
                let (log, exp) = build_tables(spec.modulus, spec.order());
                Arith::Binary { log, exp }
            }
        };
        Self {
            inner: Arc::new(Inner { spec, arith }),
        }
    }

    pub fn gf256() -> Self {
        Self::new(FieldSpec::gf256())
    }

    pub fn gf65536() -> Self {
        Self::new(FieldSpec::gf65536())
    }

    pub fn prime(p: u32) -> Result<Self, AlgebraError> {
        FieldSpec::prime(p).map(Self::new)
    }

    pub fn spec(&self) -> FieldSpec {
        self.inner.spec
    }

    pub fn order(&self) -> u32 {
        self.inner.spec.order()
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        match &self.inner.arith {
            Arith::Prime { p } => ((a as u64 + b as u64) % p) as u32,
            Arith::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        match &self.inner.arith {
            Arith::Prime { p } => ((a as u64 + p - b as u64) % p) as u32,
            Arith::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        self.sub(0, a)
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match &self.inner.arith {
            Arith::Prime { p } => ((a as u64 * b as u64) % p) as u32,
            Arith::Binary { log, exp } => {
                if a == 0 || b == 0 {
                    0
                } else {
                    exp[(log[a as usize] + log[b as usize]) as usize]
                }
            }
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        Some(match &self.inner.arith {
            Arith::Prime { p } => self.pow(a, p - 2),
            Arith::Binary { log, exp } => {
                let n = (self.order() - 1) as usize;
                exp[(n - log[a as usize] as usize) % n]
            }
        })
    }

    pub fn div(&self, a: u32, b: u32) -> Option<u32> {
        self.inv(b).map(|bi| self.mul(a, bi))
    }

    pub fn pow(&self, mut base: u32, mut e: u64) -> u32 {
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `dst += c * src`, elementwise.
    #[inline]
    pub fn axpy(&self, dst: &mut [u32], c: u32, src: &[u32]) {
        if c == 0 {
            return;
        }
        match &self.inner.arith {
            Arith::Prime { p } => {
                let c = c as u64;
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = ((*d as u64 + c * s as u64) % p) as u32;
                }
            }
            Arith::Binary { log, exp } => {
                let lc = log[c as usize];
                for (d, &s) in dst.iter_mut().zip(src) {
                    if s != 0 {
                        *d ^= exp[(log[s as usize] + lc) as usize];
                    }
                }
            }
        }
    }

    /// `row *= c`, elementwise.
    pub fn scale(&self, row: &mut [u32], c: u32) {
        match &self.inner.arith {
            Arith::Prime { p } => {
                let c = c as u64;
                for v in row.iter_mut() {
                    *v = ((*v as u64 * c) % p) as u32;
                }
            }
            Arith::Binary { .. } => {
                for v in row.iter_mut() {
                    *v = self.mul(*v, c);
                }
            }
        }
    }

    pub fn dot(&self, a: &[u32], b: &[u32]) -> u32 {
        a.iter()
            .zip(b)
            .fold(0, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(0..self.order())
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(1..self.order())
    }

    /// Wraps a raw value, rejecting out-of-range input.
    pub fn element(&self, value: u32) -> Result<FieldElement, AlgebraError> {
        if value >= self.order() {
            return Err(AlgebraError::OutOfRange {
                value,
                order: self.order(),
            });
        }
        Ok(FieldElement {
            value,
            field: self.clone(),
        })
    }
}

fn build_tables(poly: u32, order: u32) -> (Vec<u32>, Vec<u32>) {
    let n = (order - 1) as usize;
    // Irreducible but not necessarily primitive: search for a generator.
    for g in 2..order.max(3) {
        let mut exp = vec![0u32; 2 * n.max(1)];
        let mut log = vec![0u32; order as usize];
        let mut x = 1u32;
        let mut ok = true;
        for (i, slot) in exp.iter_mut().take(n).enumerate() {
            if i > 0 && x == 1 {
                ok = false;
                break;
            }
            *slot = x;
            log[x as usize] = i as u32;
            x = clmul_reduce(x, g, poly);
        }
        if ok && x == 1 {
            for i in n..2 * n {
                exp[i] = exp[i - n];
            }
            return (log, exp);
        }
    }
    // GF(2): the only nonzero element is 1.
    (vec![0, 0], vec![1, 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// A value tagged with its field, for checked scalar arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    value: u32,
    field: Field,
}

impl FieldElement {
    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn apply(&self, op: FieldOp, other: &FieldElement) -> Result<FieldElement, AlgebraError> {
        field_arith(self, other, op)
    }
}

pub fn field_arith(
    a: &FieldElement,
    b: &FieldElement,
    op: FieldOp,
) -> Result<FieldElement, AlgebraError> {
    if a.field != b.field {
        return Err(AlgebraError::FieldMismatch {
            left: a.field.spec(),
            right: b.field.spec(),
        });
    }
    let f = &a.field;
    let value = match op {
        FieldOp::Add => f.add(a.value, b.value),
        FieldOp::Sub => f.sub(a.value, b.value),
        FieldOp::Mul => f.mul(a.value, b.value),
        FieldOp::Div => f
            .div(a.value, b.value)
            .ok_or(AlgebraError::DivisionByZero)?,
    };
    Ok(FieldElement {
        value,
        field: f.clone(),
    })
}
