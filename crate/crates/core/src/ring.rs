//! Modular arithmetic over `Z_m` and the diagonal-matrix encoding.
//!
//! A diagonal matrix is stored as its diagonal, so multiplying matrices is an
//! entrywise product and the trace of a product is the sum of entrywise
//! products. All values are `u64` residues; the modulus may be anything in
//! `[2, 2^64]`, with `2^64` (native wrap-around) as the default.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Elem = u64;

const WRAP: u128 = 1 << 64;

/// The residue ring `Z_m` for `2 <= m <= 2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u128", into = "u128")]
pub struct Ring {
    modulus: u128,
}

impl Default for Ring {
    fn default() -> Self {
        Ring::wrapping()
    }
}

impl Ring {
    /// `Z_{2^64}`.
    pub const fn wrapping() -> Self {
        Ring { modulus: WRAP }
    }

    pub fn new(modulus: u128) -> Result<Self> {
        if !(2..=WRAP).contains(&modulus) {
            return Err(Error::Config(format!(
                "modulus must lie in [2, 2^64], got {modulus}"
            )));
        }
        Ok(Ring { modulus })
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    #[inline]
    fn is_wrapping(&self) -> bool {
        self.modulus == WRAP
    }

    #[inline]
    pub fn reduce(&self, x: u128) -> Elem {
        if self.is_wrapping() {
            x as u64
        } else {
            (x % self.modulus) as u64
        }
    }

    /// Maps a signed integer to its residue.
    pub fn from_i128(&self, x: i128) -> Elem {
        let m = self.modulus as i128;
        let r = x.rem_euclid(m);
        r as u64
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        if self.is_wrapping() {
            a.wrapping_add(b)
        } else {
            self.reduce(a as u128 + b as u128)
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        if self.is_wrapping() {
            a.wrapping_sub(b)
        } else {
            self.add(a, self.neg(b))
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        if self.is_wrapping() {
            a.wrapping_neg()
        } else if a == 0 {
            0
        } else {
            (self.modulus - a as u128) as u64
        }
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if self.is_wrapping() {
            a.wrapping_mul(b)
        } else {
            self.reduce(a as u128 * b as u128)
        }
    }

    /// `k * a` for a small non-negative integer `k`.
    pub fn scale(&self, k: u64, a: Elem) -> Elem {
        self.mul(self.reduce(k as u128), a)
    }

    pub fn contains(&self, a: Elem) -> bool {
        (a as u128) < self.modulus
    }
}

impl TryFrom<u128> for Ring {
    type Error = Error;

    fn try_from(m: u128) -> Result<Self> {
        Ring::new(m)
    }
}

impl From<Ring> for u128 {
    fn from(r: Ring) -> u128 {
        r.modulus
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wrapping() {
            f.write_str("2^64")
        } else {
            write!(f, "{}", self.modulus)
        }
    }
}

/// Accepts a decimal modulus or a power of two written `2^k`.
impl FromStr for Ring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unparseable modulus {s:?}"));
        let modulus = if let Some(exp) = s.strip_prefix("2^") {
            let k: u32 = exp.trim().parse().map_err(|_| bad())?;
            if k > 64 {
                return Err(Error::Config(format!("modulus 2^{k} exceeds 2^64")));
            }
            1u128 << k
        } else {
            s.parse::<u128>().map_err(|_| bad())?
        };
        Ring::new(modulus)
    }
}

/// Fixed-length vector of ring residues; the diagonal of a diagonal matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModVector(Vec<Elem>);

impl ModVector {
    /// Builds a vector, rejecting empty input and entries outside the ring.
    pub fn new(entries: Vec<Elem>, ring: &Ring) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InstanceShape("vectors must have length >= 1".into()));
        }
        if let Some(bad) = entries.iter().find(|&&e| !ring.contains(e)) {
            return Err(Error::InputShape(format!(
                "entry {bad} is not reduced modulo {ring}"
            )));
        }
        Ok(ModVector(entries))
    }

    /// Reduces arbitrary signed integers into the ring.
    pub fn reduced(entries: &[i128], ring: &Ring) -> Result<Self> {
        ModVector::new(entries.iter().map(|&x| ring.from_i128(x)).collect(), ring)
    }

    pub(crate) fn from_raw(entries: Vec<Elem>) -> Self {
        debug_assert!(!entries.is_empty());
        ModVector(entries)
    }

    pub fn zeros(len: usize) -> Self {
        ModVector(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        ModVector(vec![1; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Elem] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Elem> {
        self.0
    }

    fn zip_with(&self, other: &ModVector, f: impl Fn(Elem, Elem) -> Elem) -> Result<ModVector> {
        check_len(self.len(), other.len())?;
        Ok(ModVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &ModVector, ring: &Ring) -> Result<ModVector> {
        self.zip_with(other, |a, b| ring.add(a, b))
    }

    pub fn sub(&self, other: &ModVector, ring: &Ring) -> Result<ModVector> {
        self.zip_with(other, |a, b| ring.sub(a, b))
    }

    /// Entrywise product, i.e. the product of the two diagonal matrices.
    pub fn hadamard(&self, other: &ModVector, ring: &Ring) -> Result<ModVector> {
        self.zip_with(other, |a, b| ring.mul(a, b))
    }
}

impl AsRef<[Elem]> for ModVector {
    fn as_ref(&self) -> &[Elem] {
        &self.0
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InputShape(format!("length {a} vs length {b}")));
    }
    Ok(())
}

/// Trace of the product of the diagonal matrices: `sum_j prod_i v_i[j]`.
pub fn phi_product<V: AsRef<[Elem]>>(vectors: &[V], ring: &Ring) -> Result<Elem> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InputShape("phi of an empty product".into()))?
        .as_ref();
    for v in &vectors[1..] {
        check_len(first.len(), v.as_ref().len())?;
    }
    let mut acc = 0;
    for (j, &x) in first.iter().enumerate() {
        let mut prod = x;
        for v in &vectors[1..] {
            prod = ring.mul(prod, v.as_ref()[j]);
        }
        acc = ring.add(acc, prod);
    }
    Ok(acc)
}

/// Elementwise product of all vectors (a collapsed product of masks).
pub fn hadamard_all<V: AsRef<[Elem]>>(vectors: &[V], ring: &Ring) -> Result<ModVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InputShape("empty product".into()))?
        .as_ref();
    let mut acc = first.to_vec();
    for v in &vectors[1..] {
        let v = v.as_ref();
        check_len(acc.len(), v.len())?;
        for (a, &b) in acc.iter_mut().zip(v) {
            *a = ring.mul(*a, b);
        }
    }
    Ok(ModVector(acc))
}

/// `v + r`, the masked form of `v`.
pub fn mask(v: &ModVector, r: &ModVector, ring: &Ring) -> Result<ModVector> {
    v.add(r, ring)
}

pub fn unmask(masked: &ModVector, r: &ModVector, ring: &Ring) -> Result<ModVector> {
    masked.sub(r, ring)
}
