//! Formal expansion of the masked chain.
//!
//! `D_i` and `R_i` are indeterminates. Because diagonal entries commute and
//! every chain term touches each position exactly once, a monomial is fully
//! described by the set `T` of positions contributing `D` rather than `R`;
//! `mixed_T` denotes `phi(prod_{i in T} D_i . prod_{j not in T} R_j)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// What occupies one position of a trace-product term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Data,
    Mask,
    /// `D + R`.
    Masked,
}

/// Expands `phi(prod_i f_i)` into `mixed_T` classes (bitmask of `T`).
pub fn expand_term(factors: &[Factor]) -> BTreeMap<u64, i64> {
    let mut classes = BTreeMap::from([(0u64, 1i64)]);
    for (pos, f) in factors.iter().enumerate() {
        let bit = 1u64 << pos;
        let mut next = BTreeMap::new();
        for (t, c) in classes {
            if matches!(f, Factor::Data | Factor::Masked) {
                *next.entry(t | bit).or_insert(0) += c;
            }
            if matches!(f, Factor::Mask | Factor::Masked) {
                *next.entry(t).or_insert(0) += c;
            }
        }
        classes = next;
    }
    classes
}

/// `u_n + v_2` of an `n`-party chain as a combination of `mixed_T` classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicExpansion {
    pub n: usize,
    /// Coefficient of every class `T ⊆ [n]`, zeros included. The empty set
    /// is the all-random class after substituting `sum r_i = phi(prod R)`.
    pub coefficients: BTreeMap<u64, i64>,
    /// Coefficient of the all-random class before share substitution.
    pub all_random_before_shares: i64,
    /// The common coefficient the scalar shares carried.
    pub share_coefficient: i64,
}

impl SymbolicExpansion {
    pub fn coefficient(&self, t: u64) -> i64 {
        self.coefficients.get(&t).copied().unwrap_or(0)
    }

    pub fn full_class(&self) -> u64 {
        (1 << self.n) - 1
    }

    /// `u_n + v_2 - phi(prod D)`: every class except `T = [n]`.
    pub fn residual(&self) -> BTreeMap<u64, i64> {
        let full = self.full_class();
        self.coefficients
            .iter()
            .filter(|(&t, _)| t != full)
            .map(|(&t, &c)| (t, c))
            .collect()
    }
}

/// Expands the chain `u_1 .. u_n` formally, then substitutes the share sum.
///
/// Fails if the shares do not all carry the same coefficient, since only
/// their sum is known.
pub fn symbolic_expand(n: usize) -> Result<SymbolicExpansion> {
    if !(2..=8).contains(&n) {
        return Err(Error::InstanceShape(format!(
            "symbolic expansion supports 2..=8 parties, got {n}"
        )));
    }
    let mut classes: BTreeMap<u64, i64> = (0..1u64 << n).map(|t| (t, 0)).collect();
    let mut shares = vec![0i64; n];
    let add = |classes: &mut BTreeMap<u64, i64>, term: BTreeMap<u64, i64>, sign: i64| {
        for (t, c) in term {
            *classes.get_mut(&t).expect("every class present") += sign * c;
        }
    };
    let k = n as i64 - 1;

    // u_1 = phi(D^_2 .. D^_n . D_1) + (n-1) r_1 - v_2
    let mut first = vec![Factor::Masked; n];
    first[0] = Factor::Data;
    add(&mut classes, expand_term(&first), 1);
    shares[0] += k;
    // u_i = u_{i-1} - phi(prod_{x != i} D^_x . R_i) + (n-1) r_i
    for i in 1..n {
        let mut term = vec![Factor::Masked; n];
        term[i] = Factor::Mask;
        add(&mut classes, expand_term(&term), -1);
        shares[i] += k;
    }
    // + v_2 cancels the -v_2 of u_1.

    let share_coefficient = shares[0];
    if shares.iter().any(|&c| c != share_coefficient) {
        return Err(Error::ProtocolState(format!(
            "share coefficients {shares:?} are not uniform"
        )));
    }
    let all_random_before_shares = classes[&0];
    *classes.get_mut(&0).expect("empty class") += share_coefficient;
    Ok(SymbolicExpansion {
        n,
        coefficients: classes,
        all_random_before_shares,
        share_coefficient,
    })
}

/// The coefficient the chain must leave on `mixed_T` for the aggregation
/// weights to cancel it: `-(n-1-|T|)` for `1 <= |T| <= n-2`, `+1` on the
/// full set, `0` otherwise.
pub fn expected_chain_coefficient(n: usize, t: u64) -> i64 {
    let size = t.count_ones() as usize;
    if size == n {
        1
    } else if (1..=n.saturating_sub(2)).contains(&size) {
        -((n - 1 - size) as i64)
    } else {
        0
    }
}
