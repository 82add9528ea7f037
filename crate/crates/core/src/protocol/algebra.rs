//! Local computations of the protocol, free of any messaging.

use super::SubInstanceSpec;
use crate::error::{Error, Result};
use crate::ring::{phi_product, Elem, ModVector, Ring};

/// `u_i` of the masked chain, tagged with its 1-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainValue {
    pub index: usize,
    pub value: Elem,
}

fn collect_masked<'a>(
    masked: &'a [Option<&'a ModVector>],
    skip: Option<usize>,
) -> Result<Vec<&'a ModVector>> {
    masked
        .iter()
        .enumerate()
        .filter(|(x, _)| Some(*x) != skip)
        .map(|(x, m)| {
            m.ok_or_else(|| {
                Error::ProtocolState(format!("masked matrix of seat {} missing", x + 1))
            })
        })
        .collect()
}

/// Chain start at data party 1: `phi(D^_2 .. D^_n . D_1) + (n-1) r_1 - v_2`.
///
/// `masked_others` holds `D^_2 .. D^_n` in seat order.
pub fn compute_u1(
    own_data: &ModVector,
    masked_others: &[Option<&ModVector>],
    own_share: Elem,
    output_mask: Elem,
    ring: &Ring,
) -> Result<ChainValue> {
    let n = masked_others.len() + 1;
    let mut factors = collect_masked(masked_others, None)?;
    factors.push(own_data);
    let phi = phi_product(&factors, ring)?;
    let value = ring.sub(
        ring.add(phi, ring.scale(n as u64 - 1, own_share)),
        output_mask,
    );
    Ok(ChainValue { index: 1, value })
}

/// Chain step at party `i` in `2..=n`:
/// `u_{i-1} - phi(prod_{x != i} D^_x . R_i) + (n-1) r_i`.
///
/// `masked_all` is indexed by seat (length `n`); entry `i - 1` is ignored.
pub fn compute_u_step(
    i: usize,
    prev: ChainValue,
    own_mask: &ModVector,
    masked_all: &[Option<&ModVector>],
    own_share: Elem,
    ring: &Ring,
) -> Result<ChainValue> {
    let n = masked_all.len();
    if !(2..=n).contains(&i) {
        return Err(Error::ProtocolState(format!(
            "chain step {i} outside 2..={n}"
        )));
    }
    if prev.index + 1 != i {
        return Err(Error::ProtocolState(format!(
            "chain step {i} received u_{} out of order",
            prev.index
        )));
    }
    let mut factors = collect_masked(masked_all, Some(i - 1))?;
    factors.push(own_mask);
    let phi = phi_product(&factors, ring)?;
    let value = ring.add(
        ring.sub(prev.value, phi),
        ring.scale(n as u64 - 1, own_share),
    );
    Ok(ChainValue { index: i, value })
}

/// Final combination at party 1: `u_n + sum_T c_T * result_T + v_2`.
pub fn aggregate_final(
    u_n: Elem,
    sub_results: &[(&SubInstanceSpec, Option<Elem>)],
    output_mask: Elem,
    ring: &Ring,
) -> Result<Elem> {
    let mut y = u_n;
    for (spec, result) in sub_results {
        let result = result.ok_or_else(|| {
            Error::ProtocolState(format!("sub-protocol {:?} has not reported", spec.kept))
        })?;
        y = ring.add(y, ring.scale(spec.coefficient, result));
    }
    Ok(ring.add(y, output_mask))
}

/// Party 2's reply in the two-party base case: `phi(A^ . B) + r_b - v_2`.
pub(crate) fn base_reply(
    a_hat: &ModVector,
    b: &ModVector,
    share_b: Elem,
    output_mask: Elem,
    ring: &Ring,
) -> Result<Elem> {
    let phi = phi_product(&[a_hat, b], ring)?;
    Ok(ring.sub(ring.add(phi, share_b), output_mask))
}

/// Party 1's share in the two-party base case: `u - phi(R_a . B^) + r_a`.
pub(crate) fn base_recover(
    u: Elem,
    mask_a: &ModVector,
    b_hat: &ModVector,
    share_a: Elem,
    ring: &Ring,
) -> Result<Elem> {
    let phi = phi_product(&[mask_a, b_hat], ring)?;
    Ok(ring.add(ring.sub(u, phi), share_a))
}

/// Every intermediate value of one commodity-based two-party exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoPartyTrace {
    pub a_hat: ModVector,
    pub b_hat: ModVector,
    pub u: Elem,
    pub v1: Elem,
    pub v2: Elem,
    pub result: Elem,
}

/// Runs the two-party rounds locally from fixed randomness.
#[allow(clippy::too_many_arguments)]
pub fn two_party_rounds(
    a: &ModVector,
    b: &ModVector,
    mask_a: &ModVector,
    share_a: Elem,
    mask_b: &ModVector,
    share_b: Elem,
    output_mask: Elem,
    ring: &Ring,
) -> Result<TwoPartyTrace> {
    let a_hat = a.add(mask_a, ring)?;
    let b_hat = b.add(mask_b, ring)?;
    let u = base_reply(&a_hat, b, share_b, output_mask, ring)?;
    let v1 = base_recover(u, mask_a, &b_hat, share_a, ring)?;
    Ok(TwoPartyTrace {
        a_hat,
        b_hat,
        u,
        v1,
        v2: output_mask,
        result: ring.add(v1, output_mask),
    })
}
