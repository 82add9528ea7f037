use crate::error::{Error, Result};
use crate::ring::{Elem, ModVector, Ring};

/// `sum_j prod_i v_i[j] mod m`, computed directly in `u128` with no shared
/// code path with the protocol arithmetic.
pub fn plaintext_oracle(vectors: &[ModVector], ring: &Ring) -> Result<Elem> {
    let m = ring.modulus();
    let len = vectors
        .first()
        .ok_or_else(|| Error::InputShape("oracle needs at least one vector".into()))?
        .len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::InputShape(format!(
            "oracle got lengths {len} and {}",
            bad.len()
        )));
    }
    let mut total: u128 = 0;
    for j in 0..len {
        let mut prod: u128 = 1;
        for v in vectors {
            prod = prod * (v.as_slice()[j] as u128 % m) % m;
        }
        total = (total + prod) % m;
    }
    Ok(total as Elem)
}
