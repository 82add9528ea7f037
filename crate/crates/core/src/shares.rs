//! Correlated randomness handed out by a commodity server: uniform mask
//! vectors, additive shares of the masks' trace-product, and output masks.
//!
//! Randomness comes from [`Rng`], a seeded ChaCha20 stream. It is
//! reproducible by construction and is **not** a source of cryptographic
//! secrecy for any real deployment: this crate is a simulator.

use std::fmt;

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::PartyId;
use crate::ring::{phi_product, Elem, ModVector, Ring};

/// Counter-based deterministic generator. One master seed plus a stream id
/// gives an independent, replayable stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform residue of `ring`.
    pub fn element(&mut self, ring: &Ring) -> Elem {
        if ring.modulus() == 1 << 64 {
            self.inner.next_u64()
        } else {
            self.inner.gen_range(0..ring.modulus()) as u64
        }
    }

    pub fn vector(&mut self, len: usize, ring: &Ring) -> ModVector {
        ModVector::from_raw((0..len).map(|_| self.element(ring)).collect())
    }
}

/// Run-unique identifier of one mask vector and its paired scalar share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskId(pub u64);

impl fmt::Display for MaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Hands out fresh [`MaskId`]s; one allocator per run.
#[derive(Debug, Default)]
pub struct MaskIdAllocator {
    next: u64,
}

impl MaskIdAllocator {
    pub fn fresh(&mut self) -> MaskId {
        let id = MaskId(self.next);
        self.next += 1;
        id
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// What one participant receives from the commodity server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareBundle {
    pub party: PartyId,
    pub mask_matrix: ModVector,
    pub scalar_share: Elem,
    pub mask_id: MaskId,
}

/// The additive blind `v_2` kept back by one party until the final sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputMask {
    pub value: Elem,
    pub holder: PartyId,
}

impl OutputMask {
    pub fn draw(holder: PartyId, ring: &Ring, rng: &mut Rng) -> Self {
        OutputMask {
            value: rng.element(ring),
            holder,
        }
    }
}

/// Samples one mask per recipient and splits `phi(prod R_i)` additively
/// among them. Recipients are listed by seat; a party may appear twice.
pub fn generate_share_bundles(
    recipients: &[PartyId],
    len: usize,
    ring: &Ring,
    rng: &mut Rng,
    ids: &mut MaskIdAllocator,
) -> Result<Vec<ShareBundle>> {
    if recipients.len() < 2 {
        return Err(Error::InstanceShape(format!(
            "share generation needs at least 2 parties, got {}",
            recipients.len()
        )));
    }
    if len == 0 {
        return Err(Error::InstanceShape("vector length must be >= 1".into()));
    }
    let masks: Vec<ModVector> = recipients.iter().map(|_| rng.vector(len, ring)).collect();
    let target = phi_product(&masks, ring)?;
    let shares = split_value(target, recipients.len(), ring, rng)?;
    Ok(recipients
        .iter()
        .zip(masks)
        .zip(shares)
        .map(|((party, mask_matrix), scalar_share)| ShareBundle {
            party: party.clone(),
            mask_matrix,
            scalar_share,
            mask_id: ids.fresh(),
        })
        .collect())
}

/// Splits `v` into `n` additive shares: the first `n - 1` uniform, the last
/// fixing the sum.
pub fn split_value(v: Elem, n: usize, ring: &Ring, rng: &mut Rng) -> Result<Vec<Elem>> {
    if n == 0 {
        return Err(Error::InstanceShape("cannot split into 0 shares".into()));
    }
    let mut shares: Vec<Elem> = (0..n - 1).map(|_| rng.element(ring)).collect();
    shares.push(closing_share(v, &shares, ring));
    Ok(shares)
}

/// The share that makes `leading` sum to `target`.
pub fn closing_share(target: Elem, leading: &[Elem], ring: &Ring) -> Elem {
    leading.iter().fold(target, |acc, &s| ring.sub(acc, s))
}
