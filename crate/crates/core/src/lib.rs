//! Simulation laboratory for the n-party scalar product protocol.
//!
//! Data parties hold private vectors `D_1 .. D_n` and jointly compute
//! `phi(D_1 ... D_n) = sum_j prod_i D_i[j]` with help from a commodity
//! server that hands out masks and additive shares. Mixed terms left over
//! by the masked chain are computed by recursive sub-protocols, each served
//! by a party outside it.
//!
//! - [`ring`]: residue arithmetic and the trace-product map.
//! - [`shares`]: commodity-server randomness.
//! - [`protocol`]: instance structure, local computations, and the engine.
//! - [`simnet`]: message bus, transcripts, and per-party views.
//! - [`analysis`]: oracles, knowledge tracking, the reconstruction attack,
//!   and the instance census.
//! - [`config`] / [`cli`]: the batch front end.
//!
//! Randomness is a seeded ChaCha stream so every run replays exactly. It is
//! not meant to protect real data.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod protocol;
pub mod ring;
pub mod shares;
pub mod simnet;

pub use error::{Error, Result};
pub use protocol::{run_protocol, PartyId, Policy, RunOptions, RunOutcome};
pub use ring::{phi_product, ModVector, Ring};
