//! The n-party scalar product protocol: instance bookkeeping, the pure
//! arithmetic each party performs, and the message-driven engine that runs
//! whole protocol trees over [`crate::simnet`].

mod algebra;
mod engine;
mod instance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use algebra::{
    aggregate_final, compute_u1, compute_u_step, two_party_rounds, ChainValue, TwoPartyTrace,
};
pub use engine::{run_protocol, Delivery, RunOptions, RunOutcome, DEFAULT_TTP};
pub use instance::{
    assign_ttp, determine_sub_instances, InputRole, Lifecycle, Participant, ProtocolInstance,
    SubInstanceSpec,
};

use crate::error::Error;

/// A protocol participant: a data holder `P<i>` (1-based) or a commodity
/// server identified by label. Data parties order before servers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    Data(u32),
    Ttp(String),
}

impl PartyId {
    pub fn is_data(&self) -> bool {
        matches!(self, PartyId::Data(_))
    }

    pub fn data_index(&self) -> Option<u32> {
        match self {
            PartyId::Data(i) => Some(*i),
            PartyId::Ttp(_) => None,
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Data(i) => write!(f, "P{i}"),
            PartyId::Ttp(label) => write!(f, "ttp:{label}"),
        }
    }
}

impl FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if let Some(label) = s.strip_prefix("ttp:") {
            if !label.is_empty() {
                return Ok(PartyId::Ttp(label.to_string()));
            }
        } else if let Some(Ok(i)) = s.strip_prefix('P').map(str::parse::<u32>) {
            if i >= 1 {
                return Ok(PartyId::Data(i));
            }
        }
        Err(Error::Config(format!("bad party id {s:?}")))
    }
}

impl Serialize for PartyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartyId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// How sub-protocol commodity servers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// A party outside the sub-protocol generates its randomness.
    Secure,
    /// The parent's server is reused even when it holds a sub-protocol
    /// input. Exists to reproduce the reconstruction attack.
    Flawed,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Secure => "secure",
            Policy::Flawed => "flawed",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "secure" => Ok(Policy::Secure),
            "flawed" => Ok(Policy::Flawed),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}
