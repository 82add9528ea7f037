use thiserror::Error;

use crate::protocol::{InstanceId, PartyId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Vectors that must share a length do not.
    #[error("input shape mismatch: {0}")]
    InputShape(String),

    /// Party count or vector length outside the supported range.
    #[error("invalid instance shape: {0}")]
    InstanceShape(String),

    #[error("ttp assignment failed for instance {instance}: {reason}")]
    TtpAssignment {
        instance: InstanceId,
        reason: String,
    },

    /// A message arrived that the recipient's state machine cannot accept.
    #[error("protocol state violation: {0}")]
    ProtocolState(String),

    #[error("routing error: unknown party {0}")]
    Routing(PartyId),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn state(
        party: &PartyId,
        instance: InstanceId,
        reason: impl std::fmt::Display,
    ) -> Self {
        Error::ProtocolState(format!("{party} in instance {instance}: {reason}"))
    }
}
