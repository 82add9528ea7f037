//! Run configuration in TOML.
//!
//! ```toml
//! modulus = "2^64"   # or a decimal such as "251"
//! seed = 7
//! policy = "secure"  # or "flawed"
//! verify = true
//! transcript = "run.jsonl"
//!
//! [[party]]
//! name = "alice"
//! vector = [1, 0, 1]
//!
//! [[party]]
//! name = "bob"
//! vector = [1, 1, 0]
//! ```
//!
//! Entries may be negative or exceed the modulus; they are reduced on load.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::protocol::{Policy, RunOptions, DEFAULT_TTP};
use crate::ring::{ModVector, Ring};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedVector {
    pub name: String,
    pub vector: ModVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub ring: Ring,
    pub seed: u64,
    pub policy: Policy,
    pub ttp_label: String,
    /// Data parties in protocol order: the first is `P1`.
    pub parties: Vec<NamedVector>,
    pub transcript: Option<PathBuf>,
    pub verify: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    modulus: Option<String>,
    seed: Option<u64>,
    policy: Option<String>,
    ttp: Option<String>,
    transcript: Option<PathBuf>,
    verify: Option<bool>,
    #[serde(default)]
    party: Vec<RawParty>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParty {
    name: String,
    vector: Vec<i64>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let ring = match &raw.modulus {
        Some(m) => m.parse()?,
        None => Ring::wrapping(),
    };
    let policy = match &raw.policy {
        Some(p) => p.parse()?,
        None => Policy::Secure,
    };
    RunConfig::build(
        ring,
        raw.seed.unwrap_or(0),
        policy,
        raw.ttp.unwrap_or_else(|| DEFAULT_TTP.to_string()),
        raw.party
            .into_iter()
            .map(|p| (p.name, p.vector.into_iter().map(i128::from).collect()))
            .collect(),
        raw.transcript,
        raw.verify.unwrap_or(false),
    )
}

impl RunConfig {
    /// Validates and reduces raw party vectors.
    pub fn build(
        ring: Ring,
        seed: u64,
        policy: Policy,
        ttp_label: String,
        parties: Vec<(String, Vec<i128>)>,
        transcript: Option<PathBuf>,
        verify: bool,
    ) -> Result<Self> {
        if parties.len() < 2 {
            return Err(Error::InstanceShape(format!(
                "need at least 2 parties, config has {}",
                parties.len()
            )));
        }
        if ttp_label.is_empty() {
            return Err(Error::Config("ttp label must not be empty".into()));
        }
        let (first_name, first) = &parties[0];
        for (name, v) in &parties {
            if v.len() != first.len() {
                return Err(Error::InputShape(format!(
                    "party {name:?} has {} entries but {first_name:?} has {}",
                    v.len(),
                    first.len()
                )));
            }
            if parties.iter().filter(|(n, _)| n == name).count() > 1 {
                return Err(Error::Config(format!("duplicate party name {name:?}")));
            }
        }
        let parties = parties
            .into_iter()
            .map(|(name, v)| {
                let vector = ModVector::reduced(&v, &ring).map_err(|e| match e {
                    Error::InstanceShape(_) => {
                        Error::InstanceShape(format!("party {name:?} has an empty vector"))
                    }
                    other => other,
                })?;
                Ok(NamedVector { name, vector })
            })
            .collect::<Result<_>>()?;
        Ok(RunConfig {
            ring,
            seed,
            policy,
            ttp_label,
            parties,
            transcript,
            verify,
        })
    }

    pub fn n(&self) -> usize {
        self.parties.len()
    }

    pub fn vectors(&self) -> Vec<ModVector> {
        self.parties.iter().map(|p| p.vector.clone()).collect()
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            ttp_label: self.ttp_label.clone(),
            ..RunOptions::new(self.ring, self.seed, self.policy)
        }
    }

    /// Name of data party `P<index>`.
    pub fn name_of(&self, index: u32) -> Option<&str> {
        self.parties
            .get(index.checked_sub(1)? as usize)
            .map(|p| p.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = parse_config(
            r#"
            policy = "secure"
            [[party]]
            name = "alice"
            vector = [1, 0, 1]
            [[party]]
            name = "bob"
            vector = [1, 1, 0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.n(), 2);
        assert_eq!(cfg.ring, Ring::wrapping());
        assert_eq!(cfg.policy, Policy::Secure);
        assert_eq!(cfg.name_of(2), Some("bob"));
        assert_eq!(cfg.name_of(0), None);
        assert!(!cfg.verify);
    }

    #[test]
    fn entries_are_reduced() {
        let cfg = parse_config(
            r#"
            modulus = "7"
            [[party]]
            name = "a"
            vector = [-1, 15]
            [[party]]
            name = "b"
            vector = [7, 3]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.parties[0].vector.as_slice(), &[6, 1]);
        assert_eq!(cfg.parties[1].vector.as_slice(), &[0, 3]);
    }

    #[test]
    fn length_mismatch_names_parties() {
        let err = parse_config(
            r#"
            [[party]]
            name = "alice"
            vector = [1, 2]
            [[party]]
            name = "bob"
            vector = [1, 2, 3]
            "#,
        )
        .unwrap_err();
        match err {
            Error::InputShape(msg) => assert!(msg.contains("bob") && msg.contains("alice")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_policy() {
        let err = parse_config(
            r#"
            policy = "paranoid"
            [[party]]
            name = "a"
            vector = [1]
            [[party]]
            name = "b"
            vector = [1]
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn too_few_parties() {
        let err = parse_config("[[party]]\nname = \"a\"\nvector = [1]\n").unwrap_err();
        assert!(matches!(err, Error::InstanceShape(_)));
        assert!(matches!(
            parse_config("").unwrap_err(),
            Error::InstanceShape(_)
        ));
    }

    #[test]
    fn flawed_two_party_is_valid() {
        let cfg = parse_config(
            r#"
            policy = "flawed"
            [[party]]
            name = "a"
            vector = [1]
            [[party]]
            name = "b"
            vector = [1]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.policy, Policy::Flawed);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_config("seed = "), Err(Error::Config(_))));
        assert!(matches!(parse_config("colour = 3"), Err(Error::Config(_))));
        let dup = "[[party]]\nname = \"a\"\nvector = [1]\n[[party]]\nname = \"a\"\nvector = [2]\n";
        assert!(matches!(parse_config(dup), Err(Error::Config(_))));
    }
}
