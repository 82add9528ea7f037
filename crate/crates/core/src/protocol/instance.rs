use serde::Serialize;

use super::{InstanceId, PartyId, Policy};
use crate::error::{Error, Result};

/// What a seat's input vector is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputRole {
    /// The party's own private data vector.
    Data,
    /// The product of a parent instance's masks, held by the parent's server.
    CollapsedProduct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Participant {
    pub party: PartyId,
    pub role: InputRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Lifecycle {
    AwaitingShares,
    Masking,
    UChain,
    SubProtocols,
    Aggregating,
    Done,
}

/// Public description of one (sub-)protocol run. Input vectors stay with
/// the parties; only the structure lives here.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolInstance {
    pub id: InstanceId,
    /// Ordered seats. Seat 0 initiates the chain and aggregates.
    pub participants: Vec<Participant>,
    pub ttp: PartyId,
    pub parent: Option<InstanceId>,
    /// The mixed term this instance computes for its parent.
    pub spec: Option<SubInstanceSpec>,
    pub depth: usize,
    pub len: usize,
    pub state: Lifecycle,
    pub children: Vec<InstanceId>,
}

impl ProtocolInstance {
    pub fn n(&self) -> usize {
        self.participants.len()
    }

    pub fn parties(&self) -> impl Iterator<Item = &PartyId> {
        self.participants.iter().map(|p| &p.party)
    }

    /// Weight of this instance's result in the parent's aggregate.
    pub fn coefficient(&self) -> u64 {
        self.spec.as_ref().map_or(1, |s| s.coefficient)
    }

    pub fn involves(&self, party: &PartyId) -> bool {
        self.parties().any(|p| p == party)
    }
}

/// One mixed-term sub-protocol: the parent seats that keep their plaintext
/// input (0-based, ascending) and the multiplicity of the term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SubInstanceSpec {
    pub kept: Vec<usize>,
    pub coefficient: u64,
}

impl SubInstanceSpec {
    /// `kept` as a bitmask over parent seats.
    pub fn bits(&self) -> u64 {
        self.kept.iter().fold(0, |acc, &s| acc | (1 << s))
    }
}

/// Every subset `T` of the `n` parent seats with `1 <= |T| <= n - 2`,
/// weighted by `n - 1 - |T|`. Ordered by size, then lexicographically.
pub fn determine_sub_instances(n: usize) -> Vec<SubInstanceSpec> {
    let mut specs = Vec::new();
    if n < 3 {
        return specs;
    }
    for size in 1..=n - 2 {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            specs.push(SubInstanceSpec {
                kept: combo.clone(),
                coefficient: (n - 1 - size) as u64,
            });
            // next combination in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| combo[i] < n - size + i) else {
                break;
            };
            combo[i] += 1;
            for j in i + 1..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    specs
}

/// Picks the commodity server for a child instance.
///
/// `pool` is the run's global party list in [`PartyId`] order.
pub fn assign_ttp(
    child: &[PartyId],
    policy: Policy,
    parent_ttp: &PartyId,
    pool: &[PartyId],
) -> Result<PartyId> {
    match policy {
        Policy::Flawed => Ok(parent_ttp.clone()),
        Policy::Secure => {
            let mut sorted: Vec<&PartyId> = pool.iter().collect();
            sorted.sort();
            sorted
                .into_iter()
                .find(|p| !child.contains(p))
                .cloned()
                .ok_or_else(|| Error::TtpAssignment {
                    instance: InstanceId(u32::MAX),
                    reason: "every party in the pool participates".into(),
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn merlin() -> PartyId {
        PartyId::Ttp("merlin".into())
    }

    fn pool(n: u32) -> Vec<PartyId> {
        let mut p: Vec<_> = (1..=n).map(PartyId::Data).collect();
        p.push(merlin());
        p
    }

    #[test]
    fn no_children_below_three() {
        assert!(determine_sub_instances(2).is_empty());
        assert!(determine_sub_instances(1).is_empty());
    }

    #[test]
    fn three_party_children() {
        let specs = determine_sub_instances(3);
        let got: Vec<_> = specs
            .iter()
            .map(|s| (s.kept.clone(), s.coefficient))
            .collect();
        assert_eq!(got, vec![(vec![0], 1), (vec![1], 1), (vec![2], 1)]);
    }

    #[test]
    fn four_party_children() {
        let specs = determine_sub_instances(4);
        assert_eq!(specs.len(), 10);
        assert_eq!(
            specs
                .iter()
                .filter(|s| s.kept.len() == 1 && s.coefficient == 2)
                .count(),
            4
        );
        assert_eq!(
            specs
                .iter()
                .filter(|s| s.kept.len() == 2 && s.coefficient == 1)
                .count(),
            6
        );
    }

    #[test]
    fn child_counts_follow_subset_formula() {
        for n in 2..=12usize {
            let specs = determine_sub_instances(n);
            let expected = if n < 3 { 0 } else { (1usize << n) - n - 2 };
            assert_eq!(specs.len(), expected, "n={n}");
            let distinct: HashSet<u64> = specs.iter().map(SubInstanceSpec::bits).collect();
            assert_eq!(distinct.len(), specs.len());
            for s in &specs {
                assert!(!s.kept.is_empty() && s.kept.len() <= n - 2);
                assert!(s.kept.windows(2).all(|w| w[0] < w[1]));
                assert_eq!(s.coefficient as usize, n - 1 - s.kept.len());
                assert!(s.coefficient >= 1);
            }
        }
        assert_eq!(determine_sub_instances(5).len(), 25);
    }

    #[test]
    fn secure_rotation_picks_lowest_outsider() {
        let child = [PartyId::Data(1), merlin()];
        assert_eq!(
            assign_ttp(&child, Policy::Secure, &merlin(), &pool(3)).unwrap(),
            PartyId::Data(2)
        );
        let child = [PartyId::Data(2), PartyId::Data(3), merlin()];
        assert_eq!(
            assign_ttp(&child, Policy::Secure, &merlin(), &pool(4)).unwrap(),
            PartyId::Data(1)
        );
    }

    #[test]
    fn flawed_rotation_reuses_parent_server() {
        let child = [PartyId::Data(1), merlin()];
        assert_eq!(
            assign_ttp(&child, Policy::Flawed, &merlin(), &pool(3)).unwrap(),
            merlin()
        );
    }

    #[test]
    fn secure_rotation_fails_without_outsider() {
        let all = pool(2);
        assert!(matches!(
            assign_ttp(&all, Policy::Secure, &merlin(), &all),
            Err(Error::TtpAssignment { .. })
        ));
    }
}
