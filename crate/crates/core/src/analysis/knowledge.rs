//! Syntactic knowledge tracking.
//!
//! A party's knowledge is a set of identifiers. The closure applies two
//! rules to every masked value `X + R` it received: knowing `R` yields `X`,
//! and knowing `X` yields `R`. A collapsed product of masks is known once
//! all of its factors are. This decides exactly the mask-reuse attack class
//! and nothing more; it is not an information-theoretic analysis.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::protocol::{InstanceId, PartyId, RunOutcome};
use crate::shares::MaskId;
use crate::simnet::{GeneratedKind, InputTag, MessageKind, Transcript, View};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// Private vector of data party `P<i>`.
    Input(u32),
    /// Product of the listed masks.
    Product(Vec<MaskId>),
    /// A mask vector together with its scalar share.
    Mask(MaskId),
    /// A received masked value.
    Masked { input: InputTag, mask: MaskId },
}

impl Atom {
    fn of_input(tag: &InputTag) -> Atom {
        match tag {
            InputTag::Data(i) => Atom::Input(*i),
            InputTag::Product(ids) => Atom::Product(ids.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeSet {
    pub party: PartyId,
    pub atoms: BTreeSet<Atom>,
}

impl KnowledgeSet {
    pub fn knows_mask(&self, id: MaskId) -> bool {
        self.atoms.contains(&Atom::Mask(id))
    }

    pub fn knows_input(&self, party: u32) -> bool {
        self.atoms.contains(&Atom::Input(party))
    }

    /// Data parties whose private vector is in the set.
    pub fn known_inputs(&self) -> Vec<u32> {
        self.atoms
            .iter()
            .filter_map(|a| match a {
                Atom::Input(i) => Some(*i),
                _ => None,
            })
            .collect()
    }

    pub fn masked_values(&self) -> impl Iterator<Item = (&InputTag, MaskId)> {
        self.atoms.iter().filter_map(|a| match a {
            Atom::Masked { input, mask } => Some((input, *mask)),
            _ => None,
        })
    }
}

/// Fixpoint of the derivation rules over `view`. The transcript supplies
/// the identifiers behind each received payload.
pub fn knowledge_closure(view: &View, transcript: &Transcript) -> KnowledgeSet {
    let mut atoms = BTreeSet::new();
    for input in &view.own_inputs {
        atoms.insert(Atom::of_input(&input.tag));
    }
    for g in &view.generated {
        if let GeneratedKind::MaskShare { id, .. } = g.kind {
            atoms.insert(Atom::Mask(id));
        }
    }
    let mut masked = Vec::new();
    for obs in &view.received {
        let msg = &transcript.messages()[obs.seq as usize];
        match msg.kind {
            MessageKind::ShareDistribution => {
                atoms.extend(msg.meta.masks.iter().map(|&m| Atom::Mask(m)));
            }
            MessageKind::MaskedMatrixBroadcast => {
                if let (Some(input), Some(&mask)) = (&msg.meta.input, msg.meta.masks.first()) {
                    atoms.insert(Atom::Masked {
                        input: input.clone(),
                        mask,
                    });
                    masked.push((input.clone(), mask));
                }
            }
            _ => {}
        }
    }

    loop {
        let mut grew = false;
        for (input, mask) in &masked {
            if let InputTag::Product(ids) = input {
                if ids.iter().all(|&m| atoms.contains(&Atom::Mask(m))) {
                    grew |= atoms.insert(Atom::Product(ids.clone()));
                }
            }
            let plain = Atom::of_input(input);
            let key = Atom::Mask(*mask);
            if atoms.contains(&key) {
                grew |= atoms.insert(plain);
            } else if atoms.contains(&plain) {
                grew |= atoms.insert(key);
            }
        }
        if !grew {
            break;
        }
    }
    KnowledgeSet {
        party: view.party.clone(),
        atoms,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SafetyViolation {
    /// An instance's commodity server also holds one of its seats.
    ServerParticipates {
        instance: InstanceId,
        server: PartyId,
    },
    /// A value hidden under `mask` reached a party that can remove it.
    MaskDelivered { seq: u64, to: PartyId, mask: MaskId },
}

/// Checks server rotation and mask-recipient safety over a whole run.
/// A secure run must come back empty; a flawed one with children will not.
pub fn mask_safety_violations(outcome: &RunOutcome) -> Vec<SafetyViolation> {
    let mut out = Vec::new();
    for inst in &outcome.instances {
        if inst.involves(&inst.ttp) {
            out.push(SafetyViolation::ServerParticipates {
                instance: inst.id,
                server: inst.ttp.clone(),
            });
        }
    }
    let closures: BTreeMap<&PartyId, KnowledgeSet> = outcome
        .pool
        .iter()
        .map(|p| {
            let view = outcome.view_of(p).expect("pool member");
            (p, knowledge_closure(&view, &outcome.transcript))
        })
        .collect();
    for msg in outcome.transcript.messages() {
        if msg.kind == MessageKind::ShareDistribution || msg.from == msg.to {
            continue;
        }
        for &mask in &msg.meta.masks {
            if closures[&msg.to].knows_mask(mask) {
                out.push(SafetyViolation::MaskDelivered {
                    seq: msg.seq,
                    to: msg.to.clone(),
                    mask,
                });
            }
        }
    }
    out
}
