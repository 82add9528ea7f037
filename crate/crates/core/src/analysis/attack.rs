//! The semi-honest server attack: a commodity server that later sits in a
//! sub-protocol it also served can strip its own masks off what it receives.
//!
//! Works from a [`View`] plus the public instance structure only. The
//! analysis sidecar on messages is never consulted.

use std::collections::{BTreeMap, HashMap};

use crate::protocol::{InputRole, InstanceId, PartyId, ProtocolInstance};
use crate::ring::{ModVector, Ring};
use crate::simnet::{GeneratedKind, MessageKind, Observed, View};

pub type Reconstruction = BTreeMap<PartyId, ModVector>;

fn sender_holds_data(instances: &[ProtocolInstance], msg: &Observed) -> bool {
    let Some(seat) = msg.from_seat else {
        return false;
    };
    instances
        .get(msg.instance.0 as usize)
        .and_then(|i| i.participants.get(seat as usize))
        .is_some_and(|p| p.role == InputRole::Data && p.party == msg.from)
}

fn masked_from_data<'a>(
    view: &'a View,
    instances: &'a [ProtocolInstance],
) -> impl Iterator<Item = &'a Observed> {
    view.received.iter().filter(move |m| {
        m.kind == MessageKind::MaskedMatrixBroadcast && sender_holds_data(instances, m)
    })
}

/// Recovers every data vector the viewer received under a mask it issued
/// itself, keyed by owner.
pub fn merlin_reconstruct(
    view: &View,
    instances: &[ProtocolInstance],
    ring: &Ring,
) -> Reconstruction {
    let issued: HashMap<(InstanceId, u16), &[u64]> = view
        .generated
        .iter()
        .filter_map(|g| match g.kind {
            GeneratedKind::MaskShare { seat, .. } => {
                Some(((g.instance, seat), g.values.as_slice()))
            }
            GeneratedKind::OutputMask => None,
        })
        .collect();
    let mut claimed = Reconstruction::new();
    for msg in masked_from_data(view, instances) {
        let Some(values) = msg.from_seat.and_then(|s| issued.get(&(msg.instance, s))) else {
            continue;
        };
        let mask = ModVector::from_raw(values[..msg.payload.len()].to_vec());
        let masked = ModVector::from_raw(msg.payload.clone());
        if let Ok(plain) = masked.sub(&mask, ring) {
            claimed.entry(msg.from.clone()).or_insert(plain);
        }
    }
    claimed
}

/// What the viewer would claim if it ignored mask freshness: the first
/// masked vector received from each data party minus the first mask it
/// ever issued to that party.
pub fn forced_guesses(view: &View, instances: &[ProtocolInstance], ring: &Ring) -> Reconstruction {
    let mut first_mask: BTreeMap<&PartyId, &[u64]> = BTreeMap::new();
    for g in &view.generated {
        if let GeneratedKind::MaskShare { party, .. } = &g.kind {
            first_mask.entry(party).or_insert(g.values.as_slice());
        }
    }
    let mut guesses = Reconstruction::new();
    for msg in masked_from_data(view, instances) {
        if guesses.contains_key(&msg.from) {
            continue;
        }
        if let Some(values) = first_mask.get(&msg.from) {
            let mask = ModVector::from_raw(values[..msg.payload.len()].to_vec());
            if let Ok(g) = ModVector::from_raw(msg.payload.clone()).sub(&mask, ring) {
                guesses.insert(msg.from.clone(), g);
            }
        }
    }
    guesses
}
