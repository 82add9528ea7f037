//! In-process message bus with per-channel FIFO delivery and a totally
//! ordered transcript.
//!
//! Every message carries a [`Meta`] sidecar naming the masks and inputs its
//! payload depends on. Analysis code reads it to check invariants; the
//! [`View`] handed to adversary routines strips it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{InstanceId, PartyId};
use crate::ring::{Elem, ModVector};
use crate::shares::{MaskId, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    ShareDistribution,
    MaskedMatrixBroadcast,
    ChainValue,
    SubResult,
    OutputMaskReveal,
    FinalResult,
}

/// Identity of a seat input, as seen by the analysis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputTag {
    /// Private vector of data party `P<i>`.
    Data(u32),
    /// Entrywise product of the listed masks.
    Product(Vec<MaskId>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    /// Masks (and their paired scalar shares) the payload depends on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<MaskId>,
    /// Input hidden under the mask, for masked matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub from: PartyId,
    pub to: PartyId,
    /// Sending seat within `instance`, when the sender acts as a seat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_seat: Option<u16>,
    /// Receiving seat. For `SubResult` this is a seat of the parent instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_seat: Option<u16>,
    pub instance: InstanceId,
    pub kind: MessageKind,
    pub payload: Vec<Elem>,
    pub meta: Meta,
}

/// A message before the bus stamps it with a sequence number.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub from: PartyId,
    pub to: PartyId,
    pub from_seat: Option<u16>,
    pub to_seat: Option<u16>,
    pub instance: InstanceId,
    pub kind: MessageKind,
    pub payload: Vec<Elem>,
    pub meta: Meta,
}

/// Append-only log of every message in send order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// One JSON object per line: `{seq, from, to, ..., kind, payload, meta}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut out, m)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let messages = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Transcript { messages })
    }
}

/// The bus. Channels are `(from, to)` pairs; each is FIFO.
#[derive(Debug, Default)]
pub struct Network {
    parties: BTreeSet<PartyId>,
    transcript: Transcript,
    /// Undelivered transcript indices, keyed by seq.
    pending: BTreeMap<u64, usize>,
    channels: BTreeMap<(PartyId, PartyId), VecDeque<u64>>,
    delivered: u64,
}

impl Network {
    pub fn new(parties: impl IntoIterator<Item = PartyId>) -> Self {
        Network {
            parties: parties.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn send(&mut self, env: Envelope) -> Result<u64> {
        for p in [&env.from, &env.to] {
            if !self.parties.contains(p) {
                return Err(Error::Routing(p.clone()));
            }
        }
        let seq = self.transcript.messages.len() as u64;
        self.channels
            .entry((env.from.clone(), env.to.clone()))
            .or_default()
            .push_back(seq);
        self.pending.insert(seq, seq as usize);
        self.transcript.messages.push(Message {
            seq,
            from: env.from,
            to: env.to,
            from_seat: env.from_seat,
            to_seat: env.to_seat,
            instance: env.instance,
            kind: env.kind,
            payload: env.payload,
            meta: env.meta,
        });
        Ok(seq)
    }

    fn take(&mut self, seq: u64) -> Message {
        let idx = self.pending.remove(&seq).expect("pending message");
        self.delivered += 1;
        self.transcript.messages[idx].clone()
    }

    /// Pops the lowest-seq undelivered message.
    pub fn deliver_next(&mut self) -> Option<Message> {
        let (&seq, _) = self.pending.first_key_value()?;
        let msg = &self.transcript.messages[seq as usize];
        let key = (msg.from.clone(), msg.to.clone());
        let head = self.channels.get_mut(&key).and_then(VecDeque::pop_front);
        debug_assert_eq!(head, Some(seq));
        Some(self.take(seq))
    }

    /// Pops the head of a uniformly chosen non-empty channel. Any order this
    /// produces respects per-channel FIFO.
    pub fn deliver_random(&mut self, rng: &mut Rng) -> Option<Message> {
        let live: Vec<&(PartyId, PartyId)> = self
            .channels
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, _)| k)
            .collect();
        if live.is_empty() {
            return None;
        }
        let key = live[(rng.next_u64() % live.len() as u64) as usize].clone();
        let seq = self.channels.get_mut(&key)?.pop_front()?;
        Some(self.take(seq))
    }

    pub fn is_quiescent(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

/// A seat input the party holds locally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnInput {
    pub instance: InstanceId,
    pub seat: u16,
    pub vector: ModVector,
    pub tag: InputTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratedKind {
    /// Mask handed to `seat` of the instance, with its scalar share.
    MaskShare {
        seat: u16,
        party: PartyId,
        id: MaskId,
    },
    OutputMask,
}

/// Randomness the party drew itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedValue {
    pub instance: InstanceId,
    pub kind: GeneratedKind,
    /// Mask entries followed by the scalar share, or the single output mask.
    pub values: Vec<Elem>,
}

/// A received message without its analysis sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observed {
    pub seq: u64,
    pub from: PartyId,
    pub from_seat: Option<u16>,
    pub to_seat: Option<u16>,
    pub instance: InstanceId,
    pub kind: MessageKind,
    pub payload: Vec<Elem>,
}

impl From<&Message> for Observed {
    fn from(m: &Message) -> Self {
        Observed {
            seq: m.seq,
            from: m.from.clone(),
            from_seat: m.from_seat,
            to_seat: m.to_seat,
            instance: m.instance,
            kind: m.kind,
            payload: m.payload.clone(),
        }
    }
}

/// Everything one party legitimately sees in a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub party: PartyId,
    pub own_inputs: Vec<OwnInput>,
    pub generated: Vec<GeneratedValue>,
    pub received: Vec<Observed>,
}

impl View {
    pub(crate) fn project(
        party: PartyId,
        own_inputs: Vec<OwnInput>,
        generated: Vec<GeneratedValue>,
        transcript: &Transcript,
    ) -> Self {
        let received = transcript
            .messages()
            .iter()
            .filter(|m| m.to == party)
            .map(Observed::from)
            .collect();
        View {
            party,
            own_inputs,
            generated,
            received,
        }
    }

    pub fn received_in(&self, instance: InstanceId) -> impl Iterator<Item = &Observed> {
        self.received.iter().filter(move |m| m.instance == instance)
    }
}
