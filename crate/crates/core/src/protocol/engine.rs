//! Message-driven execution of a whole protocol tree.
//!
//! Each party is an isolated state machine holding one `Seat` per instance
//! position it occupies. Parties only interact through the [`Network`];
//! the engine delivers messages, applies the effects handlers return, and
//! spawns sub-instances when an aggregator asks for them.

use std::collections::{BTreeMap, HashMap};

use super::algebra::{base_recover, base_reply, ChainValue};
use super::{
    aggregate_final, assign_ttp, compute_u1, compute_u_step, determine_sub_instances, InputRole,
    InstanceId, Lifecycle, Participant, PartyId, Policy, ProtocolInstance, SubInstanceSpec,
};
use crate::error::{Error, Result};
use crate::ring::{hadamard_all, Elem, ModVector, Ring};
use crate::shares::{generate_share_bundles, MaskIdAllocator, Rng, ShareBundle};
use crate::simnet::{
    Envelope, GeneratedKind, GeneratedValue, InputTag, Message, MessageKind, Meta, Network,
    OwnInput, Transcript, View,
};

pub const DEFAULT_TTP: &str = "merlin";

/// Order in which the bus hands out pending messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delivery {
    /// Global send order.
    #[default]
    Fifo,
    /// Random channel each step, per-channel FIFO preserved.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub ring: Ring,
    pub seed: u64,
    pub policy: Policy,
    pub delivery: Delivery,
    pub ttp_label: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ring: Ring::wrapping(),
            seed: 0,
            policy: Policy::Secure,
            delivery: Delivery::Fifo,
            ttp_label: DEFAULT_TTP.to_string(),
        }
    }
}

impl RunOptions {
    pub fn new(ring: Ring, seed: u64, policy: Policy) -> Self {
        RunOptions {
            ring,
            seed,
            policy,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
struct PartyLog {
    own_inputs: Vec<OwnInput>,
    generated: Vec<GeneratedValue>,
}

/// A finished run: the published result plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: Elem,
    pub ring: Ring,
    pub policy: Policy,
    pub seed: u64,
    /// Indexed by `InstanceId`; entry 0 is the top-level instance.
    pub instances: Vec<ProtocolInstance>,
    pub transcript: Transcript,
    /// Every party of the run in global order.
    pub pool: Vec<PartyId>,
    pub delivered: u64,
    logs: BTreeMap<PartyId, PartyLog>,
}

impl RunOutcome {
    pub fn top(&self) -> &ProtocolInstance {
        &self.instances[0]
    }

    pub fn instance(&self, id: InstanceId) -> &ProtocolInstance {
        &self.instances[id.0 as usize]
    }

    pub fn ttp(&self) -> &PartyId {
        &self.top().ttp
    }

    pub fn data_parties(&self) -> impl Iterator<Item = &PartyId> {
        self.pool.iter().filter(|p| p.is_data())
    }

    pub fn max_depth(&self) -> usize {
        self.instances.iter().map(|i| i.depth).max().unwrap_or(0)
    }

    /// Projection of the transcript onto `party`, plus its local values.
    pub fn view_of(&self, party: &PartyId) -> Result<View> {
        let log = self
            .logs
            .get(party)
            .ok_or_else(|| Error::Routing(party.clone()))?;
        Ok(View::project(
            party.clone(),
            log.own_inputs.clone(),
            log.generated.clone(),
            &self.transcript,
        ))
    }
}

/// Runs the protocol over the given data vectors (party `P<i>` owns
/// `inputs[i-1]`) with a single top-level commodity server.
pub fn run_protocol(inputs: &[ModVector], options: &RunOptions) -> Result<RunOutcome> {
    if inputs.len() < 2 {
        return Err(Error::InstanceShape(format!(
            "need at least 2 data parties, got {}",
            inputs.len()
        )));
    }
    let ring = options.ring;
    for (i, v) in inputs.iter().enumerate() {
        if v.len() != inputs[0].len() {
            return Err(Error::InputShape(format!(
                "P{} has length {}, P1 has length {}",
                i + 1,
                v.len(),
                inputs[0].len()
            )));
        }
        if let Some(e) = v.as_slice().iter().find(|&&e| !ring.contains(e)) {
            return Err(Error::InputShape(format!(
                "P{} entry {e} is not reduced modulo {ring}",
                i + 1
            )));
        }
    }

    let ttp = PartyId::Ttp(options.ttp_label.clone());
    let mut pool: Vec<PartyId> = (1..=inputs.len() as u32).map(PartyId::Data).collect();
    pool.push(ttp.clone());
    pool.sort();

    let mut engine = Engine::new(&pool, options);
    let participants = (1..=inputs.len() as u32)
        .map(|i| Participant {
            party: PartyId::Data(i),
            role: InputRole::Data,
        })
        .collect();
    let seat_inputs = inputs
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), InputTag::Data(i as u32 + 1)))
        .collect();
    engine.start(participants, seat_inputs, ttp, None, 0)?;
    engine.drive(options.delivery, options.seed)?;
    engine.finish(options)
}

struct Engine {
    ring: Ring,
    policy: Policy,
    pool: Vec<PartyId>,
    parties: BTreeMap<PartyId, Party>,
    dir: Vec<ProtocolInstance>,
    net: Network,
    ids: MaskIdAllocator,
}

enum Effect {
    Send(Envelope),
    Spawn(InstanceId),
    Advance(InstanceId, Lifecycle),
}

impl Engine {
    fn new(pool: &[PartyId], options: &RunOptions) -> Self {
        let mut ttp_index = 0u64;
        let parties = pool
            .iter()
            .map(|p| {
                let stream = match p {
                    PartyId::Data(i) => *i as u64,
                    PartyId::Ttp(_) => {
                        ttp_index += 1;
                        (1 << 32) + ttp_index
                    }
                };
                (
                    p.clone(),
                    Party::new(p.clone(), Rng::with_stream(options.seed, stream)),
                )
            })
            .collect();
        Engine {
            ring: options.ring,
            policy: options.policy,
            pool: pool.to_vec(),
            parties,
            dir: Vec::new(),
            net: Network::new(pool.iter().cloned()),
            ids: MaskIdAllocator::default(),
        }
    }

    fn party_mut(&mut self, id: &PartyId) -> Result<&mut Party> {
        self.parties
            .get_mut(id)
            .ok_or_else(|| Error::Routing(id.clone()))
    }

    /// Registers an instance, seats its inputs, and has its server send out
    /// the correlated randomness.
    fn start(
        &mut self,
        participants: Vec<Participant>,
        inputs: Vec<(ModVector, InputTag)>,
        ttp: PartyId,
        origin: Option<(InstanceId, SubInstanceSpec)>,
        depth: usize,
    ) -> Result<InstanceId> {
        let id = InstanceId(self.dir.len() as u32);
        let n = participants.len();
        if n < 2 {
            return Err(Error::InstanceShape(format!("instance {id} has {n} seats")));
        }
        let len = inputs[0].0.len();
        if inputs.iter().any(|(v, _)| v.len() != len) {
            return Err(Error::InputShape(format!(
                "instance {id} mixes vector lengths"
            )));
        }
        let collides = participants.iter().any(|p| p.party == ttp);
        if collides && (self.policy == Policy::Secure || origin.is_none()) {
            return Err(Error::TtpAssignment {
                instance: id,
                reason: format!("{ttp} both serves and participates"),
            });
        }

        let (parent, spec) = match origin {
            Some((p, s)) => (Some(p), Some(s)),
            None => (None, None),
        };
        if let Some(p) = parent {
            debug_assert!(n < self.dir[p.0 as usize].n());
            self.dir[p.0 as usize].children.push(id);
        }
        self.dir.push(ProtocolInstance {
            id,
            participants: participants.clone(),
            ttp: ttp.clone(),
            parent,
            spec,
            depth,
            len,
            state: Lifecycle::AwaitingShares,
            children: Vec::new(),
        });

        for (seat, (p, (vector, tag))) in participants.iter().zip(inputs).enumerate() {
            let party = self.party_mut(&p.party)?;
            party.log.own_inputs.push(OwnInput {
                instance: id,
                seat: seat as u16,
                vector: vector.clone(),
                tag: tag.clone(),
            });
            party
                .seats
                .insert((id, seat as u16), Seat::new(seat, n, vector, tag));
        }

        let recipients: Vec<PartyId> = participants.iter().map(|p| p.party.clone()).collect();
        let ring = self.ring;
        let server = self
            .parties
            .get_mut(&ttp)
            .ok_or_else(|| Error::Routing(ttp.clone()))?;
        let bundles =
            generate_share_bundles(&recipients, len, &ring, &mut server.rng, &mut self.ids)?;
        let mut outgoing = Vec::with_capacity(n);
        for (seat, b) in bundles.iter().enumerate() {
            let mut values = b.mask_matrix.as_slice().to_vec();
            values.push(b.scalar_share);
            server.log.generated.push(GeneratedValue {
                instance: id,
                kind: GeneratedKind::MaskShare {
                    seat: seat as u16,
                    party: b.party.clone(),
                    id: b.mask_id,
                },
                values: values.clone(),
            });
            outgoing.push(Envelope {
                from: ttp.clone(),
                to: b.party.clone(),
                from_seat: None,
                to_seat: Some(seat as u16),
                instance: id,
                kind: MessageKind::ShareDistribution,
                payload: values,
                meta: Meta {
                    masks: vec![b.mask_id],
                    input: None,
                },
            });
        }
        server.issued.insert(id, bundles);
        for env in outgoing {
            self.net.send(env)?;
        }
        Ok(id)
    }

    fn spawn_children(&mut self, parent_id: InstanceId) -> Result<()> {
        let parent = self.dir[parent_id.0 as usize].clone();
        let n = parent.n();
        for spec in determine_sub_instances(n) {
            let mut participants: Vec<Participant> = spec
                .kept
                .iter()
                .map(|&s| parent.participants[s].clone())
                .collect();
            participants.push(Participant {
                party: parent.ttp.clone(),
                role: InputRole::CollapsedProduct,
            });
            let members: Vec<PartyId> = participants.iter().map(|p| p.party.clone()).collect();
            let ttp =
                assign_ttp(&members, self.policy, &parent.ttp, &self.pool).map_err(
                    |e| match e {
                        Error::TtpAssignment { reason, .. } => Error::TtpAssignment {
                            instance: InstanceId(self.dir.len() as u32),
                            reason,
                        },
                        other => other,
                    },
                )?;

            // Kept seats bring their own inputs; the parent's server folds
            // the remaining masks into one product vector.
            let mut inputs = Vec::with_capacity(participants.len());
            for &s in &spec.kept {
                let seat = self.parties[&parent.participants[s].party]
                    .seats
                    .get(&(parent_id, s as u16))
                    .ok_or_else(|| {
                        Error::state(&parent.participants[s].party, parent_id, "seat vanished")
                    })?;
                inputs.push((seat.input.clone(), seat.tag.clone()));
            }
            let issued: &[ShareBundle] = self.parties[&parent.ttp]
                .issued
                .get(&parent_id)
                .ok_or_else(|| Error::state(&parent.ttp, parent_id, "no issued shares"))?;
            let dropped: Vec<&ShareBundle> = (0..n)
                .filter(|j| !spec.kept.contains(j))
                .map(|j| &issued[j])
                .collect();
            let masks: Vec<&ModVector> = dropped.iter().map(|b| &b.mask_matrix).collect();
            let product = hadamard_all(&masks, &self.ring)?;
            let tag = InputTag::Product(dropped.iter().map(|b| b.mask_id).collect());
            inputs.push((product, tag));

            self.start(
                participants,
                inputs,
                ttp,
                Some((parent_id, spec)),
                parent.depth + 1,
            )?;
        }
        Ok(())
    }

    fn drive(&mut self, delivery: Delivery, seed: u64) -> Result<()> {
        let mut order_rng = match delivery {
            Delivery::Fifo => None,
            Delivery::Shuffled { seed: s } => Some(Rng::with_stream(seed ^ s, u64::MAX)),
        };
        loop {
            let msg = match order_rng.as_mut() {
                None => self.net.deliver_next(),
                Some(rng) => self.net.deliver_random(rng),
            };
            let Some(msg) = msg else { break };
            let to = msg.to.clone();
            let party = self
                .parties
                .get_mut(&to)
                .ok_or_else(|| Error::Routing(to.clone()))?;
            let effects = party.handle(msg, &self.dir, &self.ring)?;
            for effect in effects {
                match effect {
                    Effect::Send(env) => {
                        self.net.send(env)?;
                    }
                    Effect::Spawn(id) => self.spawn_children(id)?,
                    Effect::Advance(id, state) => {
                        let inst = &mut self.dir[id.0 as usize];
                        if state < inst.state {
                            return Err(Error::state(
                                &to,
                                id,
                                format!("lifecycle regressed from {:?} to {state:?}", inst.state),
                            ));
                        }
                        inst.state = state;
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self, options: &RunOptions) -> Result<RunOutcome> {
        if let Some(stuck) = self.dir.iter().find(|i| i.state != Lifecycle::Done) {
            return Err(Error::ProtocolState(format!(
                "instance {} stalled in {:?}",
                stuck.id, stuck.state
            )));
        }
        let mut result = None;
        for p in self.pool.iter().filter(|p| p.is_data()) {
            let got = self.parties[p].final_result;
            match (result, got) {
                (_, None) => {
                    return Err(Error::state(p, InstanceId(0), "never received the result"))
                }
                (Some(r), Some(g)) if r != g => {
                    return Err(Error::state(
                        p,
                        InstanceId(0),
                        "received a different result",
                    ))
                }
                _ => result = got,
            }
        }
        let delivered = self.net.delivered();
        Ok(RunOutcome {
            result: result.expect("at least two data parties"),
            ring: self.ring,
            policy: self.policy,
            seed: options.seed,
            instances: self.dir,
            transcript: self.net.into_transcript(),
            pool: self.pool,
            delivered,
            logs: self
                .parties
                .into_iter()
                .map(|(id, p)| (id, p.log))
                .collect(),
        })
    }
}

/// One party's private state for one position of one instance.
#[derive(Debug)]
struct Seat {
    index: usize,
    n: usize,
    input: ModVector,
    tag: InputTag,
    bundle: Option<(ModVector, Elem, crate::shares::MaskId)>,
    /// Masked inputs received from the other seats.
    masked: Vec<Option<ModVector>>,
    masked_sent: bool,
    output_mask: Option<Elem>,
    /// `u_{i-1}` for chain seats; `u_n` (or the base-case reply) at seat 0.
    chain_in: Option<ChainValue>,
    chain_sent: bool,
    revealed_mask: Option<Elem>,
    spawned: bool,
    sub_results: BTreeMap<InstanceId, Elem>,
    done: bool,
}

impl Seat {
    fn new(index: usize, n: usize, input: ModVector, tag: InputTag) -> Self {
        Seat {
            index,
            n,
            input,
            tag,
            bundle: None,
            masked: vec![None; n],
            masked_sent: false,
            output_mask: None,
            chain_in: None,
            chain_sent: false,
            revealed_mask: None,
            spawned: false,
            sub_results: BTreeMap::new(),
            done: false,
        }
    }

    fn all_masked(&self) -> bool {
        self.masked
            .iter()
            .enumerate()
            .all(|(j, m)| j == self.index || m.is_some())
    }
}

#[derive(Debug)]
struct Party {
    id: PartyId,
    rng: Rng,
    seats: HashMap<(InstanceId, u16), Seat>,
    /// Bundles this party issued as a commodity server, by instance.
    issued: HashMap<InstanceId, Vec<ShareBundle>>,
    final_result: Option<Elem>,
    log: PartyLog,
}

struct Outbox<'a> {
    from: &'a PartyId,
    instance: InstanceId,
    effects: Vec<Effect>,
}

impl Outbox<'_> {
    fn send_to_seat(
        &mut self,
        inst: &ProtocolInstance,
        from_seat: usize,
        to_seat: usize,
        kind: MessageKind,
        payload: Vec<Elem>,
        meta: Meta,
    ) {
        self.effects.push(Effect::Send(Envelope {
            from: self.from.clone(),
            to: inst.participants[to_seat].party.clone(),
            from_seat: Some(from_seat as u16),
            to_seat: Some(to_seat as u16),
            instance: self.instance,
            kind,
            payload,
            meta,
        }));
    }

    fn advance(&mut self, state: Lifecycle) {
        self.effects.push(Effect::Advance(self.instance, state));
    }
}

impl Party {
    fn new(id: PartyId, rng: Rng) -> Self {
        Party {
            id,
            rng,
            seats: HashMap::new(),
            issued: HashMap::new(),
            final_result: None,
            log: PartyLog::default(),
        }
    }

    fn seat_mut(&mut self, instance: InstanceId, seat: Option<u16>) -> Result<&mut Seat> {
        let id = self.id.clone();
        let seat = seat.ok_or_else(|| Error::state(&id, instance, "message lacks a seat"))?;
        self.seats
            .get_mut(&(instance, seat))
            .ok_or_else(|| Error::state(&id, instance, format!("no seat {seat}")))
    }

    fn handle(
        &mut self,
        msg: Message,
        dir: &[ProtocolInstance],
        ring: &Ring,
    ) -> Result<Vec<Effect>> {
        let me = self.id.clone();
        let instance = msg.instance;
        if instance.0 as usize >= dir.len() {
            return Err(Error::state(&me, instance, "unknown instance"));
        }
        let target = match msg.kind {
            MessageKind::ShareDistribution => {
                let seat = self.seat_mut(instance, msg.to_seat)?;
                if seat.bundle.is_some() {
                    return Err(Error::state(&me, instance, "duplicate share bundle"));
                }
                let Some((&share, mask)) = msg.payload.split_last() else {
                    return Err(Error::state(&me, instance, "empty share bundle"));
                };
                if mask.len() != seat.input.len() {
                    return Err(Error::InputShape(format!(
                        "mask of length {} for input of length {}",
                        mask.len(),
                        seat.input.len()
                    )));
                }
                let id = *msg
                    .meta
                    .masks
                    .first()
                    .ok_or_else(|| Error::state(&me, instance, "unlabelled share bundle"))?;
                seat.bundle = Some((ModVector::from_raw(mask.to_vec()), share, id));
                (instance, msg.to_seat)
            }
            MessageKind::MaskedMatrixBroadcast => {
                let from = msg.from_seat.ok_or_else(|| {
                    Error::state(&me, instance, "masked matrix without sender seat")
                })? as usize;
                let seat = self.seat_mut(instance, msg.to_seat)?;
                if from >= seat.n || from == seat.index || seat.masked[from].is_some() {
                    return Err(Error::state(
                        &me,
                        instance,
                        format!("unexpected masked matrix from seat {from}"),
                    ));
                }
                if msg.payload.len() != seat.input.len() {
                    return Err(Error::InputShape(format!(
                        "masked matrix of length {} for inputs of length {}",
                        msg.payload.len(),
                        seat.input.len()
                    )));
                }
                seat.masked[from] = Some(ModVector::from_raw(msg.payload));
                (instance, msg.to_seat)
            }
            MessageKind::ChainValue => {
                let seat = self.seat_mut(instance, msg.to_seat)?;
                let from = msg.from_seat.map(usize::from);
                let expected = (seat.index + seat.n - 1) % seat.n;
                if from != Some(expected) || seat.chain_in.is_some() || msg.payload.len() != 1 {
                    return Err(Error::state(
                        &me,
                        instance,
                        format!(
                            "chain value from seat {from:?} out of order at seat {}",
                            seat.index
                        ),
                    ));
                }
                seat.chain_in = Some(ChainValue {
                    index: expected + 1,
                    value: msg.payload[0],
                });
                (instance, msg.to_seat)
            }
            MessageKind::OutputMaskReveal => {
                let seat = self.seat_mut(instance, msg.to_seat)?;
                if seat.n != 2 || seat.index != 0 || seat.revealed_mask.is_some() {
                    return Err(Error::state(&me, instance, "unexpected output mask"));
                }
                seat.revealed_mask = msg.payload.first().copied();
                (instance, msg.to_seat)
            }
            MessageKind::SubResult => {
                let parent = dir[instance.0 as usize]
                    .parent
                    .ok_or_else(|| Error::state(&me, instance, "sub-result from a root"))?;
                let seat = self.seat_mut(parent, msg.to_seat)?;
                let value = *msg
                    .payload
                    .first()
                    .ok_or_else(|| Error::state(&me, instance, "empty sub-result"))?;
                if seat.index != 0 || seat.sub_results.insert(instance, value).is_some() {
                    return Err(Error::state(&me, parent, "unexpected sub-result"));
                }
                (parent, msg.to_seat)
            }
            MessageKind::FinalResult => {
                let value = msg.payload.first().copied();
                if self.final_result.is_some_and(|r| Some(r) != value) {
                    return Err(Error::state(&me, instance, "conflicting final results"));
                }
                self.final_result = value;
                return Ok(Vec::new());
            }
        };
        let (instance, seat) = target;
        self.advance(instance, seat.unwrap_or(0), dir, ring)
    }

    fn advance(
        &mut self,
        instance: InstanceId,
        seat_index: u16,
        dir: &[ProtocolInstance],
        ring: &Ring,
    ) -> Result<Vec<Effect>> {
        let inst = &dir[instance.0 as usize];
        let Party {
            id,
            rng,
            seats,
            log,
            ..
        } = self;
        let seat = seats
            .get_mut(&(instance, seat_index))
            .expect("seat checked by handle");
        let mut out = Outbox {
            from: id,
            instance,
            effects: Vec::new(),
        };
        if seat.done {
            return Err(Error::state(id, instance, "message after completion"));
        }
        let mut draw_output_mask = |rng: &mut Rng| {
            let v = rng.element(ring);
            log.generated.push(GeneratedValue {
                instance,
                kind: GeneratedKind::OutputMask,
                values: vec![v],
            });
            v
        };

        let result = if seat.n == 2 {
            advance_base(seat, inst, &mut out, rng, &mut draw_output_mask, ring)?
        } else {
            advance_chain(seat, inst, dir, &mut out, rng, &mut draw_output_mask, ring)?
        };

        if let Some(y) = result {
            seat.done = true;
            out.advance(Lifecycle::Aggregating);
            match inst.parent {
                None => {
                    for j in 0..inst.n() {
                        out.send_to_seat(
                            inst,
                            0,
                            j,
                            MessageKind::FinalResult,
                            vec![y],
                            Meta::default(),
                        );
                    }
                }
                Some(parent) => {
                    let aggregator = &dir[parent.0 as usize].participants[0].party;
                    out.effects.push(Effect::Send(Envelope {
                        from: id.clone(),
                        to: aggregator.clone(),
                        from_seat: Some(0),
                        to_seat: Some(0),
                        instance,
                        kind: MessageKind::SubResult,
                        payload: vec![y],
                        meta: Meta::default(),
                    }));
                }
            }
            out.advance(Lifecycle::Done);
        }
        Ok(out.effects)
    }
}

/// Commodity-based two-party exchange. Returns the result once seat 0 can
/// combine both output shares.
fn advance_base(
    seat: &mut Seat,
    inst: &ProtocolInstance,
    out: &mut Outbox<'_>,
    rng: &mut Rng,
    draw_output_mask: &mut impl FnMut(&mut Rng) -> Elem,
    ring: &Ring,
) -> Result<Option<Elem>> {
    let Some((mask, share, mask_id)) = seat.bundle.clone() else {
        return Ok(None);
    };
    let mask = &mask;
    let masked_meta = |tag: &InputTag| Meta {
        masks: vec![mask_id],
        input: Some(tag.clone()),
    };
    if seat.index == 0 {
        if !seat.masked_sent {
            let a_hat = seat.input.add(mask, ring)?;
            out.send_to_seat(
                inst,
                0,
                1,
                MessageKind::MaskedMatrixBroadcast,
                a_hat.into_inner(),
                masked_meta(&seat.tag),
            );
            seat.masked_sent = true;
            out.advance(Lifecycle::Masking);
        }
        if let Some(u) = seat.chain_in {
            out.advance(Lifecycle::UChain);
            if let (Some(b_hat), Some(v2)) = (&seat.masked[1], seat.revealed_mask) {
                let v1 = base_recover(u.value, mask, b_hat, share, ring)?;
                return Ok(Some(ring.add(v1, v2)));
            }
        }
        return Ok(None);
    }

    if !seat.chain_sent {
        if let Some(a_hat) = &seat.masked[0] {
            let v2 = draw_output_mask(rng);
            let u = base_reply(a_hat, &seat.input, share, v2, ring)?;
            let b_hat = seat.input.add(mask, ring)?;
            out.send_to_seat(
                inst,
                1,
                0,
                MessageKind::MaskedMatrixBroadcast,
                b_hat.into_inner(),
                masked_meta(&seat.tag),
            );
            out.send_to_seat(
                inst,
                1,
                0,
                MessageKind::ChainValue,
                vec![u],
                Meta {
                    masks: vec![mask_id],
                    input: None,
                },
            );
            out.send_to_seat(
                inst,
                1,
                0,
                MessageKind::OutputMaskReveal,
                vec![v2],
                Meta::default(),
            );
            seat.output_mask = Some(v2);
            seat.masked_sent = true;
            seat.chain_sent = true;
            seat.done = true;
        }
    }
    Ok(None)
}

/// The n-party flow for `n >= 3`. Returns the result once seat 0 has the
/// chain output and every sub-result.
fn advance_chain(
    seat: &mut Seat,
    inst: &ProtocolInstance,
    dir: &[ProtocolInstance],
    out: &mut Outbox<'_>,
    rng: &mut Rng,
    draw_output_mask: &mut impl FnMut(&mut Rng) -> Elem,
    ring: &Ring,
) -> Result<Option<Elem>> {
    let n = seat.n;
    let i = seat.index;
    let Some((mask, share, mask_id)) = seat.bundle.clone() else {
        return Ok(None);
    };
    let mask = &mask;
    if !seat.masked_sent {
        let masked = seat.input.add(mask, ring)?;
        let meta = Meta {
            masks: vec![mask_id],
            input: Some(seat.tag.clone()),
        };
        for j in (0..n).filter(|&j| j != i) {
            out.send_to_seat(
                inst,
                i,
                j,
                MessageKind::MaskedMatrixBroadcast,
                masked.as_slice().to_vec(),
                meta.clone(),
            );
        }
        seat.masked_sent = true;
        if i == 0 {
            seat.output_mask = Some(draw_output_mask(rng));
            out.advance(Lifecycle::Masking);
        }
    }

    if !seat.chain_sent && seat.all_masked() {
        let masked: Vec<Option<&ModVector>> = seat.masked.iter().map(Option::as_ref).collect();
        let next = if i == 0 {
            let v2 = seat.output_mask.expect("drawn with the broadcast");
            Some(compute_u1(&seat.input, &masked[1..], share, v2, ring)?)
        } else if let Some(prev) = seat.chain_in {
            Some(compute_u_step(i + 1, prev, mask, &masked, share, ring)?)
        } else {
            None
        };
        if let Some(u) = next {
            out.send_to_seat(
                inst,
                i,
                (i + 1) % n,
                MessageKind::ChainValue,
                vec![u.value],
                Meta {
                    masks: vec![mask_id],
                    input: None,
                },
            );
            seat.chain_sent = true;
            if i == 0 {
                out.advance(Lifecycle::UChain);
            } else {
                seat.done = true;
            }
        }
    }

    if i != 0 {
        return Ok(None);
    }
    let Some(u_n) = seat.chain_in else {
        return Ok(None);
    };
    if !seat.spawned {
        seat.spawned = true;
        out.advance(Lifecycle::SubProtocols);
        out.effects.push(Effect::Spawn(inst.id));
        return Ok(None);
    }
    let expected = (1usize << n) - n - 2;
    if seat.sub_results.len() < expected {
        return Ok(None);
    }
    let subs: Vec<(&SubInstanceSpec, Option<Elem>)> = inst
        .children
        .iter()
        .map(|c| {
            let spec = dir[c.0 as usize]
                .spec
                .as_ref()
                .expect("children carry their spec");
            (spec, seat.sub_results.get(c).copied())
        })
        .collect();
    let v2 = seat.output_mask.expect("drawn with the broadcast");
    Ok(Some(aggregate_final(u_n.value, &subs, v2, ring)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::phi_product;

    fn vecs(rows: &[&[u64]]) -> Vec<ModVector> {
        rows.iter()
            .map(|r| ModVector::from_raw(r.to_vec()))
            .collect()
    }

    #[test]
    fn three_parties_worked_example() {
        let inputs = vecs(&[&[1, 2], &[3, 4], &[5, 6]]);
        for policy in [Policy::Secure, Policy::Flawed] {
            for seed in 0..5 {
                let out = run_protocol(&inputs, &RunOptions::new(Ring::wrapping(), seed, policy))
                    .unwrap();
                assert_eq!(out.result, 63);
                assert_eq!(out.instances.len(), 4);
            }
        }
    }

    #[test]
    fn two_parties_delegate_to_base_case() {
        let inputs = vecs(&[&[1, 0, 1], &[1, 1, 0]]);
        let out = run_protocol(&inputs, &RunOptions::default()).unwrap();
        assert_eq!(out.result, 1);
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.transcript.len(), 8);
    }

    #[test]
    fn shuffled_delivery_gives_same_result() {
        let ring = Ring::wrapping();
        let mut rng = Rng::new(77);
        let inputs: Vec<ModVector> = (0..5).map(|_| rng.vector(3, &ring)).collect();
        let expected = phi_product(&inputs, &ring).unwrap();
        for s in 0..10 {
            let opts = RunOptions {
                delivery: Delivery::Shuffled { seed: s },
                ..RunOptions::new(ring, s, Policy::Secure)
            };
            assert_eq!(run_protocol(&inputs, &opts).unwrap().result, expected);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let one = vecs(&[&[1, 2]]);
        assert!(matches!(
            run_protocol(&one, &RunOptions::default()),
            Err(Error::InstanceShape(_))
        ));
        let ragged = vecs(&[&[1, 2], &[1, 2, 3]]);
        assert!(matches!(
            run_protocol(&ragged, &RunOptions::default()),
            Err(Error::InputShape(_))
        ));
        let small = RunOptions::new(Ring::new(7).unwrap(), 0, Policy::Secure);
        assert!(matches!(
            run_protocol(&vecs(&[&[9], &[1]]), &small),
            Err(Error::InputShape(_))
        ));
    }
}
