//! The two-party ranking protocol between Alice (the recommender, holding
//! the rating matrix) and Bob (the social provider, holding the similarity
//! table and the Paillier secret key).
//!
//! Message flow per session:
//!
//! 1. Bob -> Alice: his public key plus the encrypted, fixed-point-encoded
//!    similarity scores.
//! 2. Alice -> Bob: per-item degree ciphertexts, each the product of score
//!    ciphertexts raised to the item's rating values, masked by one shared
//!    random addend and presented under fresh 128-bit tokens in permuted
//!    order.
//! 3. Bob -> Alice: the tokens sorted by decrypted degree (descending, ties
//!    by ascending token bytes). No degree value leaves Bob.
//!
//! Alice then resolves tokens back to item ids locally. Every message uses
//! the same byte-exact framing over any transport: magic `0x50`, version
//! `0x01`, a type byte, and a 4-byte big-endian payload length.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use ndarray::Array2;
use num_bigint::BigUint;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::paillier::{
    hom_add, hom_scale_u64, Ciphertext, FixedPointCodec, Keypair, PaillierError, PublicKey,
};

pub const WIRE_MAGIC: u8 = 0x50;
pub const WIRE_VERSION: u8 = 0x01;
pub const MSG_SCORES: u8 = 0x01;
pub const MSG_MASKED_DEGREES: u8 = 0x02;
pub const MSG_TOKEN_ORDER: u8 = 0x03;
const MAX_PAYLOAD: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error("framing error: {0}")]
    Framing(&'static str),
    #[error("malformed payload: {0}")]
    MalformedPayload(&'static str),
    #[error("unexpected message type {got:#04x}, expected {expected:#04x}")]
    UnexpectedMessage { expected: u8, got: u8 },
    #[error("message received out of order")]
    OutOfOrder,
    #[error("no neighbors: similarity batch is empty")]
    NoNeighbors,
    #[error("batch references user {0} outside the rank matrix")]
    UnknownUser(u32),
    #[error("token order references an unknown token")]
    UnknownToken,
    #[error("plaintext range budget exceeded: n_u * rank_max * scale + r_max >= N")]
    PlaintextBudget,
    #[error("rank value {value} exceeds rank_max {max}")]
    RankOutOfRange { value: u32, max: u32 },
    #[error("target user {target} out of range for {n_users} users")]
    TargetOutOfRange { target: u32, n_users: usize },
    #[error("item subset entry {0} out of range")]
    ItemOutOfRange(u32),
    #[error("protocol violation: {0}")]
    Violation(&'static str),
    #[error("top_k must be positive")]
    BadTopK,
    #[error("candidate lists must be duplicate-free")]
    DuplicateEntries,
    #[error("transcript invalid: {0}")]
    BadTranscript(&'static str),
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

pub fn encode_frame(msg_type: u8, payload: &[u8]) -> Vec<u8> {
    let mut frame = Vec::with_capacity(7 + payload.len());
    frame.push(WIRE_MAGIC);
    frame.push(WIRE_VERSION);
    frame.push(msg_type);
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(payload);
    frame
}

pub fn decode_frame(bytes: &[u8]) -> Result<(u8, &[u8]), ProtocolError> {
    if bytes.len() < 7 {
        return Err(ProtocolError::Framing("short header"));
    }
    if bytes[0] != WIRE_MAGIC {
        return Err(ProtocolError::Framing("bad magic"));
    }
    if bytes[1] != WIRE_VERSION {
        return Err(ProtocolError::Framing("unsupported version"));
    }
    let msg_type = bytes[2];
    if !(MSG_SCORES..=MSG_TOKEN_ORDER).contains(&msg_type) {
        return Err(ProtocolError::Framing("unknown message type"));
    }
    let len = u32::from_be_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::Framing("payload too large"));
    }
    if bytes.len() != 7 + len {
        return Err(ProtocolError::Framing("length mismatch"));
    }
    Ok((msg_type, &bytes[7..]))
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn put_u32(&mut self, value: u32) {
        self.buf.extend_from_slice(&value.to_be_bytes());
    }

    fn put_bigint(&mut self, value: &BigUint) {
        let bytes = value.to_bytes_be();
        // Zero is encoded with length 0.
        if value == &BigUint::ZERO {
            self.put_u32(0);
            return;
        }
        self.put_u32(bytes.len() as u32);
        self.buf.extend_from_slice(&bytes);
    }

    fn put_token(&mut self, token: &ItemToken) {
        self.buf.extend_from_slice(&token.0);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.pos + n > self.data.len() {
            return Err(ProtocolError::MalformedPayload("truncated"));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn get_u32(&mut self) -> Result<u32, ProtocolError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn get_bigint(&mut self) -> Result<BigUint, ProtocolError> {
        let len = self.get_u32()? as usize;
        if len > MAX_PAYLOAD {
            return Err(ProtocolError::MalformedPayload("oversized integer"));
        }
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    fn get_token(&mut self) -> Result<ItemToken, ProtocolError> {
        let b = self.take(16)?;
        let mut token = [0u8; 16];
        token.copy_from_slice(b);
        Ok(ItemToken(token))
    }

    fn finish(&self) -> Result<(), ProtocolError> {
        if self.pos != self.data.len() {
            return Err(ProtocolError::MalformedPayload("trailing bytes"));
        }
        Ok(())
    }
}

/// Opaque per-run item pseudonym. Ordering is plain byte order, which is
/// also the ranking tie rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ItemToken(pub [u8; 16]);

impl ItemToken {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// Message 1 payload: public key, then (user id, score ciphertext) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoresPayload {
    pub key_bits: u32,
    pub modulus: BigUint,
    pub entries: Vec<(u32, BigUint)>,
}

impl ScoresPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(self.key_bits);
        w.put_bigint(&self.modulus);
        w.put_u32(self.entries.len() as u32);
        for (user, ct) in &self.entries {
            w.put_u32(*user);
            w.put_bigint(ct);
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let key_bits = r.get_u32()?;
        let modulus = r.get_bigint()?;
        let count = r.get_u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let user = r.get_u32()?;
            let ct = r.get_bigint()?;
            entries.push((user, ct));
        }
        r.finish()?;
        Ok(Self {
            key_bits,
            modulus,
            entries,
        })
    }
}

/// Message 2 payload: (token, masked degree ciphertext) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreesPayload {
    pub entries: Vec<(ItemToken, BigUint)>,
}

impl DegreesPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(self.entries.len() as u32);
        for (token, ct) in &self.entries {
            w.put_token(token);
            w.put_bigint(ct);
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let count = r.get_u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let token = r.get_token()?;
            let ct = r.get_bigint()?;
            entries.push((token, ct));
        }
        r.finish()?;
        Ok(Self { entries })
    }
}

/// Message 3 payload: ranked tokens only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderPayload {
    pub tokens: Vec<ItemToken>,
}

impl OrderPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u32(self.tokens.len() as u32);
        for token in &self.tokens {
            w.put_token(token);
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let count = r.get_u32()? as usize;
        let mut tokens = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            tokens.push(r.get_token()?);
        }
        r.finish()?;
        Ok(Self { tokens })
    }
}

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEvent {
    pub party: Party,
    pub direction: Direction,
    pub msg_type: u8,
    pub payload_len: u32,
    pub digest: u64,
    pub payload: Vec<u8>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn event(party: Party, direction: Direction, msg_type: u8, payload: &[u8]) -> TranscriptEvent {
    TranscriptEvent {
        party,
        direction,
        msg_type,
        payload_len: payload.len() as u32,
        digest: fnv1a(payload),
        payload: payload.to_vec(),
    }
}

/// Combined message log of one protocol session, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolTranscript {
    pub events: Vec<TranscriptEvent>,
    /// Set by Bob when every similarity score in the run encoded to zero:
    /// the resulting order is decided purely by the token tie rule.
    pub degenerate: bool,
}

impl ProtocolTranscript {
    /// Merge per-party event logs. The flow is strictly alternating, so
    /// ordering by (message number, sent-before-received) reconstructs the
    /// true global order regardless of which transport carried the bytes.
    pub fn assemble(
        bob_events: Vec<TranscriptEvent>,
        alice_events: Vec<TranscriptEvent>,
        degenerate: bool,
    ) -> Self {
        let mut events: Vec<TranscriptEvent> =
            bob_events.into_iter().chain(alice_events).collect();
        events.sort_by_key(|e| {
            (
                e.msg_type,
                match e.direction {
                    Direction::Sent => 0u8,
                    Direction::Received => 1u8,
                },
            )
        });
        Self { events, degenerate }
    }
}

/// Structural privacy check over the combined transcript: the message
/// pattern, pairing digests, and payload schemas must all hold. Alice's
/// inbound payloads parse only as ciphertexts and tokens; Bob's inbound
/// payload contains opaque tokens and ciphertexts, never rank values or
/// item ids.
pub fn validate_transcript(transcript: &ProtocolTranscript) -> Result<(), ProtocolError> {
    let expected = [
        (Party::Bob, Direction::Sent, MSG_SCORES),
        (Party::Alice, Direction::Received, MSG_SCORES),
        (Party::Alice, Direction::Sent, MSG_MASKED_DEGREES),
        (Party::Bob, Direction::Received, MSG_MASKED_DEGREES),
        (Party::Bob, Direction::Sent, MSG_TOKEN_ORDER),
        (Party::Alice, Direction::Received, MSG_TOKEN_ORDER),
    ];
    if transcript.events.len() != expected.len() {
        return Err(ProtocolError::BadTranscript("wrong event count"));
    }
    for (event, &(party, direction, msg_type)) in transcript.events.iter().zip(expected.iter()) {
        if event.party != party || event.direction != direction || event.msg_type != msg_type {
            return Err(ProtocolError::BadTranscript("unexpected event pattern"));
        }
        if event.payload_len as usize != event.payload.len()
            || event.digest != fnv1a(&event.payload)
        {
            return Err(ProtocolError::BadTranscript("digest mismatch"));
        }
        match msg_type {
            MSG_SCORES => {
                ScoresPayload::decode(&event.payload)?;
            }
            MSG_MASKED_DEGREES => {
                DegreesPayload::decode(&event.payload)?;
            }
            MSG_TOKEN_ORDER => {
                OrderPayload::decode(&event.payload)?;
            }
            _ => unreachable!(),
        }
    }
    for pair in transcript.events.chunks(2) {
        if pair[0].digest != pair[1].digest || pair[0].payload != pair[1].payload {
            return Err(ProtocolError::BadTranscript("sent/received payloads differ"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rank matrix and candidate lists
// ---------------------------------------------------------------------------

/// Dense users x items matrix of ranking scores; 0 means unrated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    data: Array2<u32>,
    rank_max: u32,
}

impl RankMatrix {
    pub const DEFAULT_RANK_MAX: u32 = 5;

    pub fn new(data: Array2<u32>, rank_max: u32) -> Result<Self, ProtocolError> {
        if rank_max == 0 {
            return Err(ProtocolError::RankOutOfRange { value: 0, max: 0 });
        }
        if let Some(&value) = data.iter().find(|&&v| v > rank_max) {
            return Err(ProtocolError::RankOutOfRange {
                value,
                max: rank_max,
            });
        }
        Ok(Self { data, rank_max })
    }

    pub fn n_users(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.data.ncols()
    }

    pub fn rank_max(&self) -> u32 {
        self.rank_max
    }

    pub fn get(&self, user: u32, item: u32) -> u32 {
        self.data[(user as usize, item as usize)]
    }

    pub fn data(&self) -> &Array2<u32> {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Socialized,
    Clustering,
    Merged,
}

/// Ordered, duplicate-free item ids with the pipeline stage that produced
/// them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateList {
    pub items: Vec<u32>,
    pub provenance: Provenance,
}

impl CandidateList {
    pub fn new(items: Vec<u32>, provenance: Provenance) -> Result<Self, ProtocolError> {
        let unique: BTreeSet<u32> = items.iter().copied().collect();
        if unique.len() != items.len() {
            return Err(ProtocolError::DuplicateEntries);
        }
        Ok(Self { items, provenance })
    }
}

/// Round-robin interleave starting with the socialized list, skipping
/// duplicates, truncated to `top_k`.
pub fn merge_lists(
    socialized: &CandidateList,
    clustering: &CandidateList,
    top_k: usize,
) -> Result<CandidateList, ProtocolError> {
    if top_k == 0 {
        return Err(ProtocolError::BadTopK);
    }
    for list in [socialized, clustering] {
        let unique: BTreeSet<u32> = list.items.iter().copied().collect();
        if unique.len() != list.items.len() {
            return Err(ProtocolError::DuplicateEntries);
        }
    }
    let mut merged = Vec::with_capacity(top_k);
    let mut seen = BTreeSet::new();
    let mut sources = [socialized.items.iter(), clustering.items.iter()];
    let mut exhausted = [false, false];
    let mut turn = 0;
    while merged.len() < top_k && !(exhausted[0] && exhausted[1]) {
        match sources[turn].find(|item| !seen.contains(*item)) {
            Some(&item) => {
                seen.insert(item);
                merged.push(item);
            }
            None => exhausted[turn] = true,
        }
        turn = 1 - turn;
    }
    Ok(CandidateList {
        items: merged,
        provenance: Provenance::Merged,
    })
}

// ---------------------------------------------------------------------------
// Bob
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BobState {
    Start,
    AwaitDegrees,
    Done,
}

/// Bob's session state: he owns the keypair and the similarity table for
/// one target user, and never learns which item a token stands for.
pub struct BobSession {
    keypair: Keypair,
    table: Vec<(u32, f64)>,
    codec: FixedPointCodec,
    rng: ChaCha20Rng,
    state: BobState,
    events: Vec<TranscriptEvent>,
    degenerate: bool,
}

impl BobSession {
    pub fn new(keypair: Keypair, table: Vec<(u32, f64)>, codec: FixedPointCodec, seed: u64) -> Self {
        Self {
            keypair,
            table,
            codec,
            rng: ChaCha20Rng::seed_from_u64(seed),
            state: BobState::Start,
            events: Vec::new(),
            degenerate: false,
        }
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Message 1: encode and encrypt every similarity score.
    pub fn send_similarities(&mut self) -> Result<Vec<u8>, ProtocolError> {
        if self.state != BobState::Start {
            return Err(ProtocolError::OutOfOrder);
        }
        let pk = self.keypair.public();
        let mut entries = Vec::with_capacity(self.table.len());
        let mut all_zero = true;
        for &(user, score) in &self.table {
            let encoded = self.codec.encode(score)?;
            if encoded != 0 {
                all_zero = false;
            }
            let ct = pk.encrypt_u64(encoded, &mut self.rng)?;
            entries.push((user, ct.value().clone()));
        }
        self.degenerate = !self.table.is_empty() && all_zero;
        let payload = ScoresPayload {
            key_bits: pk.bits() as u32,
            modulus: pk.modulus().clone(),
            entries,
        }
        .encode();
        self.events
            .push(event(Party::Bob, Direction::Sent, MSG_SCORES, &payload));
        self.state = BobState::AwaitDegrees;
        Ok(encode_frame(MSG_SCORES, &payload))
    }

    /// Message 2 in, message 3 out: decrypt the masked degrees and return
    /// tokens ranked from higher degree to lower, ties by ascending token
    /// bytes.
    pub fn rank_degrees(&mut self, frame: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        if self.state != BobState::AwaitDegrees {
            return Err(ProtocolError::OutOfOrder);
        }
        let (msg_type, payload) = decode_frame(frame)?;
        if msg_type != MSG_MASKED_DEGREES {
            return Err(ProtocolError::UnexpectedMessage {
                expected: MSG_MASKED_DEGREES,
                got: msg_type,
            });
        }
        let degrees = DegreesPayload::decode(payload)?;
        let unique: BTreeSet<ItemToken> = degrees.entries.iter().map(|&(t, _)| t).collect();
        if unique.len() != degrees.entries.len() {
            return Err(ProtocolError::Violation("duplicate tokens"));
        }
        let mut decrypted = Vec::with_capacity(degrees.entries.len());
        for (token, value) in &degrees.entries {
            let ct = Ciphertext::from_value(value.clone(), self.keypair.public())?;
            decrypted.push((*token, self.keypair.decrypt(&ct)?));
        }
        decrypted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        self.events.push(event(
            Party::Bob,
            Direction::Received,
            MSG_MASKED_DEGREES,
            payload,
        ));
        let order = OrderPayload {
            tokens: decrypted.into_iter().map(|(t, _)| t).collect(),
        }
        .encode();
        self.events
            .push(event(Party::Bob, Direction::Sent, MSG_TOKEN_ORDER, &order));
        self.state = BobState::Done;
        Ok(encode_frame(MSG_TOKEN_ORDER, &order))
    }
}

// ---------------------------------------------------------------------------
// Alice
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AliceState {
    AwaitScores,
    AwaitOrder,
    Done,
}

/// Alice's session state: she owns the rating matrix and the token map and
/// never sees a plaintext similarity or degree.
pub struct AliceSession {
    rank: RankMatrix,
    target: u32,
    scale: u64,
    rng: ChaCha20Rng,
    item_subset: Option<Vec<u32>>,
    mask_override: Option<u64>,
    mask: Option<BigUint>,
    token_map: BTreeMap<ItemToken, u32>,
    state: AliceState,
    events: Vec<TranscriptEvent>,
}

impl AliceSession {
    pub fn new(
        rank: RankMatrix,
        target: u32,
        scale: u64,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        if target as usize >= rank.n_users() {
            return Err(ProtocolError::TargetOutOfRange {
                target,
                n_users: rank.n_users(),
            });
        }
        Ok(Self {
            rank,
            target,
            scale,
            rng: ChaCha20Rng::seed_from_u64(seed),
            item_subset: None,
            mask_override: None,
            mask: None,
            token_map: BTreeMap::new(),
            state: AliceState::AwaitScores,
        events: Vec::new(),
        })
    }

    /// Restrict the protocol to a subset of items (default: all items).
    pub fn with_item_subset(mut self, items: Vec<u32>) -> Result<Self, ProtocolError> {
        let unique: BTreeSet<u32> = items.iter().copied().collect();
        if unique.len() != items.len() {
            return Err(ProtocolError::DuplicateEntries);
        }
        for &item in &items {
            if item as usize >= self.rank.n_items() {
                return Err(ProtocolError::ItemOutOfRange(item));
            }
        }
        self.item_subset = Some(items);
        Ok(self)
    }

    /// Pin the mask value instead of drawing it (audit/testing hook). The
    /// RNG still consumes one draw so token assignment is unaffected.
    pub fn override_mask(&mut self, mask: u64) {
        self.mask_override = Some(mask);
    }

    /// The mask used in this run, available after the degree message is
    /// built (Alice-side knowledge only).
    pub fn mask(&self) -> Option<&BigUint> {
        self.mask.as_ref()
    }

    /// Alice-private token resolution map, available after the degree
    /// message is built.
    pub fn token_map(&self) -> &BTreeMap<ItemToken, u32> {
        &self.token_map
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    /// Message 1 in, message 2 out: aggregate rank-weighted score
    /// ciphertexts per item, add the shared mask, pseudonymize and permute.
    pub fn compute_degrees(&mut self, frame: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        if self.state != AliceState::AwaitScores {
            return Err(ProtocolError::OutOfOrder);
        }
        let (msg_type, payload) = decode_frame(frame)?;
        if msg_type != MSG_SCORES {
            return Err(ProtocolError::UnexpectedMessage {
                expected: MSG_SCORES,
                got: msg_type,
            });
        }
        let scores = ScoresPayload::decode(payload)?;
        if scores.entries.is_empty() {
            return Err(ProtocolError::NoNeighbors);
        }
        let pk = PublicKey::from_parts(scores.key_bits as u64, scores.modulus);

        // Abort before any aggregation if the plaintext budget cannot hold
        // the largest possible masked degree.
        let budget = BigUint::from(self.rank.n_users())
            * BigUint::from(self.rank.rank_max())
            * BigUint::from(self.scale)
            + (BigUint::one() << 64);
        if budget >= *pk.modulus() {
            return Err(ProtocolError::PlaintextBudget);
        }

        let mut neighbors = Vec::with_capacity(scores.entries.len());
        for (user, value) in scores.entries {
            if user as usize >= self.rank.n_users() {
                return Err(ProtocolError::UnknownUser(user));
            }
            if user == self.target {
                continue;
            }
            neighbors.push((user, Ciphertext::from_value(value, &pk)?));
        }

        // Draw order: mask first, then per item (ascending id) the mask
        // encryption and the token, then the output permutation.
        let drawn_mask = self.rng.next_u64();
        let mask = BigUint::from(self.mask_override.unwrap_or(drawn_mask));

        let items: Vec<u32> = match &self.item_subset {
            Some(subset) => subset.clone(),
            None => (0..self.rank.n_items() as u32).collect(),
        };
        let mut entries: Vec<(ItemToken, BigUint)> = Vec::with_capacity(items.len());
        for &item in &items {
            let mut acc = Ciphertext::from_value(BigUint::one(), &pk)?;
            for (user, ct) in &neighbors {
                let rank = self.rank.get(*user, item);
                if rank > 0 {
                    let term = hom_scale_u64(&pk, ct, rank as u64)?;
                    acc = hom_add(&pk, &acc, &term)?;
                }
            }
            let masked = hom_add(&pk, &acc, &pk.encrypt(&mask, &mut self.rng)?)?;
            let token = loop {
                let mut bytes = [0u8; 16];
                self.rng.fill_bytes(&mut bytes);
                let token = ItemToken(bytes);
                if !self.token_map.contains_key(&token) {
                    break token;
                }
            };
            self.token_map.insert(token, item);
            entries.push((token, masked.value().clone()));
        }
        entries.shuffle(&mut self.rng);
        self.mask = Some(mask);

        self.events.push(event(
            Party::Alice,
            Direction::Received,
            MSG_SCORES,
            payload,
        ));
        let degrees = DegreesPayload { entries }.encode();
        self.events.push(event(
            Party::Alice,
            Direction::Sent,
            MSG_MASKED_DEGREES,
            &degrees,
        ));
        self.state = AliceState::AwaitOrder;
        Ok(encode_frame(MSG_MASKED_DEGREES, &degrees))
    }

    /// Message 3 in: order-preserving token -> item resolution.
    pub fn resolve_order(&mut self, frame: &[u8]) -> Result<CandidateList, ProtocolError> {
        if self.state != AliceState::AwaitOrder {
            return Err(ProtocolError::OutOfOrder);
        }
        let (msg_type, payload) = decode_frame(frame)?;
        if msg_type != MSG_TOKEN_ORDER {
            return Err(ProtocolError::UnexpectedMessage {
                expected: MSG_TOKEN_ORDER,
                got: msg_type,
            });
        }
        let order = OrderPayload::decode(payload)?;
        if order.tokens.len() != self.token_map.len() {
            return Err(ProtocolError::Violation("token count mismatch"));
        }
        let mut seen = BTreeSet::new();
        let mut items = Vec::with_capacity(order.tokens.len());
        for token in &order.tokens {
            if !seen.insert(*token) {
                return Err(ProtocolError::Violation("duplicate tokens"));
            }
            let item = self
                .token_map
                .get(token)
                .copied()
                .ok_or(ProtocolError::UnknownToken)?;
            items.push(item);
        }
        self.events.push(event(
            Party::Alice,
            Direction::Received,
            MSG_TOKEN_ORDER,
            payload,
        ));
        self.state = AliceState::Done;
        Ok(CandidateList {
            items,
            provenance: Provenance::Socialized,
        })
    }
}

/// Drive one full session in process. The same handlers serve the socket
/// transport, so both paths exchange identical frames.
pub fn run_protocol(
    alice: &mut AliceSession,
    bob: &mut BobSession,
) -> Result<(CandidateList, ProtocolTranscript), ProtocolError> {
    let m1 = bob.send_similarities()?;
    let m2 = alice.compute_degrees(&m1)?;
    let m3 = bob.rank_degrees(&m2)?;
    let list = alice.resolve_order(&m3)?;
    let transcript = ProtocolTranscript::assemble(
        bob.events.clone(),
        alice.events.clone(),
        bob.degenerate,
    );
    Ok((list, transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::keygen;
    use rand::Rng;
    use alloc::vec;

    fn test_keypair(seed: u64) -> Keypair {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        keygen(512, &mut rng).unwrap()
    }

    fn rank_from_rows(rows: &[&[u32]]) -> RankMatrix {
        let n = rows.len();
        let m = rows[0].len();
        let flat: Vec<u32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        RankMatrix::new(Array2::from_shape_vec((n, m), flat).unwrap(), 5).unwrap()
    }

    #[test]
    fn frame_roundtrip_and_rejections() {
        let frame = encode_frame(MSG_SCORES, b"abc");
        let (t, payload) = decode_frame(&frame).unwrap();
        assert_eq!((t, payload), (MSG_SCORES, &b"abc"[..]));

        let mut bad = frame.clone();
        bad[0] = 0x51;
        assert!(matches!(
            decode_frame(&bad),
            Err(ProtocolError::Framing("bad magic"))
        ));
        let mut bad = frame.clone();
        bad[1] = 0x02;
        assert!(matches!(
            decode_frame(&bad),
            Err(ProtocolError::Framing("unsupported version"))
        ));
        let mut bad = frame.clone();
        bad[2] = 0x07;
        assert!(matches!(
            decode_frame(&bad),
            Err(ProtocolError::Framing("unknown message type"))
        ));
        let mut truncated = frame.clone();
        truncated.pop();
        assert!(matches!(
            decode_frame(&truncated),
            Err(ProtocolError::Framing("length mismatch"))
        ));
        let mut trailing = frame;
        trailing.push(0);
        assert!(matches!(
            decode_frame(&trailing),
            Err(ProtocolError::Framing("length mismatch"))
        ));
    }

    #[test]
    fn payload_roundtrips() {
        let scores = ScoresPayload {
            key_bits: 512,
            modulus: BigUint::from(12345678901234567890u64),
            entries: vec![
                (1, BigUint::from(42u32)),
                (2, BigUint::ZERO),
            ],
        };
        assert_eq!(
            ScoresPayload::decode(&scores.encode()).unwrap(),
            scores
        );
        let degrees = DegreesPayload {
            entries: vec![(ItemToken([7u8; 16]), BigUint::from(9u32))],
        };
        assert_eq!(DegreesPayload::decode(&degrees.encode()).unwrap(), degrees);
        let order = OrderPayload {
            tokens: vec![ItemToken([1u8; 16]), ItemToken([2u8; 16])],
        };
        assert_eq!(OrderPayload::decode(&order.encode()).unwrap(), order);
        assert!(matches!(
            OrderPayload::decode(&[0, 0, 0, 2, 1]),
            Err(ProtocolError::MalformedPayload(_))
        ));
    }

    /// Plaintext oracle: degree(item) = sum_j encoded_sim_j * rank_jk.
    fn oracle_degrees(
        table: &[(u32, f64)],
        rank: &RankMatrix,
        target: u32,
        codec: &FixedPointCodec,
    ) -> Vec<u128> {
        (0..rank.n_items() as u32)
            .map(|item| {
                table
                    .iter()
                    .filter(|&&(user, _)| user != target)
                    .map(|&(user, sim)| {
                        codec.encode(sim).unwrap() as u128 * rank.get(user, item) as u128
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn documented_degree_example() {
        // Neighbors with sims {0.5, 0.25}; item A ranks {4, 0}; item B {2, 2}.
        let kp = test_keypair(100);
        let codec = FixedPointCodec::default();
        let table = vec![(1, 0.5), (2, 0.25)];
        let rank = rank_from_rows(&[&[0, 0], &[4, 2], &[0, 2]]);
        let mut bob = BobSession::new(kp.clone(), table, codec, 7);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 13).unwrap();
        let m1 = bob.send_similarities().unwrap();
        let m2 = alice.compute_degrees(&m1).unwrap();
        let degrees = DegreesPayload::decode(decode_frame(&m2).unwrap().1).unwrap();
        let mask = alice.mask().unwrap().clone();
        for (token, value) in &degrees.entries {
            let ct = Ciphertext::from_value(value.clone(), kp.public()).unwrap();
            let unmasked = kp.decrypt(&ct).unwrap() - &mask;
            let item = alice.token_map()[token];
            let degree = codec.decode(u64::try_from(unmasked).unwrap());
            let expected = if item == 0 { 2.0 } else { 1.5 };
            assert!((degree - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_ranks_decode_to_mask() {
        let kp = test_keypair(101);
        let codec = FixedPointCodec::default();
        let table = vec![(1, 0.9)];
        let rank = rank_from_rows(&[&[0], &[0]]);
        let mut bob = BobSession::new(kp.clone(), table, codec, 1);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 2).unwrap();
        let m1 = bob.send_similarities().unwrap();
        let m2 = alice.compute_degrees(&m1).unwrap();
        let degrees = DegreesPayload::decode(decode_frame(&m2).unwrap().1).unwrap();
        let ct = Ciphertext::from_value(degrees.entries[0].1.clone(), kp.public()).unwrap();
        assert_eq!(&kp.decrypt(&ct).unwrap(), alice.mask().unwrap());
    }

    #[test]
    fn protocol_order_matches_plaintext_oracle() {
        let codec = FixedPointCodec::default();
        for seed in 0..5u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
            let n_users = rng.gen_range(3..8);
            let n_items = rng.gen_range(2..10);
            let target = rng.gen_range(0..n_users) as u32;
            let table: Vec<(u32, f64)> = (0..n_users as u32)
                .filter(|&u| u != target)
                .map(|u| (u, rng.gen::<f64>()))
                .collect();
            let rank = RankMatrix::new(
                Array2::from_shape_fn((n_users, n_items), |_| rng.gen_range(0..=5u32)),
                5,
            )
            .unwrap();
            let kp = test_keypair(200 + seed);
            let mut bob = BobSession::new(kp, table.clone(), codec, seed);
            let mut alice = AliceSession::new(rank.clone(), target, codec.scale(), seed + 50)
                .unwrap();
            let (list, transcript) = run_protocol(&mut alice, &mut bob).unwrap();
            validate_transcript(&transcript).unwrap();

            let oracle = oracle_degrees(&table, &rank, target, &codec);
            // Same tie rule over the same token assignment.
            let mut by_item: BTreeMap<u32, ItemToken> = BTreeMap::new();
            for (token, item) in alice.token_map() {
                by_item.insert(*item, *token);
            }
            let mut expected: Vec<(u128, ItemToken, u32)> = oracle
                .iter()
                .enumerate()
                .map(|(item, &d)| (d, by_item[&(item as u32)], item as u32))
                .collect();
            expected.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let expected_items: Vec<u32> = expected.into_iter().map(|(_, _, i)| i).collect();
            assert_eq!(list.items, expected_items, "seed {seed}");
        }
    }

    #[test]
    fn mask_does_not_change_the_order() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(300);
        let table = vec![(1, 0.3), (2, 0.8)];
        let rank = rank_from_rows(&[&[0, 0, 0], &[5, 1, 3], &[2, 2, 2]]);
        let mut lists = Vec::new();
        for mask in [7u64, u64::MAX / 3] {
            let mut bob = BobSession::new(kp.clone(), table.clone(), codec, 9);
            let mut alice = AliceSession::new(rank.clone(), 0, codec.scale(), 77).unwrap();
            alice.override_mask(mask);
            let (list, _) = run_protocol(&mut alice, &mut bob).unwrap();
            lists.push(list);
        }
        assert_eq!(lists[0], lists[1]);
    }

    #[test]
    fn token_sets_disjoint_across_runs() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(301);
        let table = vec![(1, 0.4)];
        let rank = rank_from_rows(&[&[0, 0], &[3, 1]]);
        let mut token_sets = Vec::new();
        for seed in [5u64, 6u64] {
            let mut bob = BobSession::new(kp.clone(), table.clone(), codec, 9);
            let mut alice = AliceSession::new(rank.clone(), 0, codec.scale(), seed).unwrap();
            let m1 = bob.send_similarities().unwrap();
            alice.compute_degrees(&m1).unwrap();
            let tokens: BTreeSet<ItemToken> = alice.token_map().keys().copied().collect();
            token_sets.push(tokens);
        }
        assert!(token_sets[0].is_disjoint(&token_sets[1]));
    }

    #[test]
    fn empty_batch_aborts_with_no_neighbors() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(302);
        let mut bob = BobSession::new(kp, vec![], codec, 1);
        let rank = rank_from_rows(&[&[0]]);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 1).unwrap();
        let m1 = bob.send_similarities().unwrap();
        assert!(matches!(
            alice.compute_degrees(&m1),
            Err(ProtocolError::NoNeighbors)
        ));
    }

    #[test]
    fn degenerate_all_zero_similarities_flagged() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(303);
        let table = vec![(1, 0.0), (2, 0.0)];
        let rank = rank_from_rows(&[&[0, 0], &[1, 2], &[3, 0]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let (list, transcript) = run_protocol(&mut alice, &mut bob).unwrap();
        assert!(transcript.degenerate);
        // Equal degrees: order decided by ascending token bytes.
        let mut by_item: BTreeMap<u32, ItemToken> = BTreeMap::new();
        for (token, item) in alice.token_map() {
            by_item.insert(*item, *token);
        }
        let mut expected: Vec<(ItemToken, u32)> =
            by_item.iter().map(|(&i, &t)| (t, i)).collect();
        expected.sort();
        let expected_items: Vec<u32> = expected.into_iter().map(|(_, i)| i).collect();
        assert_eq!(list.items, expected_items);
    }

    #[test]
    fn replayed_degree_message_is_rejected() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(304);
        let table = vec![(1, 0.5)];
        let rank = rank_from_rows(&[&[0, 1], &[2, 3]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let m1 = bob.send_similarities().unwrap();
        let m2 = alice.compute_degrees(&m1).unwrap();
        bob.rank_degrees(&m2).unwrap();
        assert!(matches!(
            bob.rank_degrees(&m2),
            Err(ProtocolError::OutOfOrder)
        ));
    }

    #[test]
    fn wrong_message_type_is_rejected() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(305);
        let table = vec![(1, 0.5)];
        let rank = rank_from_rows(&[&[0], &[1]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let m1 = bob.send_similarities().unwrap();
        assert!(matches!(
            bob.rank_degrees(&m1),
            Err(ProtocolError::UnexpectedMessage { .. })
        ));
        let m2 = alice.compute_degrees(&m1).unwrap();
        assert!(matches!(
            alice.resolve_order(&m2),
            Err(ProtocolError::UnexpectedMessage { .. })
        ));
    }

    #[test]
    fn unknown_token_is_a_protocol_violation() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(306);
        let table = vec![(1, 0.5)];
        let rank = rank_from_rows(&[&[0], &[1]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let m1 = bob.send_similarities().unwrap();
        alice.compute_degrees(&m1).unwrap();
        let bogus = OrderPayload {
            tokens: vec![ItemToken([0xAB; 16])],
        };
        let frame = encode_frame(MSG_TOKEN_ORDER, &bogus.encode());
        assert!(matches!(
            alice.resolve_order(&frame),
            Err(ProtocolError::UnknownToken)
        ));
    }

    #[test]
    fn plaintext_budget_is_checked_at_setup() {
        // A fabricated tiny modulus trips the budget check before any
        // aggregation happens.
        let codec = FixedPointCodec::default();
        let rank = rank_from_rows(&[&[0], &[1]]);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let payload = ScoresPayload {
            key_bits: 16,
            modulus: BigUint::from(65537u32),
            entries: vec![(1, BigUint::from(9u32))],
        };
        let frame = encode_frame(MSG_SCORES, &payload.encode());
        assert!(matches!(
            alice.compute_degrees(&frame),
            Err(ProtocolError::PlaintextBudget)
        ));
    }

    #[test]
    fn transcript_validation_catches_tampering() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(307);
        let table = vec![(1, 0.5)];
        let rank = rank_from_rows(&[&[0, 1], &[2, 0]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4).unwrap();
        let (_, transcript) = run_protocol(&mut alice, &mut bob).unwrap();
        validate_transcript(&transcript).unwrap();

        let mut tampered = transcript.clone();
        tampered.events[0].payload[0] ^= 0xFF;
        assert!(validate_transcript(&tampered).is_err());

        let mut reordered = transcript.clone();
        reordered.events.swap(0, 2);
        assert!(validate_transcript(&reordered).is_err());

        let mut truncated = transcript;
        truncated.events.pop();
        assert!(validate_transcript(&truncated).is_err());
    }

    #[test]
    fn item_subset_restricts_the_run() {
        let codec = FixedPointCodec::default();
        let kp = test_keypair(308);
        let table = vec![(1, 0.5)];
        let rank = rank_from_rows(&[&[0, 0, 0], &[1, 2, 3]]);
        let mut bob = BobSession::new(kp, table, codec, 4);
        let mut alice = AliceSession::new(rank, 0, codec.scale(), 4)
            .unwrap()
            .with_item_subset(vec![2, 0])
            .unwrap();
        let (list, _) = run_protocol(&mut alice, &mut bob).unwrap();
        assert_eq!(list.items.len(), 2);
        assert!(list.items.contains(&0) && list.items.contains(&2));
    }

    #[test]
    fn merge_interleaves_and_dedupes() {
        let soc = CandidateList::new(vec![10, 11, 12], Provenance::Socialized).unwrap();
        let clus = CandidateList::new(vec![20, 11, 21], Provenance::Clustering).unwrap();
        let merged = merge_lists(&soc, &clus, 4).unwrap();
        assert_eq!(merged.items, vec![10, 20, 11, 21]);
        assert_eq!(merged.provenance, Provenance::Merged);

        let empty = CandidateList::new(vec![], Provenance::Clustering).unwrap();
        let merged = merge_lists(&soc, &empty, 2).unwrap();
        assert_eq!(merged.items, vec![10, 11]);

        let same = merge_lists(&soc, &soc, 10).unwrap();
        assert_eq!(same.items, vec![10, 11, 12]);

        assert!(matches!(
            merge_lists(&soc, &clus, 0),
            Err(ProtocolError::BadTopK)
        ));
        let dup = CandidateList {
            items: vec![1, 1],
            provenance: Provenance::Clustering,
        };
        assert!(matches!(
            merge_lists(&soc, &dup, 3),
            Err(ProtocolError::DuplicateEntries)
        ));
    }

    #[test]
    fn rank_matrix_rejects_out_of_range() {
        let data = Array2::from_shape_vec((1, 2), vec![6u32, 0]).unwrap();
        assert!(matches!(
            RankMatrix::new(data, 5),
            Err(ProtocolError::RankOutOfRange { value: 6, max: 5 })
        ));
    }
}
