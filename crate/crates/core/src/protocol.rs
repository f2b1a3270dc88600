//! Entity flows wiring crypto, ledger and PHY into the secure handover
//! scheme, plus the unencrypted legacy baseline and the adversary suite.
//!
//! Flow of a secure session: each UE registers its identity-derived public
//! key with the ledger and receives the base-station key `PR_B` over a
//! trusted channel; the PGW encrypts each payload to its owner's public key
//! (layer 1); the base station wraps each layer-1 ciphertext under `PR_B`
//! (layer 2), modulates both, and superposes weak-over-strong; the strong
//! UE runs SIC, the weak UE treats the strong layer as noise, and both
//! unwrap the two layers with their credentials.
//!
//! Control information (frame lengths, ids, power split) travels error-free
//! out-of-band; only payload bits cross the noisy superposed channel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    decrypt_layer1, decrypt_layer2, derive_private_key, derive_public_key, encrypt_layer1,
    encrypt_layer2, CryptoError, CurveParams, DeviceIdentity, KBox, Layer1Ciphertext,
    Layer2Ciphertext, PrivateKey,
};
use crate::ledger::{IdentityLedger, LedgerError, RegistrationRecord};
use crate::phy::{
    apply_channel, bits_to_bytes, bytes_to_bits, decode_weak_direct, modulate, sic_decode_strong,
    superpose, ChannelRealization, PhyError, PowerAllocation, SuperposedSignal,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("layer-2 authentication failure (missing or wrong PR_B, or frame corrupted)")]
    Layer2AuthFailure,
    #[error("layer-1 authentication failure (payload not addressed to this UE)")]
    Layer1AuthFailure,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("requester {0:?} is not registered")]
    NotRegistered(String),
    #[error("superposition requires exactly two users, got {0}")]
    BadUserCount(usize),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Crypto(CryptoError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

impl From<CryptoError> for ProtocolError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::AuthFailure => ProtocolError::Layer1AuthFailure,
            other => ProtocolError::Crypto(other),
        }
    }
}

/// Which superposition layer a user occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    Strong,
    Weak,
}

/// Out-of-band per-user framing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserControl {
    pub ue_id: String,
    pub role: UserRole,
    /// True bit length of this user's layer-2 ciphertext before padding.
    pub bit_len: usize,
}

/// Out-of-band frame header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameControl {
    pub users: Vec<UserControl>,
    pub power_total: f64,
    pub weak_fraction: f64,
    pub symbol_count: usize,
}

/// The on-air broadcast: control header plus the superposed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastFrame {
    pub control: FrameControl,
    pub signal: SuperposedSignal,
}

/// Message kinds appearing in a session trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    RegistrationRequest,
    RegistrationAck,
    DataRequest,
    DataForward,
    PkRequest,
    PkResponse,
    EncryptedDelivery,
    BroadcastFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMessage {
    pub seq: u64,
    pub sender: String,
    pub receiver: String,
    pub kind: MessageKind,
    pub detail: String,
}

/// Per-UE delivery result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UeOutcome {
    Recovered {
        #[serde(with = "hex_vec")]
        payload: Vec<u8>,
    },
    Failed {
        error: String,
    },
}

/// Deterministic log of one session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionTrace {
    pub messages: Vec<TraceMessage>,
    pub outcomes: Vec<(String, UeOutcome)>,
    /// Legacy scheme only: the weak user's plaintext as observed by the
    /// strong user during cancellation.
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_hex_vec", default)]
    pub ue1_observed_weak_payload: Option<Vec<u8>>,
}

impl SessionTrace {
    fn push(&mut self, sender: &str, receiver: &str, kind: MessageKind, detail: String) {
        let seq = self.messages.len() as u64;
        self.messages.push(TraceMessage {
            seq,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            kind,
            detail,
        });
    }

    /// One JSON object per line: messages first, then outcomes, in a
    /// stable field order for byte-identical replays.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for msg in &self.messages {
            out.push_str(&serde_json::to_string(msg).unwrap());
            out.push('\n');
        }
        for (ue_id, outcome) in &self.outcomes {
            let line = serde_json::json!({ "outcome_for": ue_id, "result": outcome });
            out.push_str(&serde_json::to_string(&line).unwrap());
            out.push('\n');
        }
        if let Some(observed) = &self.ue1_observed_weak_payload {
            let line = serde_json::json!({ "ue1_observed_weak_payload": hex::encode(observed) });
            out.push_str(&serde_json::to_string(&line).unwrap());
            out.push('\n');
        }
        out
    }
}

/// Registers a UE: derives its key pair from the identity, appends the
/// public key to the ledger, and on acceptance hands back a KBox holding
/// `PR_B` (trusted registration channel).
pub fn register_ue(
    ue_id: &str,
    identity: &DeviceIdentity,
    ledger: &mut IdentityLedger,
    bs_key: &PrivateKey,
    registered_at_ms: u64,
) -> Result<KBox, ProtocolError> {
    let curve = CurveParams::secp256k1();
    let private = derive_private_key(identity, &curve)?;
    let public = derive_public_key(&private, &curve)?;
    ledger.register_public_key(RegistrationRecord {
        ue_id: ue_id.to_string(),
        public_key: public.to_compressed().to_vec(),
        registered_at_ms,
    })?;
    Ok(KBox::new(private)?.with_bs_key(bs_key.clone()))
}

/// The PGW looks up each requester's public key and produces its layer-1
/// ciphertext.
pub fn pgw_prepare_payloads(
    requests: &[(String, Vec<u8>)],
    ledger: &IdentityLedger,
    rng: &mut impl rand::RngCore,
) -> Result<Vec<Layer1Ciphertext>, ProtocolError> {
    requests
        .iter()
        .map(|(ue_id, payload)| {
            let pk = ledger
                .lookup_public_key(ue_id)
                .map_err(|_| ProtocolError::NotRegistered(ue_id.clone()))?;
            Ok(encrypt_layer1(&pk, payload, rng))
        })
        .collect()
}

/// Wraps each layer-1 ciphertext under `PR_B`, pads both bit streams with
/// zero bits to equal length, modulates, and superposes weak-over-strong.
pub fn bnodeb_broadcast(
    users: &[(String, UserRole)],
    x_per_ue: &[Layer1Ciphertext],
    bs_key: &PrivateKey,
    alloc: &PowerAllocation,
    rng: &mut impl rand::RngCore,
) -> Result<BroadcastFrame, ProtocolError> {
    if users.len() != 2 || x_per_ue.len() != 2 {
        return Err(ProtocolError::BadUserCount(users.len().min(x_per_ue.len())));
    }
    let roles: Vec<UserRole> = users.iter().map(|(_, r)| *r).collect();
    if !(roles.contains(&UserRole::Strong) && roles.contains(&UserRole::Weak)) {
        return Err(ProtocolError::MalformedFrame(
            "need exactly one strong and one weak user".into(),
        ));
    }

    let mut controls = Vec::with_capacity(2);
    let mut bitstreams = Vec::with_capacity(2);
    for ((ue_id, role), x) in users.iter().zip(x_per_ue) {
        let wrapped = encrypt_layer2(bs_key, &x.to_bytes(), rng);
        let bits = bytes_to_bits(&wrapped.to_bytes());
        controls.push(UserControl {
            ue_id: ue_id.clone(),
            role: *role,
            bit_len: bits.len(),
        });
        bitstreams.push(bits);
    }
    let symbol_count = bitstreams.iter().map(Vec::len).max().unwrap();
    for bits in &mut bitstreams {
        bits.resize(symbol_count, 0);
    }
    let weak_idx = controls.iter().position(|c| c.role == UserRole::Weak).unwrap();
    let strong_idx = 1 - weak_idx;
    let signal = superpose(
        &modulate(&bitstreams[weak_idx]),
        &modulate(&bitstreams[strong_idx]),
        alloc,
    )?;
    Ok(BroadcastFrame {
        control: FrameControl {
            users: controls,
            power_total: alloc.total,
            weak_fraction: alloc.p_weak / alloc.total,
            symbol_count,
        },
        signal,
    })
}

fn alloc_from_control(control: &FrameControl) -> Result<PowerAllocation, ProtocolError> {
    Ok(crate::phy::allocate_power(
        control.power_total,
        control.weak_fraction,
    )?)
}

/// Demodulates one layer of a received frame and returns its layer-2 wire
/// bytes, padding stripped.
///
/// A weak-role receiver can only extract the weak layer; the strong layer
/// is below its decoding threshold by construction.
pub fn receive_layer_bytes(
    frame: &BroadcastFrame,
    ch: &ChannelRealization,
    receiver_role: UserRole,
    target_role: UserRole,
    rng: &mut impl rand::Rng,
) -> Result<Vec<u8>, ProtocolError> {
    let alloc = alloc_from_control(&frame.control)?;
    let gain = match receiver_role {
        UserRole::Strong => ch.h_strong,
        UserRole::Weak => ch.h_weak,
    };
    let y = apply_channel(&frame.signal, gain, ch.noise_sigma, rng);
    let bits = match (receiver_role, target_role) {
        (UserRole::Strong, target) => {
            let (weak_bits, strong_bits) = sic_decode_strong(&y, &alloc, ch, None);
            match target {
                UserRole::Weak => weak_bits,
                UserRole::Strong => strong_bits,
            }
        }
        (UserRole::Weak, UserRole::Weak) => decode_weak_direct(&y, &alloc, ch),
        (UserRole::Weak, UserRole::Strong) => {
            return Err(ProtocolError::MalformedFrame(
                "weak receiver cannot extract the strong layer".into(),
            ))
        }
    };
    let ctl = frame
        .control
        .users
        .iter()
        .find(|c| c.role == target_role)
        .ok_or_else(|| ProtocolError::MalformedFrame("missing control entry".into()))?;
    if ctl.bit_len > bits.len() || ctl.bit_len % 8 != 0 {
        return Err(ProtocolError::MalformedFrame(format!(
            "control bit_len {} inconsistent with {} received symbols",
            ctl.bit_len,
            bits.len()
        )));
    }
    Ok(bits_to_bytes(&bits[..ctl.bit_len]))
}

/// Two-phase reception at a legitimate UE: demodulate (SIC for the strong
/// role), strip padding, unwrap layer 2 with `PR_B`, then layer 1 with the
/// UE's own private key.
pub fn ue_receive(
    frame: &BroadcastFrame,
    kbox: &KBox,
    ch: &ChannelRealization,
    role: UserRole,
    rng: &mut impl rand::Rng,
) -> Result<Vec<u8>, ProtocolError> {
    let wire = receive_layer_bytes(frame, ch, role, role, rng)?;
    let layer2 = Layer2Ciphertext::from_bytes(&wire)
        .map_err(|_| ProtocolError::Layer2AuthFailure)?;
    let bs_key = kbox
        .bs_private
        .as_ref()
        .ok_or(ProtocolError::Layer2AuthFailure)?;
    let x_wire =
        decrypt_layer2(bs_key, &layer2).map_err(|_| ProtocolError::Layer2AuthFailure)?;
    let layer1 = Layer1Ciphertext::from_bytes(&x_wire)
        .map_err(|_| ProtocolError::Layer2AuthFailure)?;
    decrypt_layer1(&kbox.own_private, &layer1).map_err(|e| match e {
        CryptoError::AuthFailure => ProtocolError::Layer1AuthFailure,
        other => ProtocolError::Crypto(other),
    })
}

/// Everything produced by one secure session, kept for the adversary
/// suite.
#[derive(Debug)]
pub struct SecureSession {
    pub trace: SessionTrace,
    pub ledger: IdentityLedger,
    pub kboxes: Vec<(String, KBox)>,
    pub frame: BroadcastFrame,
    pub payloads: Vec<(String, Vec<u8>)>,
    pub identities: Vec<(String, DeviceIdentity)>,
    pub bs_key: PrivateKey,
    pub channel: ChannelRealization,
}

/// Runs the full secure flow for two UEs. `users[0]` is the strong user,
/// `users[1]` the weak one.
pub fn run_secure_session(
    identities: &[(String, DeviceIdentity)],
    payloads: &[(String, Vec<u8>)],
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    bs_key: &PrivateKey,
    registered_at_ms: u64,
    rng: &mut impl rand::Rng,
) -> Result<SecureSession, ProtocolError> {
    if identities.len() != 2 || payloads.len() != 2 {
        return Err(ProtocolError::BadUserCount(identities.len()));
    }
    let mut trace = SessionTrace::default();
    let mut ledger = IdentityLedger::init();

    let mut kboxes = Vec::with_capacity(2);
    for (i, (ue_id, identity)) in identities.iter().enumerate() {
        trace.push(ue_id, "bNodeB", MessageKind::RegistrationRequest, format!("public key registration for {ue_id}"));
        let kbox = register_ue(ue_id, identity, &mut ledger, bs_key, registered_at_ms + i as u64)?;
        trace.push("bNodeB", ue_id, MessageKind::RegistrationAck, "PR_B issued over trusted channel".into());
        kboxes.push((ue_id.clone(), kbox));
    }

    for (ue_id, _) in payloads {
        trace.push(ue_id, "bNodeB", MessageKind::DataRequest, format!("Data_request({ue_id})"));
        trace.push("bNodeB", "PGW", MessageKind::DataForward, format!("forwarded Data_request({ue_id})"));
    }
    trace.push(
        "PGW",
        "BIMS",
        MessageKind::PkRequest,
        format!("PK_request({}, {})", payloads[1].0, payloads[0].0),
    );
    trace.push("BIMS", "PGW", MessageKind::PkResponse, "registered public keys returned".into());

    let x_per_ue = pgw_prepare_payloads(payloads, &ledger, rng)?;
    for ((ue_id, _), x) in payloads.iter().zip(&x_per_ue) {
        trace.push(
            "PGW",
            "bNodeB",
            MessageKind::EncryptedDelivery,
            format!("x for {ue_id}: {} bytes", x.to_bytes().len()),
        );
    }

    let users = vec![
        (payloads[0].0.clone(), UserRole::Strong),
        (payloads[1].0.clone(), UserRole::Weak),
    ];
    let frame = bnodeb_broadcast(&users, &x_per_ue, bs_key, alloc, rng)?;
    trace.push(
        "bNodeB",
        "*",
        MessageKind::BroadcastFrame,
        format!("superposed frame, {} symbols", frame.control.symbol_count),
    );

    let mut outcomes = Vec::with_capacity(2);
    for ((ue_id, kbox), role) in kboxes.iter().zip([UserRole::Strong, UserRole::Weak]) {
        let outcome = match ue_receive(&frame, kbox, ch, role, rng) {
            Ok(payload) => UeOutcome::Recovered { payload },
            Err(e) => UeOutcome::Failed {
                error: e.to_string(),
            },
        };
        outcomes.push((ue_id.clone(), outcome));
    }
    trace.outcomes = outcomes;

    Ok(SecureSession {
        trace,
        ledger,
        kboxes,
        frame,
        payloads: payloads.to_vec(),
        identities: identities.to_vec(),
        bs_key: bs_key.clone(),
        channel: *ch,
    })
}

/// The unencrypted baseline: plaintext bits are modulated and superposed
/// directly, so the strong user observes the weak user's plaintext during
/// cancellation.
pub fn run_legacy_scheme(
    payloads: &[(String, Vec<u8>)],
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    rng: &mut impl rand::Rng,
) -> Result<SessionTrace, ProtocolError> {
    if payloads.len() != 2 {
        return Err(ProtocolError::BadUserCount(payloads.len()));
    }
    let mut trace = SessionTrace::default();
    for (ue_id, _) in payloads {
        trace.push(ue_id, "eNodeB", MessageKind::DataRequest, format!("Data_request({ue_id})"));
        trace.push("eNodeB", "PGW", MessageKind::DataForward, format!("forwarded Data_request({ue_id})"));
    }
    for (ue_id, payload) in payloads {
        trace.push(
            "PGW",
            "eNodeB",
            MessageKind::DataForward,
            format!("unencrypted payload for {ue_id}: {} bytes", payload.len()),
        );
    }

    let strong = &payloads[0];
    let weak = &payloads[1];
    let mut strong_bits = bytes_to_bits(&strong.1);
    let mut weak_bits = bytes_to_bits(&weak.1);
    let strong_len = strong_bits.len();
    let weak_len = weak_bits.len();
    let symbol_count = strong_len.max(weak_len);
    strong_bits.resize(symbol_count, 0);
    weak_bits.resize(symbol_count, 0);
    let signal = superpose(&modulate(&weak_bits), &modulate(&strong_bits), alloc)?;
    trace.push(
        "eNodeB",
        "*",
        MessageKind::BroadcastFrame,
        format!("superposed plaintext frame, {symbol_count} symbols"),
    );

    // strong user: SIC exposes the weak user's bits before cancellation
    let y_strong = apply_channel(&signal, ch.h_strong, ch.noise_sigma, rng);
    let (observed_weak, decoded_strong) = sic_decode_strong(&y_strong, alloc, ch, None);
    trace.ue1_observed_weak_payload = Some(bits_to_bytes(&observed_weak[..weak_len]));

    // weak user: direct detection
    let y_weak = apply_channel(&signal, ch.h_weak, ch.noise_sigma, rng);
    let decoded_weak = decode_weak_direct(&y_weak, alloc, ch);

    trace.outcomes = vec![
        (
            strong.0.clone(),
            UeOutcome::Recovered {
                payload: bits_to_bytes(&decoded_strong[..strong_len]),
            },
        ),
        (
            weak.0.clone(),
            UeOutcome::Recovered {
                payload: bits_to_bytes(&decoded_weak[..weak_len]),
            },
        ),
    ];
    Ok(trace)
}

/// The adversary kinds from the comparative analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Captures the broadcast but holds no PR_B and no UE private key.
    Eavesdropper,
    /// A legitimate UE attacking the other user's payload.
    CrossUserReader,
    /// Knows the victim's IMEI and MAC only.
    SpoofingClone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryProfile {
    pub kind: AdversaryKind,
    /// Which credentials the adversary holds.
    pub knowledge: Vec<String>,
}

impl AdversaryProfile {
    pub fn standard_suite() -> Vec<AdversaryProfile> {
        vec![
            AdversaryProfile {
                kind: AdversaryKind::Eavesdropper,
                knowledge: vec!["broadcast frame".into(), "frame control header".into()],
            },
            AdversaryProfile {
                kind: AdversaryKind::CrossUserReader,
                knowledge: vec!["own key pair".into(), "PR_B".into(), "broadcast frame".into()],
            },
            AdversaryProfile {
                kind: AdversaryKind::SpoofingClone,
                knowledge: vec!["victim IMEI".into(), "victim MAC".into()],
            },
        ]
    }
}

/// One attack verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub kind: AdversaryKind,
    pub blocked: bool,
    pub detail: String,
    /// Flags assumptions the defense rests on (e.g. full-identity clones
    /// derive the identical key).
    pub residual_note: Option<String>,
}

/// Report over a suite of adversaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub outcomes: Vec<AttackOutcome>,
}

impl AttackReport {
    pub fn all_blocked(&self) -> bool {
        self.outcomes.iter().all(|o| o.blocked)
    }
}

/// Runs each adversary against a completed secure session.
pub fn run_attack_suite(
    profiles: &[AdversaryProfile],
    session: &SecureSession,
    rng: &mut impl rand::Rng,
) -> Result<AttackReport, ProtocolError> {
    let mut outcomes = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let outcome = match profile.kind {
            AdversaryKind::Eavesdropper => attack_eavesdropper(session, rng)?,
            AdversaryKind::CrossUserReader => attack_cross_user(session, rng)?,
            AdversaryKind::SpoofingClone => attack_spoofing_clone(session, rng)?,
        };
        outcomes.push(outcome);
    }
    Ok(AttackReport { outcomes })
}

fn attack_eavesdropper(
    session: &SecureSession,
    rng: &mut impl rand::Rng,
) -> Result<AttackOutcome, ProtocolError> {
    // the eavesdropper has an ideal receiver (strong-user channel) but no
    // PR_B; it guesses a random key
    let wire = receive_layer_bytes(
        &session.frame,
        &session.channel,
        UserRole::Strong,
        UserRole::Weak,
        rng,
    )?;
    let layer2 = Layer2Ciphertext::from_bytes(&wire)
        .map_err(|_| ProtocolError::MalformedFrame("eavesdropper demodulation failed".into()))?;
    let guessed = PrivateKey::from_entropy(rng, crate::crypto::KeyRole::BaseStation);
    let blocked = decrypt_layer2(&guessed, &layer2).is_err();
    Ok(AttackOutcome {
        kind: AdversaryKind::Eavesdropper,
        blocked,
        detail: if blocked {
            "layer-2 decryption without PR_B rejected by AEAD tag".into()
        } else {
            "layer-2 decryption succeeded without PR_B".into()
        },
        residual_note: None,
    })
}

fn attack_cross_user(
    session: &SecureSession,
    rng: &mut impl rand::Rng,
) -> Result<AttackOutcome, ProtocolError> {
    // UE1 (strong) legitimately holds PR_B and decodes the weak layer
    // during SIC, then tries its own private key on UE2's layer-1 envelope
    let (_, strong_kbox) = &session.kboxes[0];
    let wire = receive_layer_bytes(
        &session.frame,
        &session.channel,
        UserRole::Strong,
        UserRole::Weak,
        rng,
    )?;
    let layer2 = Layer2Ciphertext::from_bytes(&wire)
        .map_err(|_| ProtocolError::MalformedFrame("cross-user demodulation failed".into()))?;
    let bs_key = strong_kbox.bs_private.as_ref().expect("registered UE holds PR_B");
    let x_wire = decrypt_layer2(bs_key, &layer2).map_err(|_| ProtocolError::Layer2AuthFailure)?;
    let layer1 = Layer1Ciphertext::from_bytes(&x_wire).map_err(ProtocolError::Crypto)?;
    let blocked = matches!(
        decrypt_layer1(&strong_kbox.own_private, &layer1),
        Err(CryptoError::AuthFailure)
    );
    Ok(AttackOutcome {
        kind: AdversaryKind::CrossUserReader,
        blocked,
        detail: if blocked {
            "UE1's private key fails on UE2's layer-1 envelope".into()
        } else {
            "UE1 read UE2's payload".into()
        },
        residual_note: None,
    })
}

fn attack_spoofing_clone(
    session: &SecureSession,
    rng: &mut impl rand::Rng,
) -> Result<AttackOutcome, ProtocolError> {
    let (victim_id, victim_identity) = &session.identities[0];
    let curve = CurveParams::secp256k1();
    let victim_key = derive_private_key(victim_identity, &curve)?;

    // the clone knows IMEI and MAC but supplies its own timestamp/location
    let clone_identity = DeviceIdentity {
        imei: victim_identity.imei.clone(),
        mac: victim_identity.mac,
        timestamp_ms: victim_identity.timestamp_ms.wrapping_add(rng.gen_range(1..86_400_000)),
        lat_udeg: victim_identity.lat_udeg + rng.gen_range(1..1_000_000),
        lon_udeg: victim_identity.lon_udeg - rng.gen_range(1..1_000_000),
    };
    let clone_key = derive_private_key(&clone_identity, &curve)?;
    let keys_differ = clone_key.to_bytes() != victim_key.to_bytes();

    // re-registering the victim's public key is rejected by the ledger
    let mut ledger = session.ledger.clone();
    let victim_pk = derive_public_key(&victim_key, &curve)?;
    let rejected = matches!(
        ledger.register_public_key(RegistrationRecord {
            ue_id: format!("{victim_id}-clone"),
            public_key: victim_pk.to_compressed().to_vec(),
            registered_at_ms: 0,
        }),
        Err(LedgerError::DuplicateKey(_))
    );

    // determinism caveat: a clone of the full identity derives the same key
    let full_clone_key = derive_private_key(victim_identity, &curve)?;
    let full_clone_identical = full_clone_key.to_bytes() == victim_key.to_bytes();

    Ok(AttackOutcome {
        kind: AdversaryKind::SpoofingClone,
        blocked: keys_differ && rejected,
        detail: format!(
            "perturbed-identity key differs: {keys_differ}; duplicate registration rejected: {rejected}"
        ),
        residual_note: full_clone_identical.then(|| {
            "an adversary holding the full identity (including timestamp and location) derives the identical key".to_string()
        }),
    })
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

mod opt_hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_some(&hex::encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| hex::decode(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::crypto::KeyRole;
    use crate::phy::allocate_power;

    use super::*;

    fn identity(seed: u8) -> DeviceIdentity {
        DeviceIdentity {
            imei: format!("49015420323751{}", seed % 10),
            mac: [0x02, 0x00, 0x00, 0x00, 0x00, seed],
            timestamp_ms: 1_600_000_000_000 + seed as u64,
            lat_udeg: 36_145_000 + seed as i64,
            lon_udeg: 128_394_000,
        }
    }

    fn noiseless() -> ChannelRealization {
        ChannelRealization {
            h_strong: 1.0,
            h_weak: 0.6,
            noise_sigma: 0.0,
        }
    }

    fn session(seed: u64) -> SecureSession {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bs_key = PrivateKey::from_entropy(&mut rng, KeyRole::BaseStation);
        let alloc = allocate_power(1.0, 0.8).unwrap();
        run_secure_session(
            &[("UE1".into(), identity(1)), ("UE2".into(), identity(2))],
            &[
                ("UE1".into(), b"alpha payload".to_vec()),
                ("UE2".into(), b"bravo payload".to_vec()),
            ],
            &alloc,
            &noiseless(),
            &bs_key,
            1_700_000_000_000,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn registration_issues_credentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bs_key = PrivateKey::from_entropy(&mut rng, KeyRole::BaseStation);
        let mut ledger = IdentityLedger::init();
        let k1 = register_ue("UE1", &identity(1), &mut ledger, &bs_key, 0).unwrap();
        let k2 = register_ue("UE2", &identity(2), &mut ledger, &bs_key, 1).unwrap();
        assert_eq!(ledger.len(), 3);
        assert!(k1.bs_private.is_some() && k2.bs_private.is_some());
        // key-pair invariant
        let curve = CurveParams::secp256k1();
        assert_eq!(
            derive_public_key(&k1.own_private, &curve).unwrap(),
            k1.own_public
        );
    }

    #[test]
    fn duplicate_identity_rejected_no_credentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bs_key = PrivateKey::from_entropy(&mut rng, KeyRole::BaseStation);
        let mut ledger = IdentityLedger::init();
        register_ue("UE1", &identity(1), &mut ledger, &bs_key, 0).unwrap();
        let err = register_ue("UE1-again", &identity(1), &mut ledger, &bs_key, 1).unwrap_err();
        assert!(matches!(err, ProtocolError::Ledger(LedgerError::DuplicateKey(_))));
        assert_eq!(ledger.len(), 2);
    }

    #[test]
    fn unregistered_requester_refused() {
        let ledger = IdentityLedger::init();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = pgw_prepare_payloads(
            &[("ghost".into(), b"data".to_vec())],
            &ledger,
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, ProtocolError::NotRegistered("ghost".into()));
    }

    #[test]
    fn secure_end_to_end_noiseless() {
        let s = session(10);
        assert_eq!(
            s.trace.outcomes[0].1,
            UeOutcome::Recovered {
                payload: b"alpha payload".to_vec()
            }
        );
        assert_eq!(
            s.trace.outcomes[1].1,
            UeOutcome::Recovered {
                payload: b"bravo payload".to_vec()
            }
        );
    }

    #[test]
    fn broadcast_constellation_and_padding() {
        let s = session(11);
        let alloc = allocate_power(1.0, 0.8).unwrap();
        let aw = alloc.p_weak.sqrt();
        let as_ = alloc.p_strong.sqrt();
        let levels = [aw + as_, aw - as_, -(aw - as_), -(aw + as_)];
        for sym in &s.frame.signal.symbols {
            assert!(
                levels.iter().any(|l| (sym - l).abs() < 1e-12),
                "symbol {sym} outside the 4-point constellation"
            );
        }
        // control header records true lengths; both users padded to the max
        let max = s.frame.control.users.iter().map(|c| c.bit_len).max().unwrap();
        assert_eq!(s.frame.control.symbol_count, max);
    }

    #[test]
    fn single_user_broadcast_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bs_key = PrivateKey::from_entropy(&mut rng, KeyRole::BaseStation);
        let alloc = allocate_power(1.0, 0.8).unwrap();
        let err = bnodeb_broadcast(
            &[("UE1".into(), UserRole::Strong)],
            &[],
            &bs_key,
            &alloc,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::BadUserCount(_)));
    }

    #[test]
    fn cross_user_decryption_fails() {
        let s = session(12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let wire = receive_layer_bytes(
                &s.frame,
                &s.channel,
                UserRole::Strong,
                UserRole::Weak,
                &mut rng,
            )
            .unwrap();
            let layer2 = Layer2Ciphertext::from_bytes(&wire).unwrap();
            let bs = s.kboxes[0].1.bs_private.as_ref().unwrap();
            let x_wire = decrypt_layer2(bs, &layer2).unwrap();
            let layer1 = Layer1Ciphertext::from_bytes(&x_wire).unwrap();
            assert_eq!(
                decrypt_layer1(&s.kboxes[0].1.own_private, &layer1),
                Err(CryptoError::AuthFailure)
            );
        }
    }

    #[test]
    fn missing_bs_key_fails_layer2() {
        let s = session(14);
        let mut stripped = s.kboxes[0].1.clone();
        stripped.bs_private = None;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        assert_eq!(
            ue_receive(&s.frame, &stripped, &s.channel, UserRole::Strong, &mut rng),
            Err(ProtocolError::Layer2AuthFailure)
        );
    }

    #[test]
    fn legacy_scheme_exposes_weak_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let alloc = allocate_power(1.0, 0.8).unwrap();
        let trace = run_legacy_scheme(
            &[
                ("UE1".into(), b"own data".to_vec()),
                ("UE2".into(), b"secret".to_vec()),
            ],
            &alloc,
            &noiseless(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.ue1_observed_weak_payload, Some(b"secret".to_vec()));
        assert_eq!(
            trace.outcomes[0].1,
            UeOutcome::Recovered {
                payload: b"own data".to_vec()
            }
        );
        assert_eq!(
            trace.outcomes[1].1,
            UeOutcome::Recovered {
                payload: b"secret".to_vec()
            }
        );
    }

    #[test]
    fn attack_suite_all_blocked() {
        let s = session(17);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let report = run_attack_suite(&AdversaryProfile::standard_suite(), &s, &mut rng).unwrap();
        assert_eq!(report.outcomes.len(), 3);
        assert!(report.all_blocked(), "{:?}", report);
        let spoof = report
            .outcomes
            .iter()
            .find(|o| o.kind == AdversaryKind::SpoofingClone)
            .unwrap();
        assert!(spoof.residual_note.is_some());
    }

    #[test]
    fn trace_is_deterministic() {
        let a = session(20).trace.to_jsonl();
        let b = session(20).trace.to_jsonl();
        assert_eq!(a, b);
    }
}
