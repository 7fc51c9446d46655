//! Append-only, hash-chained, signed log of operations.
//!
//! The platform state is a fold of [`Platform::apply`] over the entries, so
//! [`replay`] rebuilds it from the entry list and the protocol parameters
//! alone.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codec::{self, CodecError};
use crate::crypto::{Ed25519, PublicKey, SecretKey, Signature, SignatureScheme};
use crate::error::ProtocolError;
use crate::gas::OperationKind;
use crate::hash::{Digest, Hasher};
use crate::ids::AccountId;
use crate::platform::{Applied, Event, Op, ParamsError, Payload, Platform, ProtocolParams};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: u64,
    pub prev_hash: Digest,
    /// Canonical encoding of a [`Payload`].
    pub payload: Vec<u8>,
    pub sender: AccountId,
    pub signature: Signature,
    pub gas_charged: u64,
    pub entry_hash: Digest,
}

impl LedgerEntry {
    /// The digest the sender signs.
    pub fn signing_digest(index: u64, prev_hash: &Digest, payload: &[u8]) -> Digest {
        Hasher::new()
            .part(b"workerrep/entry")
            .part(&index.to_be_bytes())
            .part(&prev_hash.0)
            .part(payload)
            .finish()
    }

    pub fn compute_hash(&self) -> Digest {
        Hasher::new()
            .part(&self.index.to_be_bytes())
            .part(&self.prev_hash.0)
            .part(&self.payload)
            .part(&self.sender.0 .0)
            .part(&self.signature.0)
            .part(&self.gas_charged.to_be_bytes())
            .finish()
    }

    pub fn decode_payload(&self) -> Result<Payload, CodecError> {
        codec::decode(&self.payload)
    }
}

/// What applying an entry did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub kind: OperationKind,
    pub gas: u64,
    pub reverted: Option<ProtocolError>,
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadReason {
    IndexMismatch,
    PrevHashMismatch,
    HashMismatch,
    MalformedPayload,
    UnknownSender,
    BadSignature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum VerifyReport {
    Ok { entries: u64 },
    Bad { index: u64, reason: BadReason },
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerifyReport::Ok { .. })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("operation rejected: {0}")]
    Rejected(#[from] ProtocolError),
    #[error("serialization failure: {0}")]
    Serialization(#[from] CodecError),
    #[error("signing key does not belong to the sender")]
    KeyMismatch,
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("invalid chain: entry {index} ({reason:?})")]
    InvalidChain { index: u64, reason: BadReason },
    #[error("entry {index} is rejected by the protocol: {error}")]
    Rejected { index: u64, error: ProtocolError },
    #[error("entry {index} records {recorded} gas, the schedule charges {expected}")]
    GasMismatch { index: u64, recorded: u64, expected: u64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Incremental chain checker: linkage, hashes, payload decoding and
/// signatures under keys learned from registration payloads.
#[derive(Clone, Debug, Default)]
pub struct Verifier {
    next_index: u64,
    tip: Digest,
    keys: BTreeMap<AccountId, PublicKey>,
}

impl Verifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check<S: SignatureScheme>(
        &mut self,
        scheme: &S,
        entry: &LedgerEntry,
    ) -> Result<Payload, BadReason> {
        if entry.index != self.next_index {
            return Err(BadReason::IndexMismatch);
        }
        if entry.prev_hash != self.tip {
            return Err(BadReason::PrevHashMismatch);
        }
        if entry.compute_hash() != entry.entry_hash {
            return Err(BadReason::HashMismatch);
        }
        let payload = entry.decode_payload().map_err(|_| BadReason::MalformedPayload)?;
        let key = match &payload.op {
            Op::Register { public_key, .. } if AccountId::of(public_key) == entry.sender => {
                *public_key
            }
            _ => *self.keys.get(&entry.sender).ok_or(BadReason::UnknownSender)?,
        };
        let digest = LedgerEntry::signing_digest(entry.index, &entry.prev_hash, &entry.payload);
        if !scheme.verify(&key, &digest.0, &entry.signature) {
            return Err(BadReason::BadSignature);
        }
        self.keys.entry(entry.sender).or_insert(key);
        self.next_index += 1;
        self.tip = entry.entry_hash;
        Ok(payload)
    }
}

/// Checks every link, hash and signature; reports the first violation.
pub fn verify_chain<S: SignatureScheme>(scheme: &S, entries: &[LedgerEntry]) -> VerifyReport {
    let mut v = Verifier::new();
    for e in entries {
        if let Err(reason) = v.check(scheme, e) {
            return VerifyReport::Bad { index: v.next_index, reason };
        }
    }
    VerifyReport::Ok { entries: entries.len() as u64 }
}

/// Folded chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub entries: Vec<LedgerEntry>,
    pub state_root: Digest,
    pub platform: Platform,
    pub receipts: Vec<Receipt>,
}

/// Rebuilds the platform state from an entry list.
pub fn replay<S: SignatureScheme + Clone>(
    scheme: &S,
    params: &ProtocolParams,
    entries: &[LedgerEntry],
) -> Result<ChainState, ReplayError> {
    let mut ledger = Ledger::with_scheme(scheme.clone(), params.clone())?;
    for e in entries {
        ledger.import(e.clone())?;
    }
    Ok(ledger.chain_state())
}

/// The single writer: appends entries and keeps the folded state current.
#[derive(Clone, Debug)]
pub struct Ledger<S = Ed25519> {
    scheme: S,
    entries: Vec<LedgerEntry>,
    receipts: Vec<Receipt>,
    platform: Platform,
    verifier: Verifier,
}

impl Ledger<Ed25519> {
    pub fn new(params: ProtocolParams) -> Result<Self, ParamsError> {
        Self::with_scheme(Ed25519, params)
    }
}

impl<S: SignatureScheme> Ledger<S> {
    pub fn with_scheme(scheme: S, params: ProtocolParams) -> Result<Self, ParamsError> {
        Ok(Ledger {
            scheme,
            entries: Vec::new(),
            receipts: Vec::new(),
            platform: Platform::new(params)?,
            verifier: Verifier::new(),
        })
    }

    pub fn scheme(&self) -> &S {
        &self.scheme
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn head(&self) -> Digest {
        self.entries.last().map_or(Digest::ZERO, |e| e.entry_hash)
    }

    /// Applies `payload` as `sender`, signs it with `key` and appends it.
    /// A rejected op appends nothing.
    pub fn append(
        &mut self,
        payload: &Payload,
        sender: AccountId,
        key: &SecretKey,
    ) -> Result<(&LedgerEntry, &Receipt), LedgerError> {
        let public = self.scheme.public_key(key);
        let registered = match &payload.op {
            Op::Register { public_key, .. } => Some(*public_key),
            _ => self.platform.account(&sender).map(|a| a.public_key),
        };
        match registered {
            None => return Err(ProtocolError::UnknownSender(sender).into()),
            Some(k) if k != public => return Err(LedgerError::KeyMismatch),
            Some(_) => {}
        }
        let bytes = codec::encode(payload)?;
        let applied = self.platform.apply(sender, payload)?;

        let index = self.entries.len() as u64;
        let prev_hash = self.head();
        let digest = LedgerEntry::signing_digest(index, &prev_hash, &bytes);
        let signature = self.scheme.sign(key, &digest.0);
        let gas_charged = self.platform.params.gas.charge(applied.kind);
        let mut entry = LedgerEntry {
            index,
            prev_hash,
            payload: bytes,
            sender,
            signature,
            gas_charged,
            entry_hash: Digest::ZERO,
        };
        entry.entry_hash = entry.compute_hash();
        self.verifier
            .check(&self.scheme, &entry)
            .expect("freshly signed entry verifies");
        self.push(entry, applied);
        Ok((self.entries.last().expect("pushed"), self.receipts.last().expect("pushed")))
    }

    /// Verifies and applies an existing entry at the tip. On error the
    /// ledger is unchanged.
    pub fn import(&mut self, entry: LedgerEntry) -> Result<&Receipt, ReplayError> {
        let index = entry.index;
        let mut verifier = self.verifier.clone();
        let payload = verifier
            .check(&self.scheme, &entry)
            .map_err(|reason| ReplayError::InvalidChain { index, reason })?;
        let expected = self.platform.params.gas.charge(self.platform.charged_kind(&payload.op));
        if expected != entry.gas_charged {
            return Err(ReplayError::GasMismatch { index, recorded: entry.gas_charged, expected });
        }
        let applied = self
            .platform
            .apply(entry.sender, &payload)
            .map_err(|error| ReplayError::Rejected { index, error })?;
        debug_assert_eq!(self.platform.params.gas.charge(applied.kind), expected);
        self.verifier = verifier;
        self.push(entry, applied);
        Ok(self.receipts.last().expect("pushed"))
    }

    fn push(&mut self, entry: LedgerEntry, applied: Applied) {
        self.platform.set_chain_head(entry.entry_hash);
        self.receipts.push(Receipt {
            kind: applied.kind,
            gas: entry.gas_charged,
            reverted: applied.reverted,
            events: applied.events,
        });
        self.entries.push(entry);
    }

    pub fn chain_state(&self) -> ChainState {
        ChainState {
            entries: self.entries.clone(),
            state_root: self.platform.state_root(),
            platform: self.platform.clone(),
            receipts: self.receipts.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<LedgerEntry>, Vec<Receipt>, Platform) {
        (self.entries, self.receipts, self.platform)
    }
}
