//! Ledger snapshot files.
//!
//! A snapshot is the 8-byte magic `WRLEDGR1`, the protocol parameters, an
//! entry count and the entries. Parameters and entries use the canonical
//! binary encoding and are each prefixed with a big-endian `u32` length; the
//! count is a big-endian `u64`.

use serde::Serialize;

use workerrep_core::codec;
use workerrep_core::gas::OperationKind;
use workerrep_core::{AccountId, Digest, LedgerEntry, ProtocolParams, Receipt};

pub const MAGIC: &[u8; 8] = b"WRLEDGR1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub params: ProtocolParams,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a ledger snapshot")]
    BadMagic,
    #[error("unreadable parameter header")]
    Header,
    #[error("entry {index} is unreadable")]
    Entry { index: u64 },
    #[error("{0} bytes follow the last entry")]
    Trailing(usize),
    #[error("encoding failed: {0}")]
    Encode(#[from] codec::CodecError),
}

impl Snapshot {
    pub fn new(params: ProtocolParams, entries: Vec<LedgerEntry>) -> Self {
        Snapshot { params, entries }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SnapshotError> {
        let mut out = MAGIC.to_vec();
        push_framed(&mut out, &codec::encode(&self.params)?);
        out.extend_from_slice(&(self.entries.len() as u64).to_be_bytes());
        for e in &self.entries {
            push_framed(&mut out, &codec::encode(e)?);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or(SnapshotError::BadMagic)?;
        let (header, rest) = take_framed(rest).ok_or(SnapshotError::Header)?;
        let params = codec::decode(header).map_err(|_| SnapshotError::Header)?;
        let (count, mut rest) = take(rest, 8).ok_or(SnapshotError::Header)?;
        let count = u64::from_be_bytes(count.try_into().expect("eight bytes"));
        let mut entries = Vec::new();
        for index in 0..count {
            let (body, tail) = take_framed(rest).ok_or(SnapshotError::Entry { index })?;
            entries.push(codec::decode(body).map_err(|_| SnapshotError::Entry { index })?);
            rest = tail;
        }
        if !rest.is_empty() {
            return Err(SnapshotError::Trailing(rest.len()));
        }
        Ok(Snapshot { params, entries })
    }
}

fn push_framed(out: &mut Vec<u8>, body: &[u8]) {
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn take(bytes: &[u8], n: usize) -> Option<(&[u8], &[u8])> {
    (bytes.len() >= n).then(|| bytes.split_at(n))
}

fn take_framed(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let (len, rest) = take(bytes, 4)?;
    let len = u32::from_be_bytes(len.try_into().ok()?) as usize;
    take(rest, len)
}

/// One line of the human-readable index written next to a snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SidecarLine {
    pub index: u64,
    pub op: String,
    pub kind: OperationKind,
    pub sender: AccountId,
    pub gas: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverted: Option<String>,
    pub entry_hash: Digest,
}

pub fn sidecar(entries: &[LedgerEntry], receipts: &[Receipt]) -> Vec<SidecarLine> {
    entries
        .iter()
        .zip(receipts)
        .map(|(e, r)| SidecarLine {
            index: e.index,
            op: e.decode_payload().map_or_else(|_| "?".into(), |p| p.op.name().into()),
            kind: r.kind,
            sender: e.sender,
            gas: e.gas_charged,
            reverted: r.reverted.as_ref().map(ToString::to_string),
            entry_hash: e.entry_hash,
        })
        .collect()
}
