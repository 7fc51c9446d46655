//! Canonical binary encoding.
//!
//! Field-ordered, big-endian, fixed-width integers; sequences, strings and
//! maps carry a u64 length prefix; enum variants a u32 index; `Option` a
//! one-byte tag. Maps are always `BTreeMap`/`BTreeSet`, so iteration order
//! (and therefore the byte stream) is canonical.

use alloc::vec::Vec;

use bincode::config::{BigEndian, Configuration, Fixint, NoLimit};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("serialization failure: {0}")]
    Encode(#[from] bincode::error::EncodeError),
    #[error("malformed encoding: {0}")]
    Decode(#[from] bincode::error::DecodeError),
    #[error("{0} trailing bytes after value")]
    Trailing(usize),
}

fn config() -> Configuration<BigEndian, Fixint, NoLimit> {
    bincode::config::standard()
        .with_big_endian()
        .with_fixed_int_encoding()
        .with_no_limit()
}

pub fn encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CodecError> {
    Ok(bincode::serde::encode_to_vec(value, config())?)
}

/// Decodes a value that must span the whole buffer.
pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    let (value, read) = bincode::serde::decode_from_slice(bytes, config())?;
    if read != bytes.len() {
        return Err(CodecError::Trailing(bytes.len() - read));
    }
    Ok(value)
}

/// Decodes a value from the front of the buffer and returns the remainder.
pub fn decode_prefix<T: DeserializeOwned>(bytes: &[u8]) -> Result<(T, &[u8]), CodecError> {
    let (value, read) = bincode::serde::decode_from_slice(bytes, config())?;
    Ok((value, &bytes[read..]))
}
