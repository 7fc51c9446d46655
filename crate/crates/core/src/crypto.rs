//! Keys, signatures and the two-layer submission envelope.
//!
//! Signing is pluggable behind [`SignatureScheme`]; the default is Ed25519
//! with deterministic signatures. The envelope's confidentiality layer is a
//! simulated cipher: it enforces who may open an envelope inside this
//! process, it is not encryption anyone should deploy.

use alloc::vec::Vec;
use core::fmt;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::{keccak256, Digest, Hasher};

/// Secret signing material. Never serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub [u8; 32]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    /// Deterministic key from arbitrary seed material.
    pub fn derive(material: &[u8]) -> SecretKey {
        SecretKey(Hasher::new().part(b"workerrep/secret-key").part(material).finish().0)
    }
}

/// Public verification key. Serialized as hex in human-readable formats.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex::encode(self.0)[..16])
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Digest(self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Digest::deserialize(d).map(|dg| PublicKey(dg.0))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &hex::encode(&self.0[..8]))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&hex::encode(self.0))
        } else {
            // Fixed 64 bytes, no length prefix.
            use serde::ser::SerializeTuple;
            let mut t = s.serialize_tuple(64)?;
            for b in &self.0 {
                t.serialize_element(b)?;
            }
            t.end()
        }
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct SigVisitor;
        impl<'de> Visitor<'de> for SigVisitor {
            type Value = Signature;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("64 signature bytes")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Signature, E> {
                let mut out = [0u8; 64];
                hex::decode_to_slice(v, &mut out).map_err(E::custom)?;
                Ok(Signature(out))
            }
            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Signature, A::Error> {
                let mut out = [0u8; 64];
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = seq
                        .next_element()?
                        .ok_or_else(|| de::Error::invalid_length(i, &self))?;
                }
                Ok(Signature(out))
            }
        }
        if d.is_human_readable() {
            d.deserialize_str(SigVisitor)
        } else {
            d.deserialize_tuple(64, SigVisitor)
        }
    }
}

/// A deterministic signature scheme over byte messages.
pub trait SignatureScheme {
    fn public_key(&self, secret: &SecretKey) -> PublicKey;
    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Signature;
    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

/// Ed25519 (RFC 8032), the default scheme.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn public_key(&self, secret: &SecretKey) -> PublicKey {
        PublicKey(SigningKey::from_bytes(&secret.0).verifying_key().to_bytes())
    }

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Signature {
        Signature(SigningKey::from_bytes(&secret.0).sign(message).to_bytes())
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&public.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        vk.verify(message, &sig).is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("envelope is truncated")]
    Truncated,
    #[error("sender authentication failed")]
    AuthFailure,
    #[error("envelope is addressed to a different key")]
    WrongRecipient,
    #[error("ciphertext tag mismatch")]
    Corrupt,
}

/// Two-layer envelope: confidentiality keyed to the recipient, then
/// authenticity keyed to the sender.
pub trait EnvelopeCipher {
    fn seal(&self, plaintext: &[u8], recipient: &PublicKey, sender: &SecretKey) -> Vec<u8>;

    fn open(
        &self,
        envelope: &[u8],
        recipient: &SecretKey,
        sender: &PublicKey,
    ) -> Result<Vec<u8>, EnvelopeError>;
}

/// Simulated envelope.
///
/// Layout: `recipient_pk(32) | nonce(32) | tag(32) | ciphertext | signature(64)`.
/// The ciphertext is the plaintext XORed with a Keccak keystream bound to the
/// recipient key and nonce; the tag binds the ciphertext to both. The trailing
/// signature is the sender's over everything before it.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimulatedEnvelope<S = Ed25519> {
    pub scheme: S,
}

const HEADER: usize = 96;
const SIG: usize = 64;

fn keystream_xor(key: &PublicKey, nonce: &Digest, data: &mut [u8]) {
    for (block, chunk) in data.chunks_mut(32).enumerate() {
        let pad = Hasher::new()
            .part(b"workerrep/stream")
            .part(&key.0)
            .part(&nonce.0)
            .part(&(block as u64).to_be_bytes())
            .finish();
        for (b, p) in chunk.iter_mut().zip(pad.0.iter()) {
            *b ^= p;
        }
    }
}

fn tag(key: &PublicKey, nonce: &Digest, ciphertext: &[u8]) -> Digest {
    Hasher::new()
        .part(b"workerrep/tag")
        .part(&key.0)
        .part(&nonce.0)
        .part(ciphertext)
        .finish()
}

impl<S: SignatureScheme> EnvelopeCipher for SimulatedEnvelope<S> {
    fn seal(&self, plaintext: &[u8], recipient: &PublicKey, sender: &SecretKey) -> Vec<u8> {
        let nonce = Hasher::new()
            .part(b"workerrep/nonce")
            .part(&recipient.0)
            .part(&keccak256(plaintext).0)
            .finish();
        let mut ct = plaintext.to_vec();
        keystream_xor(recipient, &nonce, &mut ct);
        let t = tag(recipient, &nonce, &ct);

        let mut out = Vec::with_capacity(HEADER + ct.len() + SIG);
        out.extend_from_slice(&recipient.0);
        out.extend_from_slice(&nonce.0);
        out.extend_from_slice(&t.0);
        out.extend_from_slice(&ct);
        let sig = self.scheme.sign(sender, &out);
        out.extend_from_slice(&sig.0);
        out
    }

    fn open(
        &self,
        envelope: &[u8],
        recipient: &SecretKey,
        sender: &PublicKey,
    ) -> Result<Vec<u8>, EnvelopeError> {
        if envelope.len() < HEADER + SIG {
            return Err(EnvelopeError::Truncated);
        }
        let (inner, sig_bytes) = envelope.split_at(envelope.len() - SIG);
        let mut sig = [0u8; SIG];
        sig.copy_from_slice(sig_bytes);
        if !self.scheme.verify(sender, inner, &Signature(sig)) {
            return Err(EnvelopeError::AuthFailure);
        }

        let mut key = [0u8; 32];
        key.copy_from_slice(&inner[..32]);
        let addressed = PublicKey(key);
        if self.scheme.public_key(recipient) != addressed {
            return Err(EnvelopeError::WrongRecipient);
        }
        let mut nonce = [0u8; 32];
        nonce.copy_from_slice(&inner[32..64]);
        let nonce = Digest(nonce);
        let ct = &inner[HEADER..];
        if tag(&addressed, &nonce, ct).0 != inner[64..96] {
            return Err(EnvelopeError::Corrupt);
        }
        let mut pt = ct.to_vec();
        keystream_xor(&addressed, &nonce, &mut pt);
        Ok(pt)
    }
}
