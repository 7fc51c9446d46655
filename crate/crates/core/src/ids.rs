use core::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::hash::{keccak256, Digest};

/// Discrete simulation time.
pub type Tick = u64;

/// Account identifier: Keccak-256 of the account's public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub Digest);

impl AccountId {
    pub fn of(key: &PublicKey) -> AccountId {
        AccountId(keccak256(&key.0))
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acct:{}", &self.0.to_hex()[..10])
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

macro_rules! seq_id {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

seq_id!(TaskId, "task-");
seq_id!(AgreementId, "agreement-");
seq_id!(SubmissionId, "submission-");
