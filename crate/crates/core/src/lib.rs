//! Protocol core for a reputation-based decentralized crowdsourcing
//! platform: accounts with entry deposits, escrowed task agreements,
//! commit-reveal submissions, slot-based peer evaluation with outlier-robust
//! consensus, fixed-point reputation arithmetic, per-operation gas
//! accounting, a hash-chained signed ledger, and a seeded multi-agent
//! simulation.
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the `workerrep` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod accounts;
pub mod agreement;
pub mod codec;
pub mod crypto;
pub mod error;
pub mod evaluation;
pub mod fixed;
pub mod gas;
pub mod hash;
pub mod ids;
pub mod ledger;
pub mod marketplace;
pub mod platform;
pub mod reputation;
pub mod sim;
pub mod submission;

pub use accounts::{AccountStatus, PlatformStats, Role, UserAccount};
pub use agreement::{Agreement, AgreementState, Settlement, Transition};
pub use error::ProtocolError;
pub use fixed::{Fixed, Wei, SCALE};
pub use hash::{keccak256, Digest};
pub use ids::{AccountId, AgreementId, SubmissionId, TaskId, Tick};
pub use ledger::{replay, verify_chain, ChainState, Ledger, LedgerEntry, Receipt, VerifyReport};
pub use marketplace::{SearchFilter, Task, TaskStatus};
pub use platform::{Event, Op, Payload, Platform, ProtocolParams, VolunteerThreshold};
pub use submission::{ContentStore, Submission, SubmissionStatus};
