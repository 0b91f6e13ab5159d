//! Cross-chain state machine replication.
//!
//! An exchange between untrusted agents is written as a turn-based state
//! machine ([`game`]). Each asset involved is managed by its own trusted but
//! passive [`replica`], which keeps a full copy of the machine. Agents
//! ([`agent`]) submit signed requests to every replica and relay each other's
//! requests as [`path`] signatures, so that every replica sees the same moves
//! inside a bounded window and resolves each round identically: the unique
//! valid move, or `Skip`.
//!
//! The crate is `no_std` and only needs `alloc`. Networking, scheduling and
//! file formats live in the `xsmr` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod agent;
pub mod game;
pub mod ids;
pub mod path;
pub mod replica;
pub mod request;
pub mod timing;

pub use ids::{Address, AgentId, AssetId, Tick};
pub use path::{
    extend_path, sign_request, verify_path_signature, KeyedHashProvider, PathSignature, Signature,
    SignatureProvider,
};
pub use request::{decode_request, encode_request, MoveArg, MoveDescriptor, Request};

use alloc::string::String;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{signer} cannot originate a request on behalf of {agent}")]
    SignerMismatch { signer: AgentId, agent: AgentId },
    #[error("{0} already appears in the path")]
    DuplicateSigner(AgentId),
    #[error("path signature does not verify")]
    MalformedInput,
    #[error("decode error: {0}")]
    Decode(&'static str),
    #[error("unknown move {0}")]
    UnknownMove(String),
    #[error("state is not final")]
    NotFinal,
}
