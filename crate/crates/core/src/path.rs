//! Path signatures.
//!
//! `[P](P, mu, r)` is the request signed by its originator. Relaying through
//! `Q` wraps the whole previous value: `[p, Q](P, mu, r) = sig_Q(p(P, mu, r))`.
//! The bytes signed by the `j`-th signer are
//!
//! ```text
//! signed_1     := encode_request(req)
//! layer_j      := bytes(signed_j) signer_j:u32 bytes(sig_j)
//! signed_{j+1} := layer_j
//! ```
//!
//! A relayer signs `layer_k` of the value it extends. On the wire a path
//! signature of length `k` is `k:u32 layer_k`.

use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ids::AgentId;
use crate::request::{encode_request, put_bytes, read_request, Reader, Request};
use crate::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct Signature(pub Vec<u8>);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Signature(")?;
        for b in self.0.iter().take(4) {
            write!(f, "{b:02x}")?;
        }
        f.write_str("..)")
    }
}

/// Signs and verifies on behalf of agents.
pub trait SignatureProvider {
    fn sign(&self, agent: AgentId, msg: &[u8]) -> Signature;
    fn verify(&self, agent: AgentId, msg: &[u8], sig: &Signature) -> bool;
}

/// Deterministic keyed-hash signatures: each agent's key is derived from a
/// scenario secret, and a signature is `SHA-256(key || msg)`.
///
/// Only the simulator holds the secret, so agents cannot sign for each other.
#[derive(Clone, Debug)]
pub struct KeyedHashProvider {
    secret: [u8; 32],
}

impl KeyedHashProvider {
    pub fn new(secret: [u8; 32]) -> Self {
        KeyedHashProvider { secret }
    }

    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"xsmr/provider");
        h.update(seed.to_le_bytes());
        Self::new(h.finalize().into())
    }

    fn key(&self, agent: AgentId) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"xsmr/key");
        h.update(self.secret);
        h.update(agent.0.to_le_bytes());
        h.finalize().into()
    }
}

impl SignatureProvider for KeyedHashProvider {
    fn sign(&self, agent: AgentId, msg: &[u8]) -> Signature {
        let mut h = Sha256::new();
        h.update(self.key(agent));
        h.update(msg);
        let digest: [u8; 32] = h.finalize().into();
        Signature(digest.to_vec())
    }

    fn verify(&self, agent: AgentId, msg: &[u8], sig: &Signature) -> bool {
        self.sign(agent, msg) == *sig
    }
}

/// A request wrapped in a chain of signatures by distinct agents,
/// originator first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PathSignature {
    pub request: Request,
    pub path: Vec<AgentId>,
    pub sigs: Vec<Signature>,
}

impl PathSignature {
    /// Path length `k`; a path signature is live for `k * delta` after its
    /// round starts.
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn contains_signer(&self, agent: AgentId) -> bool {
        self.path.contains(&agent)
    }

    /// The bytes signed by the signer at position `j` (0-based).
    fn signed_bytes(&self, j: usize) -> Vec<u8> {
        let mut bytes = encode_request(&self.request);
        for i in 0..j {
            bytes = layer(&bytes, self.path[i], &self.sigs[i]);
        }
        bytes
    }

    /// The nested value the next relayer signs.
    pub fn nested_bytes(&self) -> Vec<u8> {
        self.signed_bytes(self.path.len())
    }

    /// Wire encoding: path length, then the nested value.
    pub fn encode(&self) -> Vec<u8> {
        let nested = self.nested_bytes();
        let mut out = Vec::with_capacity(nested.len() + 4);
        out.extend_from_slice(&(self.path.len() as u32).to_le_bytes());
        out.extend_from_slice(&nested);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<PathSignature, Error> {
        let mut r = Reader::new(bytes);
        let depth = r.u32()? as usize;
        let mut path = Vec::with_capacity(depth);
        let mut sigs = Vec::with_capacity(depth);
        let mut current = r.take(bytes.len() - 4)?.to_vec();
        for _ in 0..depth {
            let mut r = Reader::new(&current);
            let inner = r.bytes()?.to_vec();
            let signer = AgentId(r.u32()?);
            let sig = Signature(r.bytes()?.to_vec());
            r.finish()?;
            path.push(signer);
            sigs.push(sig);
            current = inner;
        }
        let mut r = Reader::new(&current);
        let request = read_request(&mut r)?;
        r.finish()?;
        path.reverse();
        sigs.reverse();
        Ok(PathSignature { request, path, sigs })
    }
}

fn layer(inner: &[u8], signer: AgentId, sig: &Signature) -> Vec<u8> {
    let mut out = Vec::with_capacity(inner.len() + sig.0.len() + 12);
    put_bytes(&mut out, inner);
    out.extend_from_slice(&signer.0.to_le_bytes());
    put_bytes(&mut out, &sig.0);
    out
}

/// `[signer](req)`: the originator's own signature over the request.
pub fn sign_request(
    provider: &dyn SignatureProvider,
    signer: AgentId,
    req: Request,
) -> Result<PathSignature, Error> {
    if signer != req.agent {
        return Err(Error::SignerMismatch { signer, agent: req.agent });
    }
    let sig = provider.sign(signer, &encode_request(&req));
    Ok(PathSignature { request: req, path: alloc::vec![signer], sigs: alloc::vec![sig] })
}

/// `[p, relayer](req)`: append the relayer's signature over the whole of `ps`.
pub fn extend_path(
    provider: &dyn SignatureProvider,
    relayer: AgentId,
    ps: &PathSignature,
) -> Result<PathSignature, Error> {
    if ps.contains_signer(relayer) {
        return Err(Error::DuplicateSigner(relayer));
    }
    if !verify_path_signature(ps, provider) {
        return Err(Error::MalformedInput);
    }
    let sig = provider.sign(relayer, &ps.nested_bytes());
    let mut out = ps.clone();
    out.path.push(relayer);
    out.sigs.push(sig);
    Ok(out)
}

/// Well-formedness: non-empty, originated by the request's agent, distinct
/// signers, and every signature valid over the value it wraps.
pub fn verify_path_signature(ps: &PathSignature, provider: &dyn SignatureProvider) -> bool {
    if ps.path.is_empty() || ps.path.len() != ps.sigs.len() || ps.path[0] != ps.request.agent {
        return false;
    }
    for (i, a) in ps.path.iter().enumerate() {
        if ps.path[..i].contains(a) {
            return false;
        }
    }
    let mut bytes = encode_request(&ps.request);
    for (signer, sig) in ps.path.iter().zip(&ps.sigs) {
        if !provider.verify(*signer, &bytes, sig) {
            return false;
        }
        bytes = layer(&bytes, *signer, sig);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::MoveDescriptor;

    const ALICE: AgentId = AgentId(0);
    const BOB: AgentId = AgentId(1);

    fn agree() -> Request {
        Request::new(ALICE, MoveDescriptor::nullary("Agree"), 1)
    }

    #[test]
    fn base_case_verifies() {
        let p = KeyedHashProvider::from_seed(1);
        let ps = sign_request(&p, ALICE, agree()).unwrap();
        assert_eq!(ps.path, [ALICE]);
        assert!(verify_path_signature(&ps, &p));
    }

    #[test]
    fn wrong_signer_is_rejected() {
        let p = KeyedHashProvider::from_seed(1);
        assert_eq!(
            sign_request(&p, BOB, agree()),
            Err(Error::SignerMismatch { signer: BOB, agent: ALICE })
        );
    }

    #[test]
    fn signing_is_deterministic() {
        let p = KeyedHashProvider::from_seed(9);
        assert_eq!(sign_request(&p, ALICE, agree()), sign_request(&p, ALICE, agree()));
    }

    #[test]
    fn relay_through_bob() {
        let p = KeyedHashProvider::from_seed(1);
        let ps = sign_request(&p, ALICE, agree()).unwrap();
        let relayed = extend_path(&p, BOB, &ps).unwrap();
        assert_eq!(relayed.path, [ALICE, BOB]);
        assert!(verify_path_signature(&relayed, &p));
        assert_eq!(extend_path(&p, ALICE, &ps), Err(Error::DuplicateSigner(ALICE)));
    }

    #[test]
    fn tampered_inner_signature_cannot_be_extended() {
        let p = KeyedHashProvider::from_seed(1);
        let mut ps = sign_request(&p, ALICE, agree()).unwrap();
        ps.sigs[0].0[5] ^= 0x01;
        assert_eq!(extend_path(&p, BOB, &ps), Err(Error::MalformedInput));
    }

    #[test]
    fn duplicate_signer_fails_verification() {
        let p = KeyedHashProvider::from_seed(1);
        let ps = sign_request(&p, ALICE, agree()).unwrap();
        let mut forged = extend_path(&p, BOB, &ps).unwrap();
        forged.path.push(ALICE);
        forged.sigs.push(p.sign(ALICE, &forged.signed_bytes(2)));
        assert!(!verify_path_signature(&forged, &p));
    }

    #[test]
    fn other_secret_does_not_verify() {
        let p = KeyedHashProvider::from_seed(1);
        let q = KeyedHashProvider::from_seed(2);
        let ps = sign_request(&p, ALICE, agree()).unwrap();
        assert!(!verify_path_signature(&ps, &q));
    }

    #[test]
    fn nested_encoding_round_trips() {
        let p = KeyedHashProvider::from_seed(3);
        let ps = sign_request(&p, ALICE, agree()).unwrap();
        let ps = extend_path(&p, BOB, &ps).unwrap();
        let ps = extend_path(&p, AgentId(2), &ps).unwrap();
        assert_eq!(PathSignature::decode(&ps.encode()).unwrap(), ps);
    }
}
