//! Moves, requests and their canonical byte encoding.
//!
//! Layout (all integers little-endian, fixed width):
//!
//! ```text
//! request := agent:u32 round:u64 name:bytes argc:u32 arg*
//! arg     := 0x00 value:i64 | 0x01 bytes
//! bytes   := len:u32 byte*
//! ```
//!
//! The move name is UTF-8. The encoding is injective: every field is either
//! fixed width or length prefixed, and decoding rejects trailing bytes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::ids::AgentId;
use crate::Error;

pub const SKIP: &str = "Skip";

/// A move argument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum MoveArg {
    Int(i64),
    Bytes(Vec<u8>),
}

/// A named move with arguments, e.g. `Unseal(7, nonce)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MoveDescriptor {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub args: Vec<MoveArg>,
}

impl MoveDescriptor {
    pub fn new(name: &str, args: Vec<MoveArg>) -> Self {
        MoveDescriptor { name: name.into(), args }
    }

    pub fn nullary(name: &str) -> Self {
        Self::new(name, Vec::new())
    }

    /// The always-enabled no-op.
    pub fn skip() -> Self {
        Self::nullary(SKIP)
    }

    pub fn is_skip(&self) -> bool {
        self.name == SKIP && self.args.is_empty()
    }

    pub fn int_arg(&self, i: usize) -> Option<i64> {
        match self.args.get(i) {
            Some(MoveArg::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn bytes_arg(&self, i: usize) -> Option<&[u8]> {
        match self.args.get(i) {
            Some(MoveArg::Bytes(b)) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for MoveDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match a {
                MoveArg::Int(v) => write!(f, "{v}")?,
                MoveArg::Bytes(b) => write!(f, "<{} bytes>", b.len())?,
            }
        }
        f.write_str(")")
    }
}

/// Agent `agent` asks for `mv` to be applied in round `round` (rounds start at 1).
///
/// Two unequal requests with the same `(agent, round)` are an equivocation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Request {
    pub agent: AgentId,
    #[cfg_attr(feature = "serde", serde(rename = "move"))]
    pub mv: MoveDescriptor,
    pub round: u64,
}

impl Request {
    pub fn new(agent: AgentId, mv: MoveDescriptor, round: u64) -> Self {
        Request { agent, mv, round }
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, r{})", self.agent, self.mv, self.round)
    }
}

pub(crate) fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Canonical bytes of a request; these are what the originating agent signs.
pub fn encode_request(req: &Request) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + req.mv.name.len());
    out.extend_from_slice(&req.agent.0.to_le_bytes());
    out.extend_from_slice(&req.round.to_le_bytes());
    put_bytes(&mut out, req.mv.name.as_bytes());
    out.extend_from_slice(&(req.mv.args.len() as u32).to_le_bytes());
    for arg in &req.mv.args {
        match arg {
            MoveArg::Int(v) => {
                out.push(0);
                out.extend_from_slice(&v.to_le_bytes());
            }
            MoveArg::Bytes(b) => {
                out.push(1);
                put_bytes(&mut out, b);
            }
        }
    }
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        if self.buf.len() < n {
            return Err(Error::Decode("truncated input"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, Error> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, Error> {
        let mut b = [0u8; 4];
        b.copy_from_slice(self.take(4)?);
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, Error> {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn bytes(&mut self) -> Result<&'a [u8], Error> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub(crate) fn finish(self) -> Result<(), Error> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Decode("trailing bytes"))
        }
    }
}

pub(crate) fn read_request(r: &mut Reader<'_>) -> Result<Request, Error> {
    let agent = AgentId(r.u32()?);
    let round = r.u64()?;
    let name = core::str::from_utf8(r.bytes()?).map_err(|_| Error::Decode("move name is not utf-8"))?;
    let argc = r.u32()?;
    let mut args = Vec::new();
    for _ in 0..argc {
        match r.u8()? {
            0 => args.push(MoveArg::Int(r.u64()? as i64)),
            1 => args.push(MoveArg::Bytes(r.bytes()?.to_vec())),
            _ => return Err(Error::Decode("unknown argument tag")),
        }
    }
    Ok(Request::new(agent, MoveDescriptor::new(name, args), round))
}

pub fn decode_request(bytes: &[u8]) -> Result<Request, Error> {
    let mut r = Reader::new(bytes);
    let req = read_request(&mut r)?;
    r.finish()?;
    Ok(req)
}
