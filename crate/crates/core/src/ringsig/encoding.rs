//! Canonical byte encoding of ring signatures.
//!
//! ```text
//! "LRS1" | u8 backend-name length | backend name | u32 ring size n
//! | n × (u16 length | element)          ring, in order
//! | u16 length | element                key image
//! | n × (u16 length | 32-byte digest)    challenges c_1..c_n
//! | n × (u16 length | scalar)            responses r_1..r_n
//! ```
//! All integers are big-endian. Decoding is strict: non-canonical field
//! values, wrong lengths and trailing bytes are errors.

use thiserror::Error;

use super::group::Group;
use super::lsag::{KeyImage, RingSignature};

const MAGIC: &[u8; 4] = b"LRS1";
/// Upper bound on ring size accepted by the decoder.
const MAX_RING: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated input")]
    Truncated,
    #[error("bad magic or version")]
    BadMagic,
    #[error("signature is for backend {0:?}")]
    WrongBackend(String),
    #[error("ring size {0} out of range")]
    BadRingSize(u32),
    #[error("invalid {0} encoding")]
    InvalidField(&'static str),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

fn put(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn encode_signature<G: Group>(group: &G, sig: &RingSignature<G>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let name = group.name().as_bytes();
    out.push(name.len() as u8);
    out.extend_from_slice(name);
    out.extend_from_slice(&(sig.ring.len() as u32).to_be_bytes());
    for p in &sig.ring {
        put(&mut out, &group.encode_element(p));
    }
    put(&mut out, &group.encode_element(&sig.key_image.0));
    for c in &sig.challenges {
        put(&mut out, c);
    }
    for r in &sig.responses {
        put(&mut out, &group.encode_scalar(r));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn field(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes"));
        self.take(len as usize)
    }
}

pub fn decode_signature<G: Group>(group: &G, bytes: &[u8]) -> Result<RingSignature<G>, DecodeError> {
    let mut rd = Reader { buf: bytes };
    if rd.take(4)? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let name_len = rd.take(1)?[0] as usize;
    let name = rd.take(name_len)?;
    if name != group.name().as_bytes() {
        return Err(DecodeError::WrongBackend(String::from_utf8_lossy(name).into_owned()));
    }
    let n = u32::from_be_bytes(rd.take(4)?.try_into().expect("4 bytes"));
    if n == 0 || n > MAX_RING {
        return Err(DecodeError::BadRingSize(n));
    }
    let n = n as usize;

    let ring = (0..n)
        .map(|_| group.decode_element(rd.field()?).ok_or(DecodeError::InvalidField("ring element")))
        .collect::<Result<Vec<_>, _>>()?;
    let image = group
        .decode_element(rd.field()?)
        .ok_or(DecodeError::InvalidField("key image"))?;
    let challenges = (0..n)
        .map(|_| rd.field()?.try_into().map_err(|_| DecodeError::InvalidField("challenge")))
        .collect::<Result<Vec<[u8; 32]>, _>>()?;
    let responses = (0..n)
        .map(|_| group.decode_scalar(rd.field()?).ok_or(DecodeError::InvalidField("response")))
        .collect::<Result<Vec<_>, _>>()?;
    if !rd.buf.is_empty() {
        return Err(DecodeError::TrailingBytes(rd.buf.len()));
    }
    Ok(RingSignature { ring, key_image: KeyImage(image), challenges, responses })
}
