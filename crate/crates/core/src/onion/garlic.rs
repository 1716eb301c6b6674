use rand::{CryptoRng, RngCore};

use super::cell::{CELL_SIZE, LAYER_OVERHEAD, MAX_HOPS};
use super::crypto::{open_with, seal_to, EncryptionKeypair, SEAL_OVERHEAD};
use super::{DestinationId, OnionError};

/// Sealed size of every bundle, chosen so a bundle fills a cell at the
/// maximum hop count.
pub const BUNDLE_LEN: usize = CELL_SIZE - MAX_HOPS * LAYER_OVERHEAD;
const PLAIN_LEN: usize = BUNDLE_LEN - SEAL_OVERHEAD;
const CLOVE_HEADER: usize = 32 + 2;
/// Largest payload a single-clove bundle can carry.
pub const MAX_CLOVE_PAYLOAD: usize = PLAIN_LEN - 1 - CLOVE_HEADER;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clove {
    pub destination: DestinationId,
    pub payload: Vec<u8>,
}

/// Cloves sealed together to one end-to-end key, always [`BUNDLE_LEN`] bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct GarlicBundle {
    sealed: Vec<u8>,
}

impl std::fmt::Debug for GarlicBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GarlicBundle({} bytes)", self.sealed.len())
    }
}

impl GarlicBundle {
    pub fn from_sealed(sealed: Vec<u8>) -> Result<Self, OnionError> {
        if sealed.len() != BUNDLE_LEN {
            return Err(OnionError::CorruptLayer);
        }
        Ok(GarlicBundle { sealed })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.sealed
    }

    pub fn into_sealed(self) -> Vec<u8> {
        self.sealed
    }
}

/// Encodes `count:u8 | (destination:[u8;32] | len:u16 | payload)*`, zero-padded,
/// then seals it to `recipient`.
pub fn bundle_garlic<R: RngCore + CryptoRng>(
    recipient: &[u8; 32],
    cloves: &[Clove],
    rng: &mut R,
) -> Result<GarlicBundle, OnionError> {
    if cloves.is_empty() {
        return Err(OnionError::EmptyBundle);
    }
    let needed = 1 + cloves.iter().map(|c| CLOVE_HEADER + c.payload.len()).sum::<usize>();
    if needed > PLAIN_LEN || cloves.len() > u8::MAX as usize {
        let len = cloves.iter().map(|c| c.payload.len()).sum();
        return Err(OnionError::PayloadTooLarge { len, max: MAX_CLOVE_PAYLOAD });
    }
    let mut plain = Vec::with_capacity(PLAIN_LEN);
    plain.push(cloves.len() as u8);
    for c in cloves {
        plain.extend_from_slice(&c.destination.0);
        plain.extend_from_slice(&(c.payload.len() as u16).to_be_bytes());
        plain.extend_from_slice(&c.payload);
    }
    plain.resize(PLAIN_LEN, 0);
    let sealed = seal_to(recipient, &plain, rng).ok_or(OnionError::InvalidRecord("encryption key"))?;
    Ok(GarlicBundle { sealed })
}

/// Opens `bundle` and returns the payloads of cloves addressed to `destination`.
/// Any decoding failure yields no cloves at all.
pub fn unbundle(
    bundle: &GarlicBundle,
    keys: &EncryptionKeypair,
    destination: DestinationId,
) -> Result<Vec<Vec<u8>>, OnionError> {
    let plain = open_with(keys, &bundle.sealed).ok_or(OnionError::DecryptionFailed)?;
    let count = *plain.first().ok_or(OnionError::DecryptionFailed)? as usize;
    let mut at = 1;
    let mut mine = Vec::new();
    for _ in 0..count {
        let header = plain.get(at..at + CLOVE_HEADER).ok_or(OnionError::DecryptionFailed)?;
        let dest: [u8; 32] = header[..32].try_into().expect("destination length");
        let len = u16::from_be_bytes([header[32], header[33]]) as usize;
        at += CLOVE_HEADER;
        let body = plain.get(at..at + len).ok_or(OnionError::DecryptionFailed)?;
        at += len;
        if DestinationId(dest) == destination {
            mine.push(body.to_vec());
        }
    }
    Ok(mine)
}
