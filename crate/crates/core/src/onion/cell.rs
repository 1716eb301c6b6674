//! Fixed-size relay cells.
//!
//! Wire layout of one layer (all integers big-endian):
//!
//! ```text
//! version:u8 | kid:[u8; 8] | nonce:[u8; 12] | len:u16 (masked) | ciphertext[len] | padding
//! ```
//!
//! `len` is XORed with a keystream derived from the layer key so that a
//! passive observer cannot read the remaining depth. The ciphertext opens
//! to `kind:u8 | next:u32 | inner`, where `inner` is the next layer (relay)
//! or the sealed garlic bundle (deliver). Padding is keystream filler that
//! each hop regenerates after peeling.

use rand::{CryptoRng, RngCore};

use super::crypto::{aead_open, aead_seal, keystream, LayerKey, KID_LEN, NONCE_LEN, TAG_LEN};
use super::garlic::{bundle_garlic, Clove, GarlicBundle, BUNDLE_LEN};
use super::tunnel::Tunnel;
use super::{OnionError, RouterId, TunnelId};

pub const CELL_SIZE: usize = 1024;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 1 + KID_LEN + NONCE_LEN + 2;
const ROUTING_LEN: usize = 5;
/// Bytes one hop adds around its inner payload.
pub const LAYER_OVERHEAD: usize = HEADER_LEN + TAG_LEN + ROUTING_LEN;
pub const MAX_HOPS: usize = 5;

const KIND_RELAY: u8 = 0;
const KIND_DELIVER: u8 = 1;

const _: () = assert!(BUNDLE_LEN + MAX_HOPS * LAYER_OVERHEAD == CELL_SIZE);

#[derive(Clone, PartialEq, Eq)]
pub struct OnionPacket {
    bytes: Vec<u8>,
    used: usize,
}

impl std::fmt::Debug for OnionPacket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OnionPacket({} of {CELL_SIZE} bytes used)", self.used)
    }
}

impl OnionPacket {
    fn padded(mut layer: Vec<u8>, key: &LayerKey, nonce: &[u8]) -> Self {
        let used = layer.len();
        layer.extend(keystream(key.as_bytes(), nonce, b"pad", CELL_SIZE - used));
        OnionPacket { bytes: layer, used }
    }

    /// Rebuilds a packet from bytes received on a link. Accepts a full cell
    /// or, when padding is disabled, just the meaningful prefix.
    pub fn from_wire(wire: &[u8]) -> Result<Self, OnionError> {
        if wire.len() < HEADER_LEN || wire.len() > CELL_SIZE {
            return Err(OnionError::CorruptLayer);
        }
        let mut bytes = wire.to_vec();
        bytes.resize(CELL_SIZE, 0);
        Ok(OnionPacket { bytes, used: wire.len() })
    }

    /// The full padded cell, always [`CELL_SIZE`] bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Header plus ciphertext without padding.
    pub fn unpadded(&self) -> &[u8] {
        &self.bytes[..self.used]
    }

    pub fn used_len(&self) -> usize {
        self.used
    }

    pub fn kid(&self) -> [u8; KID_LEN] {
        self.bytes[1..1 + KID_LEN].try_into().expect("kid length")
    }
}

/// What a sender hands to [`wrap`].
#[derive(Clone, Debug)]
pub enum Payload {
    /// Application bytes for the tunnel's destination, sent as a one-clove bundle.
    Message(Vec<u8>),
    /// A bundle that is already sealed.
    Garlic(GarlicBundle),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Peeled {
    Relay { next: RouterId, packet: OnionPacket },
    Deliver { tunnel: TunnelId, bundle: GarlicBundle },
}

fn seal_layer<R: RngCore + CryptoRng>(
    key: &LayerKey,
    kind: u8,
    next: u32,
    inner: &[u8],
    rng: &mut R,
) -> (Vec<u8>, [u8; NONCE_LEN]) {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut plain = Vec::with_capacity(ROUTING_LEN + inner.len());
    plain.push(kind);
    plain.extend_from_slice(&next.to_be_bytes());
    plain.extend_from_slice(inner);

    let kid = key.kid();
    let mut aad = [0u8; 1 + KID_LEN];
    aad[0] = VERSION;
    aad[1..].copy_from_slice(&kid);
    let ct = aead_seal(key.as_bytes(), &nonce, &aad, &plain);
    let mask = keystream(key.as_bytes(), &nonce, b"len", 2);
    let len = (ct.len() as u16).to_be_bytes();

    let mut layer = Vec::with_capacity(HEADER_LEN + ct.len());
    layer.extend_from_slice(&aad);
    layer.extend_from_slice(&nonce);
    layer.extend_from_slice(&[len[0] ^ mask[0], len[1] ^ mask[1]]);
    layer.extend_from_slice(&ct);
    (layer, nonce)
}

/// Wraps `payload` in one layer per tunnel hop, innermost first.
pub fn wrap<R: RngCore + CryptoRng>(
    payload: Payload,
    tunnel: &Tunnel,
    rng: &mut R,
) -> Result<OnionPacket, OnionError> {
    let bundle = match payload {
        Payload::Garlic(b) => b,
        Payload::Message(bytes) => {
            let clove = Clove { destination: tunnel.delivery.destination, payload: bytes };
            bundle_garlic(&tunnel.delivery.e2e_key, &[clove], rng)?
        }
    };
    let keys = tunnel.layer_keys();
    let last = keys.len() - 1;
    let mut inner = bundle.into_sealed();
    let mut outer_nonce = [0u8; NONCE_LEN];
    for (i, key) in keys.iter().enumerate().rev() {
        let (kind, next) = if i == last {
            (KIND_DELIVER, tunnel.delivery.tunnel.0)
        } else {
            (KIND_RELAY, tunnel.hops()[i + 1].0)
        };
        let (layer, nonce) = seal_layer(key, kind, next, &inner, rng);
        inner = layer;
        outer_nonce = nonce;
    }
    Ok(OnionPacket::padded(inner, &keys[0], &outer_nonce))
}

/// Removes the outer layer with `key`.
pub fn peel(packet: &OnionPacket, key: &LayerKey) -> Result<Peeled, OnionError> {
    let b = &packet.bytes;
    if b[0] != VERSION {
        return Err(OnionError::CorruptLayer);
    }
    if packet.kid() != key.kid() {
        return Err(OnionError::NotAddressedToMe);
    }
    let nonce = &b[1 + KID_LEN..1 + KID_LEN + NONCE_LEN];
    let mask = keystream(key.as_bytes(), nonce, b"len", 2);
    let len = u16::from_be_bytes([b[HEADER_LEN - 2] ^ mask[0], b[HEADER_LEN - 1] ^ mask[1]]) as usize;
    if len < TAG_LEN + ROUTING_LEN || HEADER_LEN + len > packet.used {
        return Err(OnionError::CorruptLayer);
    }
    let plain = aead_open(key.as_bytes(), nonce, &b[..1 + KID_LEN], &b[HEADER_LEN..HEADER_LEN + len])
        .ok_or(OnionError::CorruptLayer)?;
    let next = u32::from_be_bytes(plain[1..ROUTING_LEN].try_into().expect("routing field"));
    let inner = plain[ROUTING_LEN..].to_vec();
    match plain[0] {
        KIND_RELAY if inner.len() >= HEADER_LEN => Ok(Peeled::Relay {
            next: RouterId(next),
            packet: OnionPacket::padded(inner, key, nonce),
        }),
        KIND_DELIVER if inner.len() == BUNDLE_LEN => {
            Ok(Peeled::Deliver { tunnel: TunnelId(next), bundle: GarlicBundle::from_sealed(inner)? })
        }
        _ => Err(OnionError::CorruptLayer),
    }
}
