//! Garlic-routed message layer.
//!
//! Every message travels as one fixed-size [`OnionPacket`] through a
//! unidirectional [`Tunnel`]. Each hop strips one symmetric layer and
//! learns only the next router. The innermost payload is a
//! [`GarlicBundle`] sealed to the destination's end-to-end key.

mod cell;
mod cover;
mod crypto;
mod directory;
mod garlic;
mod tunnel;

pub use cell::{peel, wrap, OnionPacket, Payload, Peeled, CELL_SIZE, HEADER_LEN, LAYER_OVERHEAD, MAX_HOPS};
pub use cover::{emit_cover_traffic, CoverEmission};
pub use crypto::{open_with, seal_to, EncryptionKeypair, LayerKey, SEAL_OVERHEAD};
pub use directory::{
    destination_key, router_key, DirectoryStore, Lease, LeaseSet, NetDbRecord, RouterInfo,
};
pub use garlic::{bundle_garlic, unbundle, Clove, GarlicBundle, BUNDLE_LEN, MAX_CLOVE_PAYLOAD};
pub use tunnel::{build_path, DeliveryTarget, RouterKeys, Tunnel, TunnelBuildRecord};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Public router identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouterId(pub u32);

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Tunnel identifier local to a gateway router.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TunnelId(pub u32);

/// Anonymous application destination. Only appears inside lease sets and
/// encrypted cloves, never in routing headers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DestinationId(pub [u8; 32]);

impl fmt::Debug for DestinationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DestinationId({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OnionError {
    #[error("payload of {len} bytes exceeds capacity of {max}")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("cell is not addressed to this hop")]
    NotAddressedToMe,
    #[error("cell layer failed authentication or is malformed")]
    CorruptLayer,
    #[error("need {needed} eligible routers, directory has {available}")]
    InsufficientRouters { needed: usize, available: usize },
    #[error("hop count {0} outside 1..={MAX_HOPS}")]
    InvalidHopCount(usize),
    #[error("tunnel hops must be distinct")]
    DuplicateHop,
    #[error("record signature is invalid")]
    BadSignature,
    #[error("record has expired")]
    Expired,
    #[error("record is older than the stored version")]
    Stale,
    #[error("malformed record: {0}")]
    InvalidRecord(&'static str),
    #[error("router {0} is not in the directory")]
    UnknownRouter(RouterId),
    #[error("garlic bundle needs at least one clove")]
    EmptyBundle,
    #[error("decryption failed")]
    DecryptionFailed,
    #[error("cover traffic rate must be a finite non-negative number")]
    InvalidRate,
}
