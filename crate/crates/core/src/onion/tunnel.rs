use std::collections::BTreeMap;

use curve25519_dalek::ristretto::RistrettoPoint;
use curve25519_dalek::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};

use super::cell::{peel, OnionPacket, Peeled, MAX_HOPS};
use super::crypto::{decode_point, derive_key, EncryptionKeypair, LayerKey, KID_LEN};
use super::directory::{DirectoryStore, LeaseSet};
use super::{DestinationId, OnionError, RouterId, TunnelId};

const LAYER_TAG: &[u8] = b"microgrid/onion/layer/v1";

/// Sent to a hop during tunnel construction so it can derive its layer key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TunnelBuildRecord {
    pub hop: RouterId,
    pub ephemeral: [u8; 32],
}

/// Where the last hop hands the bundle over, and who can open it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliveryTarget {
    pub gateway: RouterId,
    pub tunnel: TunnelId,
    pub destination: DestinationId,
    pub e2e_key: [u8; 32],
}

/// A unidirectional path. Only the builder holds all layer keys.
#[derive(Clone, Debug)]
pub struct Tunnel {
    hops: Vec<RouterId>,
    layer_keys: Vec<LayerKey>,
    pub build_records: Vec<TunnelBuildRecord>,
    pub delivery: DeliveryTarget,
}

impl Tunnel {
    /// Builds a tunnel over an explicit hop list. The last hop must be the
    /// delivery gateway.
    pub fn through<R: RngCore + CryptoRng>(
        directory: &DirectoryStore,
        hops: &[RouterId],
        delivery: DeliveryTarget,
        rng: &mut R,
    ) -> Result<Self, OnionError> {
        if hops.is_empty() || hops.len() > MAX_HOPS {
            return Err(OnionError::InvalidHopCount(hops.len()));
        }
        if hops.last() != Some(&delivery.gateway) {
            return Err(OnionError::InvalidRecord("tunnel must end at the delivery gateway"));
        }
        for (i, h) in hops.iter().enumerate() {
            if hops[..i].contains(h) {
                return Err(OnionError::DuplicateHop);
            }
        }
        let mut layer_keys = Vec::with_capacity(hops.len());
        let mut build_records = Vec::with_capacity(hops.len());
        for &hop in hops {
            let info = directory.router(hop).ok_or(OnionError::UnknownRouter(hop))?;
            let peer = decode_point(&info.encryption_key)
                .ok_or(OnionError::InvalidRecord("router encryption key"))?;
            let e = Scalar::random(rng);
            let ephemeral = RistrettoPoint::mul_base(&e);
            layer_keys.push(LayerKey::from_bytes(derive_key(LAYER_TAG, &ephemeral, &(e * peer))));
            build_records.push(TunnelBuildRecord { hop, ephemeral: ephemeral.compress().to_bytes() });
        }
        Ok(Tunnel { hops: hops.to_vec(), layer_keys, build_records, delivery })
    }

    pub fn hops(&self) -> &[RouterId] {
        &self.hops
    }

    pub fn layer_keys(&self) -> &[LayerKey] {
        &self.layer_keys
    }
}

/// Picks a uniformly random entry point of `lease`, then `hop_count - 1`
/// distinct routers uniformly from the rest of the directory.
pub fn build_path<R: RngCore + CryptoRng>(
    directory: &DirectoryStore,
    sender: Option<RouterId>,
    lease: &LeaseSet,
    hop_count: usize,
    now: u64,
    rng: &mut R,
) -> Result<Tunnel, OnionError> {
    if hop_count == 0 || hop_count > MAX_HOPS {
        return Err(OnionError::InvalidHopCount(hop_count));
    }
    if lease.expires <= now {
        return Err(OnionError::Expired);
    }
    if lease.entry_points.is_empty() {
        return Err(OnionError::InvalidRecord("lease set without entry points"));
    }
    let entry = lease.entry_points[rng.gen_range(0..lease.entry_points.len())];
    if directory.router(entry.gateway).is_none() {
        return Err(OnionError::UnknownRouter(entry.gateway));
    }
    let mut eligible: Vec<RouterId> = directory
        .routers()
        .into_iter()
        .map(|r| r.id)
        .filter(|id| Some(*id) != sender && *id != entry.gateway)
        .collect();
    if eligible.len() < hop_count {
        return Err(OnionError::InsufficientRouters { needed: hop_count, available: eligible.len() });
    }
    let (chosen, _) = eligible.partial_shuffle(rng, hop_count - 1);
    let mut hops = chosen.to_vec();
    hops.push(entry.gateway);
    let delivery = DeliveryTarget {
        gateway: entry.gateway,
        tunnel: entry.tunnel,
        destination: lease.destination,
        e2e_key: lease.e2e_key,
    };
    Tunnel::through(directory, &hops, delivery, rng)
}

/// A router's long-term encryption key and the layer keys of tunnels it
/// participates in.
#[derive(Clone, Debug)]
pub struct RouterKeys {
    id: RouterId,
    keypair: EncryptionKeypair,
    layers: BTreeMap<[u8; KID_LEN], LayerKey>,
}

impl RouterKeys {
    pub fn generate<R: RngCore + CryptoRng>(id: RouterId, rng: &mut R) -> Self {
        RouterKeys { id, keypair: EncryptionKeypair::generate(rng), layers: BTreeMap::new() }
    }

    pub fn id(&self) -> RouterId {
        self.id
    }

    pub fn public_bytes(&self) -> [u8; 32] {
        self.keypair.public_bytes()
    }

    /// Derives and stores the layer key for one build record.
    pub fn accept_build(&mut self, record: &TunnelBuildRecord) -> Result<LayerKey, OnionError> {
        if record.hop != self.id {
            return Err(OnionError::NotAddressedToMe);
        }
        let ephemeral =
            decode_point(&record.ephemeral).ok_or(OnionError::InvalidRecord("build ephemeral"))?;
        let key = LayerKey::from_bytes(derive_key(LAYER_TAG, &ephemeral, &self.keypair.agree(&ephemeral)));
        self.layers.insert(key.kid(), key.clone());
        Ok(key)
    }

    /// Peels with whichever layer key the cell header names.
    pub fn peel(&self, packet: &OnionPacket) -> Result<Peeled, OnionError> {
        let key = self.layers.get(&packet.kid()).ok_or(OnionError::NotAddressedToMe)?;
        peel(packet, key)
    }
}
