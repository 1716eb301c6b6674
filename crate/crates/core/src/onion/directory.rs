//! Replicated directory of router and destination records.

use std::collections::BTreeMap;
use std::sync::RwLock;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};

use super::crypto::EncryptionKeypair;
use super::tunnel::RouterKeys;
use super::{DestinationId, OnionError, RouterId, TunnelId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouterInfo {
    pub id: RouterId,
    pub encryption_key: [u8; 32],
    pub signing_key: [u8; 32],
    /// Synthetic locator labels; they carry no topology information.
    pub addresses: Vec<String>,
    pub timestamp: u64,
    pub text: String,
    pub signature: [u8; 64],
}

/// One inbound tunnel entry point of a destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lease {
    pub gateway: RouterId,
    pub tunnel: TunnelId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeaseSet {
    pub destination: DestinationId,
    pub entry_points: Vec<Lease>,
    pub expires: u64,
    pub e2e_key: [u8; 32],
    pub signing_key: [u8; 32],
    pub revocation_key: [u8; 32],
    pub signature: [u8; 64],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetDbRecord {
    Router(RouterInfo),
    Lease(LeaseSet),
}

impl From<RouterInfo> for NetDbRecord {
    fn from(r: RouterInfo) -> Self {
        NetDbRecord::Router(r)
    }
}

impl From<LeaseSet> for NetDbRecord {
    fn from(l: LeaseSet) -> Self {
        NetDbRecord::Lease(l)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

fn verify(key: &[u8; 32], msg: &[u8], sig: &[u8; 64]) -> Result<(), OnionError> {
    let vk = VerifyingKey::from_bytes(key).map_err(|_| OnionError::BadSignature)?;
    vk.verify(msg, &Signature::from_bytes(sig)).map_err(|_| OnionError::BadSignature)
}

impl DestinationId {
    /// Destinations are named by the hash of their public keys.
    pub fn from_keys(e2e_key: &[u8; 32], signing_key: &[u8; 32]) -> Self {
        let mut h = Sha256::new();
        h.update(b"microgrid/destination/v1");
        h.update(e2e_key);
        h.update(signing_key);
        DestinationId(h.finalize().into())
    }
}

impl RouterInfo {
    pub fn signed(
        keys: &RouterKeys,
        signing: &SigningKey,
        addresses: Vec<String>,
        timestamp: u64,
        text: String,
    ) -> Self {
        let mut info = RouterInfo {
            id: keys.id(),
            encryption_key: keys.public_bytes(),
            signing_key: signing.verifying_key().to_bytes(),
            addresses,
            timestamp,
            text,
            signature: [0; 64],
        };
        info.signature = signing.sign(&info.signed_bytes()).to_bytes();
        info
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut out = b"microgrid/routerinfo/v1".to_vec();
        out.extend_from_slice(&self.id.0.to_be_bytes());
        out.extend_from_slice(&self.encryption_key);
        out.extend_from_slice(&self.signing_key);
        out.extend_from_slice(&(self.addresses.len() as u32).to_be_bytes());
        for a in &self.addresses {
            put_bytes(&mut out, a.as_bytes());
        }
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        put_bytes(&mut out, self.text.as_bytes());
        out
    }

    pub fn verify(&self) -> Result<(), OnionError> {
        verify(&self.signing_key, &self.signed_bytes(), &self.signature)
    }
}

impl LeaseSet {
    pub fn signed(
        entry_points: Vec<Lease>,
        expires: u64,
        e2e: &EncryptionKeypair,
        signing: &SigningKey,
        revocation_key: [u8; 32],
    ) -> Self {
        let e2e_key = e2e.public_bytes();
        let signing_key = signing.verifying_key().to_bytes();
        let mut set = LeaseSet {
            destination: DestinationId::from_keys(&e2e_key, &signing_key),
            entry_points,
            expires,
            e2e_key,
            signing_key,
            revocation_key,
            signature: [0; 64],
        };
        set.signature = signing.sign(&set.signed_bytes()).to_bytes();
        set
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut out = b"microgrid/leaseset/v1".to_vec();
        out.extend_from_slice(&self.destination.0);
        out.extend_from_slice(&(self.entry_points.len() as u32).to_be_bytes());
        for l in &self.entry_points {
            out.extend_from_slice(&l.gateway.0.to_be_bytes());
            out.extend_from_slice(&l.tunnel.0.to_be_bytes());
        }
        out.extend_from_slice(&self.expires.to_be_bytes());
        out.extend_from_slice(&self.e2e_key);
        out.extend_from_slice(&self.signing_key);
        out.extend_from_slice(&self.revocation_key);
        out
    }

    pub fn verify(&self) -> Result<(), OnionError> {
        if DestinationId::from_keys(&self.e2e_key, &self.signing_key) != self.destination {
            return Err(OnionError::InvalidRecord("destination does not match keys"));
        }
        verify(&self.signing_key, &self.signed_bytes(), &self.signature)
    }
}

pub fn destination_key(dest: &DestinationId) -> [u8; 32] {
    Sha256::digest(dest.0).into()
}

pub fn router_key(id: RouterId) -> [u8; 32] {
    Sha256::digest(id.0.to_be_bytes()).into()
}

impl NetDbRecord {
    pub fn key(&self) -> [u8; 32] {
        match self {
            NetDbRecord::Router(r) => router_key(r.id),
            NetDbRecord::Lease(l) => destination_key(&l.destination),
        }
    }

    fn version(&self) -> u64 {
        match self {
            NetDbRecord::Router(r) => r.timestamp,
            NetDbRecord::Lease(l) => l.expires,
        }
    }

    fn live_at(&self, now: u64) -> bool {
        match self {
            NetDbRecord::Router(_) => true,
            NetDbRecord::Lease(l) => l.expires > now,
        }
    }
}

/// Every participant holds a full copy; the roster is fixed for a run.
#[derive(Debug, Default)]
pub struct DirectoryStore {
    records: RwLock<BTreeMap<[u8; 32], NetDbRecord>>,
}

impl DirectoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `record` if its signature holds, it is live at `now` and it is
    /// newer than what is stored under the same key.
    pub fn publish(&self, record: NetDbRecord, now: u64) -> Result<(), OnionError> {
        match &record {
            NetDbRecord::Router(r) => r.verify()?,
            NetDbRecord::Lease(l) => {
                if l.entry_points.is_empty() {
                    return Err(OnionError::InvalidRecord("lease set without entry points"));
                }
                l.verify()?;
            }
        }
        if !record.live_at(now) {
            return Err(OnionError::Expired);
        }
        let key = record.key();
        let mut records = self.records.write().expect("directory lock poisoned");
        if records.get(&key).is_some_and(|old| old.version() >= record.version()) {
            return Err(OnionError::Stale);
        }
        records.insert(key, record);
        Ok(())
    }

    pub fn lookup(&self, key: &[u8; 32], now: u64) -> Option<NetDbRecord> {
        let records = self.records.read().expect("directory lock poisoned");
        records.get(key).filter(|r| r.live_at(now)).cloned()
    }

    pub fn lease_set(&self, dest: &DestinationId, now: u64) -> Option<LeaseSet> {
        match self.lookup(&destination_key(dest), now)? {
            NetDbRecord::Lease(l) => Some(l),
            NetDbRecord::Router(_) => None,
        }
    }

    pub fn router(&self, id: RouterId) -> Option<RouterInfo> {
        match self.lookup(&router_key(id), 0)? {
            NetDbRecord::Router(r) => Some(r),
            NetDbRecord::Lease(_) => None,
        }
    }

    /// All router records, ordered by id.
    pub fn routers(&self) -> Vec<RouterInfo> {
        let records = self.records.read().expect("directory lock poisoned");
        let mut out: Vec<RouterInfo> = records
            .values()
            .filter_map(|r| match r {
                NetDbRecord::Router(r) => Some(r.clone()),
                NetDbRecord::Lease(_) => None,
            })
            .collect();
        out.sort_by_key(|r| r.id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn lease(rng: &mut ChaCha20Rng, expires: u64) -> (LeaseSet, EncryptionKeypair, SigningKey) {
        let e2e = EncryptionKeypair::generate(rng);
        let signing = SigningKey::generate(rng);
        let set = LeaseSet::signed(
            vec![Lease { gateway: RouterId(1), tunnel: TunnelId(2) }],
            expires,
            &e2e,
            &signing,
            [0; 32],
        );
        (set, e2e, signing)
    }

    #[test]
    fn publish_lookup_round_trip_and_unknown() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let store = DirectoryStore::new();
        let (set, _, _) = lease(&mut rng, 100);
        store.publish(set.clone().into(), 10).unwrap();
        assert_eq!(store.lease_set(&set.destination, 10), Some(set.clone()));
        assert_eq!(
            store.lookup(&Sha256::digest(set.destination.0).into(), 10),
            Some(NetDbRecord::Lease(set))
        );
        assert_eq!(store.lease_set(&DestinationId([5; 32]), 10), None);
    }

    #[test]
    fn newer_record_replaces_older() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let store = DirectoryStore::new();
        let keys = RouterKeys::generate(RouterId(4), &mut rng);
        let signing = SigningKey::generate(&mut rng);
        let v1 = RouterInfo::signed(&keys, &signing, vec!["a".into()], 1, "v1".into());
        let v2 = RouterInfo::signed(&keys, &signing, vec!["b".into()], 2, "v2".into());
        store.publish(v1.clone().into(), 0).unwrap();
        store.publish(v2.clone().into(), 0).unwrap();
        assert_eq!(store.router(RouterId(4)), Some(v2));
        assert_eq!(store.publish(v1.into(), 0), Err(OnionError::Stale));
    }

    #[test]
    fn rejects_bad_signature_and_expired() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let store = DirectoryStore::new();
        let (mut set, _, _) = lease(&mut rng, 100);
        assert_eq!(store.publish(set.clone().into(), 100), Err(OnionError::Expired));
        set.expires = 200;
        assert_eq!(store.publish(set.into(), 0), Err(OnionError::BadSignature));
    }

    #[test]
    fn lookup_never_returns_expired() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let store = DirectoryStore::new();
        let (set, _, _) = lease(&mut rng, 50);
        store.publish(set.clone().into(), 0).unwrap();
        assert!(store.lease_set(&set.destination, 49).is_some());
        assert!(store.lease_set(&set.destination, 50).is_none());
    }
}
