use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::ringsig::tagged_hash;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const KID_LEN: usize = 8;
/// Ephemeral point, nonce and AEAD tag of a sealed box.
pub const SEAL_OVERHEAD: usize = 32 + NONCE_LEN + TAG_LEN;

/// Asymmetric encryption keys of a router or destination.
#[derive(Clone)]
pub struct EncryptionKeypair {
    secret: Scalar,
    public: RistrettoPoint,
}

impl std::fmt::Debug for EncryptionKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncryptionKeypair").field("public", &hex::encode(self.public_bytes())).finish()
    }
}

impl EncryptionKeypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = Scalar::random(rng);
        EncryptionKeypair { secret, public: RistrettoPoint::mul_base(&secret) }
    }

    pub fn public_bytes(&self) -> [u8; 32] {
        self.public.compress().to_bytes()
    }

    pub(crate) fn agree(&self, peer: &RistrettoPoint) -> RistrettoPoint {
        self.secret * peer
    }
}

pub(crate) fn decode_point(bytes: &[u8; 32]) -> Option<RistrettoPoint> {
    CompressedRistretto(*bytes).decompress()
}

/// Symmetric key for one tunnel hop.
#[derive(Clone, PartialEq, Eq)]
pub struct LayerKey([u8; 32]);

impl std::fmt::Debug for LayerKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LayerKey({})", hex::encode(self.kid()))
    }
}

impl LayerKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        LayerKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Short identifier placed in the cell header so a hop can tell which
    /// of its layer keys a cell is for.
    pub fn kid(&self) -> [u8; KID_LEN] {
        let d = tagged_hash(b"microgrid/onion/kid/v1", &[&self.0]);
        d[..KID_LEN].try_into().expect("kid length")
    }
}

pub(crate) fn derive_key(tag: &[u8], ephemeral: &RistrettoPoint, shared: &RistrettoPoint) -> [u8; 32] {
    tagged_hash(tag, &[ephemeral.compress().as_bytes(), shared.compress().as_bytes()])
}

pub(crate) fn aead_seal(key: &[u8; 32], nonce: &[u8; NONCE_LEN], aad: &[u8], msg: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(Nonce::from_slice(nonce), Payload { msg, aad })
        .expect("chacha20poly1305 encryption is infallible for in-range lengths")
}

pub(crate) fn aead_open(key: &[u8; 32], nonce: &[u8], aad: &[u8], ct: &[u8]) -> Option<Vec<u8>> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad })
        .ok()
}

/// Deterministic pseudo-random filler bytes.
pub(crate) fn keystream(key: &[u8; 32], nonce: &[u8], label: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut counter = 0u32;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(label);
        h.update(key);
        h.update(nonce);
        h.update(counter.to_be_bytes());
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(len);
    out
}

const E2E_TAG: &[u8] = b"microgrid/onion/e2e/v1";

/// Hybrid encryption to a public key: `E || nonce || AEAD(k, m)` with
/// `k = H(E, e·P)`.
pub fn seal_to<R: RngCore + CryptoRng>(recipient: &[u8; 32], plaintext: &[u8], rng: &mut R) -> Option<Vec<u8>> {
    let peer = decode_point(recipient)?;
    let e = Scalar::random(rng);
    let ephemeral = RistrettoPoint::mul_base(&e);
    let key = derive_key(E2E_TAG, &ephemeral, &(e * peer));
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let eph = ephemeral.compress().to_bytes();
    let mut out = Vec::with_capacity(SEAL_OVERHEAD + plaintext.len());
    out.extend_from_slice(&eph);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&aead_seal(&key, &nonce, &eph, plaintext));
    Some(out)
}

pub fn open_with(keys: &EncryptionKeypair, sealed: &[u8]) -> Option<Vec<u8>> {
    if sealed.len() < SEAL_OVERHEAD {
        return None;
    }
    let eph: [u8; 32] = sealed[..32].try_into().ok()?;
    let ephemeral = decode_point(&eph)?;
    let key = derive_key(E2E_TAG, &ephemeral, &keys.agree(&ephemeral));
    aead_open(&key, &sealed[32..32 + NONCE_LEN], &eph, &sealed[32 + NONCE_LEN..])
}
