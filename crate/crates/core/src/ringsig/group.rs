use std::fmt::Debug;

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::RingError;

/// Domain tags for every hash invocation in the ring-signature layer.
pub mod tags {
    pub const CHALLENGE: &[u8] = b"microgrid/lsag/challenge/v1";
    pub const KEY_IMAGE: &[u8] = b"microgrid/lsag/key-image/v1";
    pub const STEALTH: &[u8] = b"microgrid/stealth/derive/v1";
}

/// A 32-byte hash output used as a ring challenge.
pub type Digest32 = [u8; 32];

/// SHA-256 over a domain tag and a list of length-prefixed parts.
pub fn tagged_hash(tag: &[u8], parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    h.update((tag.len() as u32).to_be_bytes());
    h.update(tag);
    for part in parts {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    h.finalize().into()
}

/// A prime-order cyclic group together with the hash functions the
/// signature scheme needs.
///
/// Two backends implement this: [`super::ToyGroup`], a 233-element
/// multiplicative subgroup small enough to enumerate, and
/// [`super::Ristretto`] for real use.
pub trait Group: Clone + Debug + Send + Sync {
    type Scalar: Copy + Eq + Debug + Send + Sync;
    type Element: Copy + Eq + Debug + Send + Sync;

    /// Short backend identifier, bound into every transcript.
    fn name(&self) -> &'static str;

    /// Checks that the parameters describe a prime-order group.
    fn validate(&self) -> Result<(), RingError>;

    fn generator(&self) -> Self::Element;
    fn identity(&self) -> Self::Element;
    fn mul(&self, k: &Self::Scalar, e: &Self::Element) -> Self::Element;
    fn add(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;

    fn mul_base(&self, k: &Self::Scalar) -> Self::Element {
        self.mul(k, &self.generator())
    }

    fn is_identity(&self, e: &Self::Element) -> bool {
        *e == self.identity()
    }

    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn is_zero_scalar(&self, s: &Self::Scalar) -> bool {
        *s == self.scalar_from_u64(0)
    }

    /// Uniform scalar in `[1, q-1]`.
    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Scalar;

    /// Reduces a challenge digest into the scalar field. May be zero.
    fn challenge_scalar(&self, digest: &Digest32) -> Self::Scalar;

    /// Hash to a non-zero scalar.
    fn hash_to_scalar(&self, tag: &[u8], parts: &[&[u8]]) -> Self::Scalar;

    /// Base point for the key image of the public key `p`.
    fn key_image_base(&self, p: &Self::Element) -> Self::Element;

    fn encode_element(&self, e: &Self::Element) -> Vec<u8>;
    fn decode_element(&self, bytes: &[u8]) -> Option<Self::Element>;
    fn encode_scalar(&self, s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(&self, bytes: &[u8]) -> Option<Self::Scalar>;
}
