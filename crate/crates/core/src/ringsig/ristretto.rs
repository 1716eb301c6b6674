use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use super::group::{tags, Digest32, Group};
use super::RingError;

/// The Ristretto255 prime-order group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ristretto;

fn wide_hash(tag: &[u8], parts: &[&[u8]]) -> Sha512 {
    let mut h = Sha512::new();
    h.update((tag.len() as u32).to_be_bytes());
    h.update(tag);
    for part in parts {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    h
}

impl Group for Ristretto {
    type Scalar = Scalar;
    type Element = RistrettoPoint;

    fn name(&self) -> &'static str {
        "ristretto255"
    }

    fn validate(&self) -> Result<(), RingError> {
        Ok(())
    }

    fn generator(&self) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn identity(&self) -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn mul(&self, k: &Scalar, e: &RistrettoPoint) -> RistrettoPoint {
        k * e
    }

    fn mul_base(&self, k: &Scalar) -> RistrettoPoint {
        RistrettoPoint::mul_base(k)
    }

    fn add(&self, a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a - b
    }

    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Scalar {
        loop {
            let s = Scalar::random(rng);
            if s != Scalar::ZERO {
                return s;
            }
        }
    }

    fn challenge_scalar(&self, digest: &Digest32) -> Scalar {
        Scalar::from_bytes_mod_order(*digest)
    }

    fn hash_to_scalar(&self, tag: &[u8], parts: &[&[u8]]) -> Scalar {
        let s = Scalar::from_hash(wide_hash(tag, parts));
        if s == Scalar::ZERO {
            Scalar::ONE
        } else {
            s
        }
    }

    fn key_image_base(&self, p: &RistrettoPoint) -> RistrettoPoint {
        let enc = p.compress();
        RistrettoPoint::from_hash(wide_hash(tags::KEY_IMAGE, &[enc.as_bytes()]))
    }

    fn encode_element(&self, e: &RistrettoPoint) -> Vec<u8> {
        e.compress().to_bytes().to_vec()
    }

    fn decode_element(&self, bytes: &[u8]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }

    fn encode_scalar(&self, s: &Scalar) -> Vec<u8> {
        s.to_bytes().to_vec()
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Option<Scalar> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Option::from(Scalar::from_canonical_bytes(arr))
    }
}
