//! Multiplicative subgroup of `Z_p^*` with small prime order.
//!
//! Test-only backend: every discrete logarithm can be recovered by brute
//! force, which is what makes it useful as an oracle.

use rand::{CryptoRng, Rng, RngCore};

use super::group::{tagged_hash, tags, Digest32, Group};
use super::RingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyScalar(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyElement(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyGroup {
    p: u64,
    q: u64,
    g: u64,
    width: usize,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

impl ToyGroup {
    /// Safe prime 467 = 2·233 + 1 with generator 4 of the order-233 subgroup.
    pub fn standard() -> Self {
        Self::new(467, 233, 4).expect("standard toy parameters are valid")
    }

    pub fn new(p: u64, q: u64, g: u64) -> Result<Self, RingError> {
        let width = (64 - p.leading_zeros() as usize).div_ceil(8).max(1);
        let group = ToyGroup { p, q, g, width };
        group.validate()?;
        Ok(group)
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    fn reduce(&self, v: u64) -> ToyScalar {
        ToyScalar(v % self.q)
    }

    fn in_subgroup(&self, v: u64) -> bool {
        v >= 1 && v < self.p && pow_mod(v, self.q, self.p) == 1
    }

    /// Brute-force discrete logarithm of `e` to base `g`.
    pub fn discrete_log(&self, e: &ToyElement) -> Option<ToyScalar> {
        let mut acc = 1u64;
        for x in 0..self.q {
            if acc == e.0 {
                return Some(ToyScalar(x));
            }
            acc = acc * self.g % self.p;
        }
        None
    }

    /// Every element of the subgroup, indexed by discrete log.
    pub fn elements(&self) -> Vec<ToyElement> {
        let mut out = Vec::with_capacity(self.q as usize);
        let mut acc = 1u64;
        for _ in 0..self.q {
            out.push(ToyElement(acc));
            acc = acc * self.g % self.p;
        }
        out
    }

    fn digest_to_u64(d: &Digest32) -> u64 {
        u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

impl Group for ToyGroup {
    type Scalar = ToyScalar;
    type Element = ToyElement;

    fn name(&self) -> &'static str {
        "toy"
    }

    fn validate(&self) -> Result<(), RingError> {
        let ok = is_prime(self.p)
            && is_prime(self.q)
            && self.p < (1 << 31)
            && (self.p - 1).is_multiple_of(self.q)
            && self.g > 1
            && self.g < self.p
            && pow_mod(self.g, self.q, self.p) == 1;
        if ok {
            Ok(())
        } else {
            Err(RingError::InvalidParams)
        }
    }

    fn generator(&self) -> ToyElement {
        ToyElement(self.g)
    }

    fn identity(&self) -> ToyElement {
        ToyElement(1)
    }

    fn mul(&self, k: &ToyScalar, e: &ToyElement) -> ToyElement {
        ToyElement(pow_mod(e.0, k.0, self.p))
    }

    fn add(&self, a: &ToyElement, b: &ToyElement) -> ToyElement {
        ToyElement(a.0 * b.0 % self.p)
    }

    fn scalar_add(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        self.reduce(a.0 + b.0)
    }

    fn scalar_sub(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        self.reduce(a.0 + self.q - b.0 % self.q)
    }

    fn scalar_mul(&self, a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        self.reduce(a.0 * b.0)
    }

    fn scalar_from_u64(&self, v: u64) -> ToyScalar {
        self.reduce(v)
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> ToyScalar {
        ToyScalar(rng.gen_range(1..self.q))
    }

    fn challenge_scalar(&self, digest: &Digest32) -> ToyScalar {
        self.reduce(Self::digest_to_u64(digest))
    }

    fn hash_to_scalar(&self, tag: &[u8], parts: &[&[u8]]) -> ToyScalar {
        let d = tagged_hash(tag, parts);
        ToyScalar(1 + Self::digest_to_u64(&d) % (self.q - 1))
    }

    /// Fixed hashed base `g^e`, `e = Hs(tag)`. A base that depended on `p`
    /// would collide on a 233-element group and break key-image
    /// injectivity, so the toy backend ignores its argument.
    fn key_image_base(&self, _p: &ToyElement) -> ToyElement {
        let e = self.hash_to_scalar(tags::KEY_IMAGE, &[b"toy-base"]);
        self.mul_base(&e)
    }

    fn encode_element(&self, e: &ToyElement) -> Vec<u8> {
        e.0.to_be_bytes()[8 - self.width..].to_vec()
    }

    fn decode_element(&self, bytes: &[u8]) -> Option<ToyElement> {
        if bytes.len() != self.width {
            return None;
        }
        let v = bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64);
        self.in_subgroup(v).then_some(ToyElement(v))
    }

    fn encode_scalar(&self, s: &ToyScalar) -> Vec<u8> {
        s.0.to_be_bytes()[8 - self.width..].to_vec()
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Option<ToyScalar> {
        if bytes.len() != self.width {
            return None;
        }
        let v = bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64);
        (v < self.q).then_some(ToyScalar(v))
    }
}
