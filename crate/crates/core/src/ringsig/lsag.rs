use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::group::{tagged_hash, tags, Digest32, Group};
use super::RingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RingConfig {
    pub min_ring_size: usize,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig { min_ring_size: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair<G: Group> {
    pub secret: G::Scalar,
    pub public: G::Element,
}

impl<G: Group> KeyPair<G> {
    pub fn generate<R: RngCore + CryptoRng>(group: &G, rng: &mut R) -> Self {
        Self::from_secret(group, group.random_scalar(rng))
    }

    pub fn from_secret(group: &G, secret: G::Scalar) -> Self {
        KeyPair { secret, public: group.mul_base(&secret) }
    }

    pub fn key_image(&self, group: &G) -> KeyImage<G> {
        KeyImage(group.mul(&self.secret, &group.key_image_base(&self.public)))
    }
}

/// `I = x·Hp(P)`.
#[derive(Debug, PartialEq, Eq)]
pub struct KeyImage<G: Group>(pub G::Element);

impl<G: Group> Clone for KeyImage<G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: Group> Copy for KeyImage<G> {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingSignature<G: Group> {
    pub ring: Vec<G::Element>,
    pub key_image: KeyImage<G>,
    /// `c_i`, one challenge digest per ring member.
    pub challenges: Vec<Digest32>,
    /// `r_i`, one response per ring member.
    pub responses: Vec<G::Scalar>,
}

/// Deterministic key generation from a seed.
pub fn gen<G: Group>(group: &G, seed: u64) -> Result<KeyPair<G>, RingError> {
    group.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(KeyPair::generate(group, &mut rng))
}

struct Transcript<'a, G: Group> {
    group: &'a G,
    prefix: Vec<u8>,
}

impl<'a, G: Group> Transcript<'a, G> {
    fn new(group: &'a G, message: &[u8], ring: &[G::Element], image: &KeyImage<G>) -> Self {
        let mut prefix = Vec::new();
        let mut push = |bytes: &[u8]| {
            prefix.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            prefix.extend_from_slice(bytes);
        };
        push(group.name().as_bytes());
        push(message);
        push(&(ring.len() as u32).to_be_bytes());
        for p in ring {
            push(&group.encode_element(p));
        }
        push(&group.encode_element(&image.0));
        Transcript { group, prefix }
    }

    fn challenge(&self, l: &G::Element, r: &G::Element) -> Digest32 {
        let l = self.group.encode_element(l);
        let r = self.group.encode_element(r);
        tagged_hash(tags::CHALLENGE, &[&self.prefix, &l, &r])
    }
}

/// Produces a ring signature by `ring[signer]` over `message`.
pub fn sig<G: Group, R: RngCore + CryptoRng>(
    group: &G,
    config: &RingConfig,
    message: &[u8],
    ring: &[G::Element],
    signer: usize,
    secret: &G::Scalar,
    rng: &mut R,
) -> Result<RingSignature<G>, RingError> {
    let n = ring.len();
    if n < config.min_ring_size.max(1) {
        return Err(RingError::RingTooSmall { len: n, min: config.min_ring_size.max(1) });
    }
    if signer >= n || group.mul_base(secret) != ring[signer] {
        return Err(RingError::SignerNotInRing { index: signer });
    }
    if ring.iter().any(|p| group.is_identity(p)) {
        return Err(RingError::IdentityElement);
    }

    let key_image = KeyImage(group.mul(secret, &group.key_image_base(&ring[signer])));
    let transcript = Transcript::new(group, message, ring, &key_image);

    let mut challenges = vec![[0u8; 32]; n];
    let mut responses = vec![group.scalar_from_u64(0); n];

    let alpha = group.random_scalar(rng);
    let l = group.mul_base(&alpha);
    let r = group.mul(&alpha, &group.key_image_base(&ring[signer]));
    challenges[(signer + 1) % n] = transcript.challenge(&l, &r);

    for step in 1..n {
        let i = (signer + step) % n;
        let ri = group.random_scalar(rng);
        let ci = group.challenge_scalar(&challenges[i]);
        let l = group.add(&group.mul_base(&ri), &group.mul(&ci, &ring[i]));
        let r = group.add(
            &group.mul(&ri, &group.key_image_base(&ring[i])),
            &group.mul(&ci, &key_image.0),
        );
        responses[i] = ri;
        challenges[(i + 1) % n] = transcript.challenge(&l, &r);
    }

    let cs = group.challenge_scalar(&challenges[signer]);
    responses[signer] = group.scalar_sub(&alpha, &group.scalar_mul(&cs, secret));

    Ok(RingSignature { ring: ring.to_vec(), key_image, challenges, responses })
}

/// Accepts iff every link `c_{i+1} = H(m, ring, I, r_i·G + c_i·P_i, r_i·Hp(P_i) + c_i·I)`
/// closes around the ring.
pub fn ver<G: Group>(group: &G, message: &[u8], signature: &RingSignature<G>) -> bool {
    let n = signature.ring.len();
    if n == 0 || signature.challenges.len() != n || signature.responses.len() != n {
        return false;
    }
    let image = &signature.key_image;
    if group.is_identity(&image.0) || signature.ring.iter().any(|p| group.is_identity(p)) {
        return false;
    }
    let transcript = Transcript::new(group, message, &signature.ring, image);
    (0..n).all(|i| {
        let ci = group.challenge_scalar(&signature.challenges[i]);
        let ri = &signature.responses[i];
        let p = &signature.ring[i];
        let l = group.add(&group.mul_base(ri), &group.mul(&ci, p));
        let r = group.add(&group.mul(ri, &group.key_image_base(p)), &group.mul(&ci, &image.0));
        transcript.challenge(&l, &r) == signature.challenges[(i + 1) % n]
    })
}

/// [`ver`] plus the minimum ring size policy.
pub fn ver_with_policy<G: Group>(
    group: &G,
    config: &RingConfig,
    message: &[u8],
    signature: &RingSignature<G>,
) -> bool {
    signature.ring.len() >= config.min_ring_size && ver(group, message, signature)
}
