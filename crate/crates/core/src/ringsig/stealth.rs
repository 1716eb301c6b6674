//! One-time destination keys derived with an ephemeral Diffie-Hellman
//! exchange: `P' = Hs(r·A)·G + B`, published with `R = r·G`.

use rand::{CryptoRng, RngCore};

use super::group::{tags, Group};
use super::lsag::KeyPair;
use super::RingError;

/// Long-term receiver keys: view pair `(a, A)` and spend pair `(b, B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceiverKeys<G: Group> {
    pub view: KeyPair<G>,
    pub spend: KeyPair<G>,
}

/// Public half of [`ReceiverKeys`].
#[derive(Debug, PartialEq, Eq)]
pub struct ReceiverAddress<G: Group> {
    pub view: G::Element,
    pub spend: G::Element,
}

/// View secret plus spend public key. Detects incoming outputs, cannot spend them.
#[derive(Debug, PartialEq, Eq)]
pub struct TrackingKey<G: Group> {
    pub view_secret: G::Scalar,
    pub spend: G::Element,
}

#[derive(Debug, PartialEq, Eq)]
pub struct StealthOutput<G: Group> {
    /// `R = r·G`
    pub ephemeral: G::Element,
    /// `P'`
    pub one_time: G::Element,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentProof<G: Group> {
    pub trade_id: String,
    pub ephemeral_secret: G::Scalar,
}

macro_rules! impl_copy {
    ($($t:ident),*) => {$(
        impl<G: Group> Clone for $t<G> {
            fn clone(&self) -> Self {
                *self
            }
        }
        impl<G: Group> Copy for $t<G> {}
    )*};
}

impl_copy!(ReceiverAddress, TrackingKey, StealthOutput);

impl<G: Group> ReceiverKeys<G> {
    pub fn generate<R: RngCore + CryptoRng>(group: &G, rng: &mut R) -> Self {
        ReceiverKeys { view: KeyPair::generate(group, rng), spend: KeyPair::generate(group, rng) }
    }

    pub fn address(&self) -> ReceiverAddress<G> {
        ReceiverAddress { view: self.view.public, spend: self.spend.public }
    }

    pub fn tracking_key(&self) -> TrackingKey<G> {
        TrackingKey { view_secret: self.view.secret, spend: self.spend.public }
    }
}

fn shared_scalar<G: Group>(group: &G, shared: &G::Element) -> G::Scalar {
    group.hash_to_scalar(tags::STEALTH, &[&group.encode_element(shared)])
}

fn expected_one_time<G: Group>(group: &G, shared: &G::Element, spend: &G::Element) -> G::Element {
    group.add(&group.mul_base(&shared_scalar(group, shared)), spend)
}

pub fn derive_stealth<G: Group>(
    group: &G,
    receiver: &ReceiverAddress<G>,
    ephemeral_secret: &G::Scalar,
) -> Result<StealthOutput<G>, RingError> {
    if group.is_identity(&receiver.view) || group.is_identity(&receiver.spend) {
        return Err(RingError::IdentityElement);
    }
    let shared = group.mul(ephemeral_secret, &receiver.view);
    Ok(StealthOutput {
        ephemeral: group.mul_base(ephemeral_secret),
        one_time: expected_one_time(group, &shared, &receiver.spend),
    })
}

/// `x' = Hs(a·R) + b`, checked against the published `P'`.
pub fn recover_stealth_secret<G: Group>(
    group: &G,
    keys: &ReceiverKeys<G>,
    output: &StealthOutput<G>,
) -> Result<G::Scalar, RingError> {
    if group.is_identity(&output.ephemeral) {
        return Err(RingError::IdentityElement);
    }
    let shared = group.mul(&keys.view.secret, &output.ephemeral);
    let secret = group.scalar_add(&shared_scalar(group, &shared), &keys.spend.secret);
    if group.mul_base(&secret) == output.one_time {
        Ok(secret)
    } else {
        Err(RingError::NoMatchingOutput)
    }
}

/// Discloses `r` for one output so a third party can confirm the payment.
pub fn prove_payment<G: Group>(
    group: &G,
    ephemeral_secret: &G::Scalar,
    output: &StealthOutput<G>,
    trade_id: &str,
) -> Result<PaymentProof<G>, RingError> {
    if group.mul_base(ephemeral_secret) != output.ephemeral {
        return Err(RingError::WrongEphemeral);
    }
    Ok(PaymentProof { trade_id: trade_id.to_string(), ephemeral_secret: *ephemeral_secret })
}

pub fn verify_payment_proof<G: Group>(
    group: &G,
    proof: &PaymentProof<G>,
    output: &StealthOutput<G>,
    receiver: &ReceiverAddress<G>,
) -> bool {
    let r = &proof.ephemeral_secret;
    if group.mul_base(r) != output.ephemeral {
        return false;
    }
    let shared = group.mul(r, &receiver.view);
    expected_one_time(group, &shared, &receiver.spend) == output.one_time
}

/// Indices of the outputs addressed to the tracking key's owner.
pub fn audit_scan<G: Group>(
    group: &G,
    key: &TrackingKey<G>,
    outputs: &[StealthOutput<G>],
) -> Vec<usize> {
    outputs
        .iter()
        .enumerate()
        .filter(|(_, o)| !group.is_identity(&o.ephemeral))
        .filter(|(_, o)| {
            let shared = group.mul(&key.view_secret, &o.ephemeral);
            expected_one_time(group, &shared, &key.spend) == o.one_time
        })
        .map(|(i, _)| i)
        .collect()
}
