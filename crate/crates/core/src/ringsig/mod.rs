//! Linkable one-time ring signatures, key images and stealth addresses.
//!
//! The signature is a CryptoNote-style linkable ring signature: a signer
//! hides among `n` public keys, and the attached key image `x·Hp(P)` is the
//! same for every signature made with the secret `x`, which is how double
//! spends are linked without revealing the signer.

mod encoding;
mod group;
mod lsag;
mod registry;
mod ristretto;
mod stealth;
mod toy;

pub use encoding::{decode_signature, encode_signature, DecodeError};
pub use group::{tagged_hash, tags, Digest32, Group};
pub use lsag::{gen, sig, ver, ver_with_policy, KeyImage, KeyPair, RingConfig, RingSignature};
pub use registry::{lnk, KeyImageRegistry, LinkStatus};
pub use ristretto::Ristretto;
pub use stealth::{
    audit_scan, derive_stealth, prove_payment, recover_stealth_secret, verify_payment_proof,
    PaymentProof, ReceiverAddress, ReceiverKeys, StealthOutput, TrackingKey,
};
pub use toy::{ToyElement, ToyGroup, ToyScalar};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("invalid group parameters")]
    InvalidParams,
    #[error("ring of {len} keys is below the minimum of {min}")]
    RingTooSmall { len: usize, min: usize },
    #[error("signer secret does not match ring member {index}")]
    SignerNotInRing { index: usize },
    #[error("identity element is not a valid public key")]
    IdentityElement,
    #[error("no output matches this receiver")]
    NoMatchingOutput,
    #[error("ephemeral secret does not match the published ephemeral key")]
    WrongEphemeral,
}
