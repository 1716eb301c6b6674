use std::collections::BTreeMap;

use super::group::Group;
use super::lsag::RingSignature;

/// Outcome of a link check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinkStatus {
    Fresh,
    /// The key image was already used by this transaction.
    Linked(String),
}

/// Append-only set of key images seen in accepted transactions.
///
/// Images are keyed by their canonical encoding so the registry is
/// independent of the group backend.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyImageRegistry {
    seen: BTreeMap<Vec<u8>, String>,
}

impl KeyImageRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn contains(&self, image: &[u8]) -> bool {
        self.seen.contains_key(image)
    }

    /// Transaction that first used `image`.
    pub fn get(&self, image: &[u8]) -> Option<&str> {
        self.seen.get(image).map(String::as_str)
    }

    /// Records `image` for `tx` unless it is already present.
    pub fn check_and_insert(&mut self, image: &[u8], tx: &str) -> LinkStatus {
        match self.seen.get(image) {
            Some(prior) => LinkStatus::Linked(prior.clone()),
            None => {
                self.seen.insert(image.to_vec(), tx.to_string());
                LinkStatus::Fresh
            }
        }
    }
}

/// Links `signature` against the registry. A fresh image is inserted under `tx`.
pub fn lnk<G: Group>(
    group: &G,
    registry: &mut KeyImageRegistry,
    signature: &RingSignature<G>,
    tx: &str,
) -> LinkStatus {
    registry.check_and_insert(&group.encode_element(&signature.key_image.0), tx)
}
