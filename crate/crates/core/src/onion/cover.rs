use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{OnionError, RouterId};

/// One scheduled zero-asset message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoverEmission {
    pub at_ms: u64,
    pub node: RouterId,
    pub slot: u64,
}

/// Samples a Poisson(`rate`) count per slot, each message at a uniform
/// offset within its slot. Output is sorted by time.
pub fn emit_cover_traffic<R: Rng>(
    node: RouterId,
    rate: f64,
    slots: u64,
    slot_ms: u64,
    rng: &mut R,
) -> Result<Vec<CoverEmission>, OnionError> {
    if !rate.is_finite() || rate < 0.0 || slot_ms == 0 {
        return Err(OnionError::InvalidRate);
    }
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let poisson = Poisson::new(rate).map_err(|_| OnionError::InvalidRate)?;
    let mut out = Vec::new();
    for slot in 0..slots {
        let count = poisson.sample(rng) as u64;
        let mut offsets: Vec<u64> = (0..count).map(|_| rng.gen_range(0..slot_ms)).collect();
        offsets.sort_unstable();
        out.extend(offsets.into_iter().map(|o| CoverEmission { at_ms: slot * slot_ms + o, node, slot }));
    }
    Ok(out)
}
