//! Anonymous peer-to-peer energy trading for transactive microgrids.
//!
//! * [`ledger`]: asset ledger state machine (DSO issuance, offers, trades,
//!   settlement, clearing deadlines).
//! * [`ringsig`]: linkable ring signatures, key images, stealth addresses.
//! * [`onion`]: garlic-routed fixed-size cells, tunnels and the directory.
//! * [`netsim`]: deterministic discrete-event simulator and metrics.
//! * [`attacks`]: timing correlation, zero-mixin chain reaction and the
//!   zk-proof cost model.

pub mod attacks;
pub mod ledger;
pub mod netsim;
pub mod onion;
pub mod ringsig;
