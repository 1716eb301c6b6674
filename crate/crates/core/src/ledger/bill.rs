use std::collections::{BTreeMap, BTreeSet};

use super::event::LedgerEvent;
use super::{AnonAddress, LedgerError, ProsumerId, Slot, TimeInterval, TradeId};

/// What a prosumer's smart meter knows about its owner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BillingIdentity {
    pub prosumer: ProsumerId,
    pub addresses: BTreeSet<AnonAddress>,
    /// Watt-slots drawn from the grid outside of trades during the window.
    pub grid_import: u64,
    /// Watt-slots fed into the grid outside of trades during the window.
    pub grid_export: u64,
}

/// Net amount owed for trades whose interval ends inside `window`, plus
/// metered grid exchange at the recorded tariff. Negative means a credit.
///
/// Only events naming one of the prosumer's addresses and the price policy
/// are read; the DSO receives the total alone.
pub fn compute_bill(
    events: &[LedgerEvent],
    who: &BillingIdentity,
    window: TimeInterval,
    now: Slot,
) -> Result<i64, LedgerError> {
    if now <= window.end {
        return Err(LedgerError::WindowNotElapsed { end: window.end, now });
    }
    let mine = |a: &AnonAddress| who.addresses.contains(a);
    let visible = events
        .iter()
        .filter(|e| matches!(e, LedgerEvent::SetPricePolicy { .. }) || e.addresses().into_iter().any(mine));

    let mut policy = None;
    let mut purchases: BTreeMap<TradeId, u64> = BTreeMap::new();
    let mut sales: BTreeMap<TradeId, u64> = BTreeMap::new();
    for event in visible {
        match event {
            LedgerEvent::SetPricePolicy { policy: p, .. } => policy = Some(*p),
            LedgerEvent::AcceptOffer { trade, buyer, seller, spec, escrow, .. }
                if window.contains(&TimeInterval { start: spec.interval.end, end: spec.interval.end }) =>
            {
                if mine(buyer) {
                    purchases.insert(*trade, *escrow);
                }
                if mine(seller) {
                    sales.insert(*trade, 0);
                }
            }
            LedgerEvent::SettleTrade { trade, to_seller, .. } => {
                if let Some(cost) = purchases.get_mut(trade) {
                    *cost = *to_seller;
                }
                if let Some(income) = sales.get_mut(trade) {
                    *income = *to_seller;
                }
            }
            _ => {}
        }
    }
    let policy = policy.ok_or(LedgerError::PolicyMissing)?;
    let paid: i128 = purchases.values().map(|v| *v as i128).sum();
    let earned: i128 = sales.values().map(|v| *v as i128).sum();
    let grid = who.grid_import as i128 * policy.import_price as i128
        - who.grid_export as i128 * policy.export_credit as i128;
    i64::try_from(paid - earned + grid).map_err(|_| LedgerError::Overflow)
}
