use crate::error::{Error, Result};
use crate::grid::GridCase;
use serde::{Deserialize, Serialize};

/// A change to the operating point of one bus, in MW / MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Adjustment {
    /// Adds to the bus load.
    Load { bus: usize, p_mw: f64, q_mvar: f64 },
    /// Adds to the bus generation.
    Generation { bus: usize, p_mw: f64 },
    /// Replaces the bus generation.
    SetGeneration { bus: usize, p_mw: f64 },
}

impl Adjustment {
    pub fn bus(&self) -> usize {
        match *self {
            Adjustment::Load { bus, .. }
            | Adjustment::Generation { bus, .. }
            | Adjustment::SetGeneration { bus, .. } => bus,
        }
    }
}

/// Returns a copy of `case` with the adjustments applied in order.
pub fn apply_operating_point(case: &GridCase, adjustments: &[Adjustment]) -> Result<GridCase> {
    let mut out = case.clone();
    for adj in adjustments {
        let bus = out
            .bus_mut(adj.bus())
            .ok_or_else(|| Error::contract(format!("bus {} does not exist", adj.bus())))?;
        match *adj {
            Adjustment::Load { p_mw, q_mvar, .. } => {
                bus.load_p += p_mw;
                bus.load_q += q_mvar;
            }
            Adjustment::Generation { p_mw, .. } => bus.gen_p += p_mw,
            Adjustment::SetGeneration { p_mw, .. } => bus.gen_p = p_mw,
        }
    }
    Ok(out)
}

/// Spreads `total_mw` over all buses with positive active load, in
/// proportion to that load, keeping each bus's power factor.
pub fn proportional_load_increase(case: &GridCase, total_mw: f64) -> Vec<Adjustment> {
    let total: f64 = case.buses.iter().filter(|b| b.load_p > 0.0).map(|b| b.load_p).sum();
    if total == 0.0 {
        return Vec::new();
    }
    case.buses
        .iter()
        .filter(|b| b.load_p > 0.0)
        .map(|b| {
            let ratio = total_mw / total;
            Adjustment::Load {
                bus: b.id,
                p_mw: b.load_p * ratio,
                q_mvar: b.load_q * ratio,
            }
        })
        .collect()
}

/// Splits `total_mw` of active load equally over `buses`.
pub fn equal_load_increase(buses: &[usize], total_mw: f64) -> Vec<Adjustment> {
    let share = total_mw / buses.len() as f64;
    buses
        .iter()
        .map(|&bus| Adjustment::Load {
            bus,
            p_mw: share,
            q_mvar: 0.0,
        })
        .collect()
}
