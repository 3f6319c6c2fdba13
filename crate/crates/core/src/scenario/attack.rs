//! Data-manipulation attacks on the measurement feed of one bus.

use super::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    P,
    Q,
}

/// Bias applied to test points `first..=last` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSegment {
    pub first: usize,
    pub last: usize,
    /// Relative bias: the measurement is multiplied by `1 + bias`.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub target_bus: usize,
    pub channels: Vec<Channel>,
    pub schedule: Vec<BiasSegment>,
}

impl AttackSpec {
    /// P and Q of `bus` biased by 10 %, 20 % and 30 % over test points
    /// 1–33, 34–66 and 67–100.
    pub fn thirds(bus: usize) -> Self {
        Self {
            target_bus: bus,
            channels: vec![Channel::P, Channel::Q],
            schedule: vec![
                BiasSegment { first: 1, last: 33, bias: 0.1 },
                BiasSegment { first: 34, last: 66, bias: 0.2 },
                BiasSegment { first: 67, last: 100, bias: 0.3 },
            ],
        }
    }

    /// Last test point covered by the schedule.
    pub fn span(&self) -> usize {
        self.schedule.iter().map(|s| s.last).max().unwrap_or(0)
    }

    /// Bias at 1-based test point `t`, if scheduled.
    pub fn bias_at(&self, t: usize) -> Option<f64> {
        self.schedule.iter().find(|s| s.first <= t && t <= s.last).map(|s| s.bias)
    }

    pub fn validate(&self, n_buses: usize) -> Result<()> {
        if self.target_bus == 0 || self.target_bus > n_buses {
            return Err(Error::contract(format!("attack targets missing bus {}", self.target_bus)));
        }
        let mut expected = 1;
        for seg in &self.schedule {
            if !(seg.bias >= 0.0) || !seg.bias.is_finite() {
                return Err(Error::contract(format!("attack bias must be non-negative, got {}", seg.bias)));
            }
            if seg.first != expected || seg.last < seg.first {
                return Err(Error::contract("attack schedule must cover consecutive test points from 1"));
            }
            expected = seg.last + 1;
        }
        Ok(())
    }
}

/// Multiplies the attacked channels of the target bus by `1 + β` at every
/// scheduled test point. Test points follow dataset order.
pub fn apply_attack(ds: &Dataset, atk: &AttackSpec) -> Result<Dataset> {
    atk.validate(ds.n_buses())?;
    if ds.len() < atk.span() {
        return Err(Error::contract(format!(
            "attack schedule spans {} test points, dataset has {}",
            atk.span(),
            ds.len()
        )));
    }
    let i = atk.target_bus - 1;
    let mut out = ds.clone();
    for (pos, s) in out.samples.iter_mut().enumerate() {
        let Some(beta) = atk.bias_at(pos + 1) else { continue };
        let m = 1.0 + beta;
        for ch in &atk.channels {
            match ch {
                Channel::P => s.inputs.p[i] *= m,
                Channel::Q => s.inputs.q[i] *= m,
            }
        }
    }
    Ok(out)
}
