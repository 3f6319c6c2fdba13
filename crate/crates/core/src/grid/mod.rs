//! Static network description and the bus admittance matrix.
//!
//! Loads and generation are kept in MW/MVAr as read from case files; series
//! impedances, line charging and bus shunts are per unit on `base_mva`.

mod cdf;
mod parse;
mod ybus;

pub use cdf::parse_cdf;
pub use parse::{parse_case, write_case};
pub use ybus::{build_ybus, AdmittanceMatrix};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

const IEEE14: &str = include_str!("../../fixtures/ieee14.case");
const IEEE118: &str = include_str!("../../fixtures/ieee118.case");

/// Names accepted by [`builtin_case`].
pub const BUILTIN_CASES: [&str; 2] = ["ieee14", "ieee118"];

/// Case text of a bundled fixture.
pub fn builtin_case_text(name: &str) -> Option<&'static str> {
    match name {
        "ieee14" => Some(IEEE14),
        "ieee118" => Some(IEEE118),
        _ => None,
    }
}

/// Parses a bundled fixture (`ieee14` or `ieee118`).
pub fn builtin_case(name: &str) -> Result<GridCase> {
    let text = builtin_case_text(name)
        .ok_or_else(|| Error::Validation(format!("no bundled case named `{name}`")))?;
    parse_case(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    PV,
    PQ,
}

impl BusKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BusKind::Slack => "SLACK",
            BusKind::PV => "PV",
            BusKind::PQ => "PQ",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SLACK" | "REF" => Some(BusKind::Slack),
            "PV" => Some(BusKind::PV),
            "PQ" => Some(BusKind::PQ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// 1-based, contiguous.
    pub id: usize,
    pub kind: BusKind,
    /// MW
    pub load_p: f64,
    /// MVAr
    pub load_q: f64,
    /// MW
    pub gen_p: f64,
    /// p.u., meaningful for PV and slack buses.
    pub voltage_setpoint: f64,
    /// p.u. shunt conductance at 1 p.u. voltage.
    pub shunt_g: f64,
    /// p.u. shunt susceptance at 1 p.u. voltage.
    pub shunt_b: f64,
}

impl Bus {
    pub fn new(id: usize, kind: BusKind) -> Self {
        Self {
            id,
            kind,
            load_p: 0.0,
            load_q: 0.0,
            gen_p: 0.0,
            voltage_setpoint: 1.0,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance.
    pub b_charging: f64,
    /// Off-nominal turns ratio on the from side; 1.0 for lines.
    pub tap: f64,
}

impl Branch {
    pub fn line(from_bus: usize, to_bus: usize, r: f64, x: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            r,
            x,
            b_charging: 0.0,
            tap: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// 0-based index of the slack bus. Panics on an unvalidated case without one.
    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn bus(&self, id: usize) -> Option<&Bus> {
        id.checked_sub(1).and_then(|i| self.buses.get(i))
    }

    pub fn bus_mut(&mut self, id: usize) -> Option<&mut Bus> {
        id.checked_sub(1).and_then(move |i| self.buses.get_mut(i))
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.load_p).sum()
    }

    /// Checks every structural invariant of a case.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::Validation(format!(
                "base MVA must be positive, got {}",
                self.base_mva
            )));
        }
        if self.buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i + 1 {
                return Err(Error::Validation(format!(
                    "bus ids must be contiguous from 1; position {} holds id {}",
                    i + 1,
                    bus.id
                )));
            }
            if bus.kind != BusKind::PQ && !(bus.voltage_setpoint > 0.0) {
                return Err(Error::Validation(format!(
                    "bus {} needs a positive voltage setpoint",
                    bus.id
                )));
            }
            let values = [
                bus.load_p,
                bus.load_q,
                bus.gen_p,
                bus.voltage_setpoint,
                bus.shunt_g,
                bus.shunt_b,
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("bus {} has non-finite data", bus.id)));
            }
        }
        let slacks = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slacks != 1 {
            return Err(Error::Validation(format!(
                "exactly one slack bus required, found {slacks}"
            )));
        }
        let n = self.n_buses();
        for br in &self.branches {
            let label = format!("branch {}-{}", br.from_bus, br.to_bus);
            if br.from_bus == 0 || br.from_bus > n || br.to_bus == 0 || br.to_bus > n {
                return Err(Error::Validation(format!("{label} references a missing bus")));
            }
            if br.from_bus == br.to_bus {
                return Err(Error::Validation(format!("{label} is a self-loop")));
            }
            if !(br.r >= 0.0) || !br.x.is_finite() || !br.b_charging.is_finite() {
                return Err(Error::Validation(format!("{label} has invalid impedance")));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::Validation(format!("{label} has zero impedance")));
            }
            if !(br.tap > 0.0 && br.tap.is_finite()) {
                return Err(Error::Validation(format!("{label} has invalid tap {}", br.tap)));
            }
        }
        if !self.is_connected() {
            return Err(Error::Validation("network is not a single island".into()));
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.n_buses();
        let mut adjacency = vec![Vec::new(); n];
        for br in &self.branches {
            adjacency[br.from_bus - 1].push(br.to_bus - 1);
            adjacency[br.to_bus - 1].push(br.from_bus - 1);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
