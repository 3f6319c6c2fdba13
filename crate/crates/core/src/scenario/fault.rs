//! Quasi-static three-phase fault: a conductance of `1/R` to ground at the
//! faulted bus for the steps of the fault window.

use super::{base_ybus, generate_steps, jitter_loads, solve_sample, Dataset, GenerationParams, Recipe};
use crate::error::{Error, Result};
use crate::grid::{build_ybus, GridCase};

/// Solves each step with the fault shunt stamped inside the window. Measured
/// injections are always evaluated against the unfaulted network, so the
/// current drawn by the fault appears at the faulted bus.
pub fn gen_fault(case: &GridCase, recipe: &Recipe, params: &GenerationParams) -> Result<Dataset> {
    let Recipe::Fault { bus, resistance_pu } = *recipe else {
        return Err(Error::contract("gen_fault needs a fault recipe"));
    };
    if resistance_pu.is_nan() || resistance_pu <= 0.0 {
        return Err(Error::contract("fault resistance must be positive"));
    }
    let mut faulted = case.clone();
    faulted
        .bus_mut(bus)
        .ok_or_else(|| Error::contract(format!("fault bus {bus} does not exist")))?
        .shunt_g += 1.0 / resistance_pu;
    let y = base_ybus(case)?;
    let y_fault = build_ybus(&faulted)?;
    generate_steps(case, params, |k| {
        let mut step = case.clone();
        jitter_loads(&mut step, params.jitter, params.seed, k);
        let solve_y = if params.shape.in_fault(k) { &y_fault } else { &y };
        solve_sample(&step, solve_y, &y, params, k)
    })
}
