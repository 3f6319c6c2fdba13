//! Generator shutdowns, generation ramps and load changes as time-ordered
//! trajectories from the pre-event to the post-event operating point.

use super::{base_ybus, generate_steps, jitter_loads, solve_sample, Dataset, GenerationParams, Recipe};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::powerflow::{apply_operating_point, equal_load_increase, proportional_load_increase, Adjustment};

/// Full post-event change of a disturbance recipe, as additive deltas.
pub(crate) fn event_deltas(case: &GridCase, recipe: &Recipe) -> Result<Vec<Adjustment>> {
    let missing = |b: usize| Error::contract(format!("recipe references missing bus {b}"));
    Ok(match recipe {
        Recipe::GenShutdown { bus } => {
            let gen = case.bus(*bus).ok_or_else(|| missing(*bus))?.gen_p;
            vec![Adjustment::Generation { bus: *bus, p_mw: -gen }]
        }
        Recipe::GenRamp { bus, delta_mw } => {
            case.bus(*bus).ok_or_else(|| missing(*bus))?;
            vec![Adjustment::Generation { bus: *bus, p_mw: *delta_mw }]
        }
        Recipe::LoadChange { delta_mw, buses: Some(buses) } => {
            if buses.is_empty() {
                return Err(Error::contract("load change over an empty bus list"));
            }
            equal_load_increase(buses, *delta_mw)
        }
        Recipe::LoadChange { delta_mw, buses: None } => proportional_load_increase(case, *delta_mw),
        other => return Err(Error::contract(format!("{other:?} is not a disturbance recipe"))),
    })
}

fn scale(adj: &Adjustment, alpha: f64) -> Adjustment {
    match *adj {
        Adjustment::Load { bus, p_mw, q_mvar } => Adjustment::Load {
            bus,
            p_mw: alpha * p_mw,
            q_mvar: alpha * q_mvar,
        },
        Adjustment::Generation { bus, p_mw } => Adjustment::Generation { bus, p_mw: alpha * p_mw },
        Adjustment::SetGeneration { bus, p_mw } => Adjustment::SetGeneration { bus, p_mw },
    }
}

/// Interpolates linearly from the base case to the post-event case over the
/// ramp of [`super::TrajectoryShape`]. A shut-down generator keeps its bus
/// type, so the bus still regulates voltage with zero active output.
pub fn gen_disturbance(case: &GridCase, recipe: &Recipe, params: &GenerationParams) -> Result<Dataset> {
    let deltas = event_deltas(case, recipe)?;
    let y = base_ybus(case)?;
    generate_steps(case, params, |k| {
        let alpha = params.shape.ramp_progress(k);
        let scaled: Vec<Adjustment> = if alpha == 0.0 {
            Vec::new()
        } else {
            deltas.iter().map(|a| scale(a, alpha)).collect()
        };
        let mut step = apply_operating_point(case, &scaled)?;
        jitter_loads(&mut step, params.jitter, params.seed, k);
        solve_sample(&step, &y, &y, params, k)
    })
}
