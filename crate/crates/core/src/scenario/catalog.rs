//! The scenario table for the IEEE 14-bus (S1–S5) and 118-bus (S6–S9) systems.

use super::{AttackSpec, Recipe, SampleCounts, ScenarioSpec, TrajectoryShape};
use crate::error::{Error, Result};

pub const BUILTIN_SCENARIOS: [&str; 14] = [
    "S1.1", "S2.1", "S2.2", "S3.1", "S3.2", "S4.1", "S4.2", "S4.3", "S5.1", "S5.2", "S6.1", "S7.1",
    "S8.1", "S9.1",
];

fn daily() -> Recipe {
    Recipe::DailyProfile { curve: None }
}

fn fault(bus: usize, r: f64) -> Recipe {
    Recipe::Fault { bus, resistance_pu: r }
}

fn load(delta_mw: f64) -> Recipe {
    Recipe::LoadChange { delta_mw, buses: None }
}

/// Spec for a catalogued scenario index with default sample counts and seed 0.
pub fn builtin_scenario(index: &str) -> Result<ScenarioSpec> {
    use Recipe::*;
    let (case, train, test, attack) = match index {
        "S1.1" => ("ieee14", daily(), HeldOut, None),
        "S2.1" => ("ieee14", GenShutdown { bus: 2 }, load(40.0), None),
        "S2.2" => ("ieee14", GenShutdown { bus: 2 }, load(80.0), None),
        "S3.1" => ("ieee14", GenRamp { bus: 2, delta_mw: 40.0 }, load(-40.0), None),
        "S3.2" => ("ieee14", GenRamp { bus: 2, delta_mw: 40.0 }, load(-80.0), None),
        "S4.1" => ("ieee14", fault(2, 0.5), fault(5, 0.5), None),
        "S4.2" => ("ieee14", fault(2, 0.5), fault(7, 0.5), None),
        "S4.3" => ("ieee14", fault(2, 0.5), fault(12, 0.5), None),
        "S5.1" => ("ieee14", daily(), HeldOut, Some(AttackSpec::thirds(4))),
        "S5.2" => ("ieee14", daily(), HeldOut, Some(AttackSpec::thirds(14))),
        "S6.1" => ("ieee118", daily(), HeldOut, None),
        "S7.1" => (
            "ieee118",
            GenShutdown { bus: 26 },
            LoadChange {
                delta_mw: 314.0,
                buses: Some(vec![20, 21, 22, 23, 27]),
            },
            None,
        ),
        "S8.1" => ("ieee118", fault(19, 0.25), fault(33, 0.25), None),
        "S9.1" => ("ieee118", daily(), HeldOut, Some(AttackSpec::thirds(54))),
        other => return Err(Error::contract(format!("unknown scenario `{other}`"))),
    };
    Ok(ScenarioSpec {
        index: index.to_string(),
        case: case.to_string(),
        train_recipe: train,
        test_recipe: test,
        samples: SampleCounts::default(),
        noise_level: 0.01,
        jitter: 0.02,
        seed: 0,
        attack,
        shape: TrajectoryShape::default(),
    })
}
