use gridpinn_core::estimator::PreparedScenario;
use gridpinn_core::neural::MlpModel;
use gridpinn_core::scenario::NormalizedData;
use gridpinn_core::Result;
use serde::{Deserialize, Serialize};

/// Errors of one model on one dataset, physical units (p.u. and rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    /// Mean of the 2N absolute errors of each test point.
    pub per_test_point_mae: Vec<f64>,
    pub mean_mae: f64,
    /// Mean over test points of `(|Δvm_i| + |Δva_i|) / 2`.
    pub per_bus_mae: Vec<f64>,
    /// `per_bus_mae` of the attacked bus, when the data carries an attack.
    pub attacked_bus_mae: Option<f64>,
    /// MAE in normalised target space, the metric used for early stopping.
    pub normalized_mae: f64,
    pub training_time_s: f64,
    pub inference_time_ms: f64,
}

/// De-normalises predictions and aggregates absolute errors. Timing fields
/// are left at zero for the caller to fill.
pub fn evaluate(
    prepared: &PreparedScenario,
    model: &MlpModel,
    data: &NormalizedData,
    attacked_bus: Option<usize>,
) -> Result<MaeReport> {
    let n = prepared.n_buses;
    let errors = prepared.abs_errors(model, data)?;
    let points = errors.len().max(1) as f64;
    let per_test_point_mae: Vec<f64> = errors.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let mean_mae = per_test_point_mae.iter().sum::<f64>() / points;
    let mut per_bus_mae = vec![0.0; n];
    for row in &errors {
        for (i, b) in per_bus_mae.iter_mut().enumerate() {
            *b += 0.5 * (row[i] + row[n + i]);
        }
    }
    per_bus_mae.iter_mut().for_each(|b| *b /= points);
    let out = model.forward(data.inputs.view())?;
    let normalized_mae = (&out - &data.targets).mapv(f64::abs).mean().unwrap_or(0.0);
    Ok(MaeReport {
        attacked_bus_mae: attacked_bus.map(|b| per_bus_mae[b - 1]),
        per_test_point_mae,
        mean_mae,
        per_bus_mae,
        normalized_mae,
        training_time_s: 0.0,
        inference_time_ms: 0.0,
    })
}

/// Median with min/max whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
        Some(Self {
            median,
            min: v[0],
            max: v[m - 1],
        })
    }
}
