use gridpinn_core::neural::MlpModel;
use gridpinn_core::scenario::NormalizedData;
use gridpinn_core::{Error, Result};
use ndarray::s;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Training and inference cost of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub training_s: f64,
    /// Single-sample forward pass, milliseconds.
    pub inference_ms_mean: f64,
    pub inference_ms_std: f64,
    pub reps: usize,
}

/// Times `reps` single-sample forward passes cycling through the rows of
/// `data`; returns mean and population standard deviation in milliseconds.
pub fn measure_inference(model: &MlpModel, data: &NormalizedData, reps: usize) -> Result<(f64, f64)> {
    if data.is_empty() || reps == 0 {
        return Err(Error::contract("inference timing needs data and at least one repetition"));
    }
    let rows: Vec<_> = (0..data.len()).map(|i| data.inputs.slice(s![i..i + 1, ..]).to_owned()).collect();
    let mut times = Vec::with_capacity(reps);
    for r in 0..reps {
        let x = &rows[r % rows.len()];
        let t = Instant::now();
        let out = model.forward(x.view())?;
        std::hint::black_box(&out);
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mean = times.iter().sum::<f64>() / reps as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / reps as f64;
    Ok((mean, var.sqrt()))
}

/// Runs `train_fn` under a wall clock, then times inference of its model.
pub fn measure_costs<F>(train_fn: F, test: &NormalizedData, reps: usize) -> Result<(MlpModel, CostReport)>
where
    F: FnOnce() -> Result<MlpModel>,
{
    let t = Instant::now();
    let model = train_fn()?;
    let training_s = t.elapsed().as_secs_f64();
    let (inference_ms_mean, inference_ms_std) = measure_inference(&model, test, reps)?;
    Ok((
        model,
        CostReport {
            training_s,
            inference_ms_mean,
            inference_ms_std,
            reps,
        },
    ))
}
