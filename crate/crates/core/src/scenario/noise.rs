use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng;
use rand_distr::{Distribution, Normal};

/// Adds zero-mean Gaussian noise with standard deviation `level·|x|` to every
/// P and Q input. Each sample draws from its own stream keyed by its
/// timestamp index; targets are untouched.
pub fn inject_noise(ds: &Dataset, level: f64, seed: u64) -> Result<Dataset> {
    if level.is_nan() || level < 0.0 {
        return Err(Error::contract(format!("noise level must be non-negative, got {level}")));
    }
    if level == 0.0 {
        return Ok(ds.clone());
    }
    let samples = ds
        .samples
        .iter()
        .map(|s| {
            let mut rng = rng::stream(seed, &[s.timestamp_index as u64]);
            let mut perturb = |x: f64| {
                let sd = level * x.abs();
                if sd == 0.0 {
                    x
                } else {
                    x + Normal::new(0.0, sd).expect("finite sd").sample(&mut rng)
                }
            };
            let mut out: Sample = s.clone();
            for v in out.inputs.p.iter_mut() {
                *v = perturb(*v);
            }
            for v in out.inputs.q.iter_mut() {
                *v = perturb(*v);
            }
            out
        })
        .collect();
    Ok(Dataset {
        case_ref: ds.case_ref.clone(),
        samples,
    })
}
