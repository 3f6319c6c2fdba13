//! Steady-state operation along a daily load curve.

use super::{base_ybus, generate_steps, jitter_loads, solve_sample, Dataset, GenerationParams};
use crate::error::{Error, Result};
use crate::grid::{BusKind, GridCase};

/// Hourly load multipliers, hour 0 to hour 23: night trough, morning ramp,
/// midday plateau and an evening peak at 18:00.
pub const DAILY_CURVE: [f64; 24] = [
    0.62, 0.58, 0.56, 0.55, 0.56, 0.62, 0.72, 0.85, 0.93, 0.95, 0.94, 0.92, 0.90, 0.89, 0.88,
    0.90, 0.95, 1.00, 1.02, 1.00, 0.95, 0.86, 0.76, 0.68,
];

/// Multiplier at dataset position `k` of `count` samples spanning one day.
/// The curve is periodic and linearly interpolated between its points.
pub fn daily_multiplier(curve: &[f64], k: usize, count: usize) -> f64 {
    let m = curve.len();
    if m == 1 || count == 0 {
        return curve[0];
    }
    let pos = (k % count) as f64 * m as f64 / count as f64;
    let i = pos.floor() as usize % m;
    let frac = pos - pos.floor();
    let next = curve[(i + 1) % m];
    curve[i] + frac * (next - curve[i])
}

/// Scales every load by the curve multiplier times a per-bus jitter factor and
/// non-slack generation by the multiplier alone, then solves each step.
pub fn gen_daily_profile(case: &GridCase, curve: Option<&[f64]>, params: &GenerationParams) -> Result<Dataset> {
    let curve = curve.unwrap_or(&DAILY_CURVE);
    if curve.is_empty() || curve.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::contract("load curve must be non-empty, finite and non-negative"));
    }
    let y = base_ybus(case)?;
    generate_steps(case, params, |k| {
        let mult = daily_multiplier(curve, k, params.count);
        let mut step = case.clone();
        for bus in &mut step.buses {
            bus.load_p *= mult;
            bus.load_q *= mult;
            if bus.kind != BusKind::Slack {
                bus.gen_p *= mult;
            }
        }
        jitter_loads(&mut step, params.jitter, params.seed, k);
        solve_sample(&step, &y, &y, params, k)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_hours() {
        assert_eq!(daily_multiplier(&DAILY_CURVE, 0, 24), 0.62);
        assert_eq!(daily_multiplier(&DAILY_CURVE, 18, 24), 1.02);
        let half = daily_multiplier(&DAILY_CURVE, 1, 48);
        assert!((half - 0.60).abs() < 1e-12);
        // wraps from hour 23 back to hour 0
        let wrap = daily_multiplier(&DAILY_CURVE, 47, 48);
        assert!((wrap - 0.65).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_curve() {
        let case = crate::grid::builtin_case("ieee14").unwrap();
        let params = GenerationParams::new(2, 0.0, 0);
        assert!(gen_daily_profile(&case, Some(&[1.0, -0.1]), &params).is_err());
    }
}
