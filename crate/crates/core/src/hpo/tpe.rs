//! Tree-structured Parzen estimator over independent dimensions.
//!
//! Past observations are split at the `gamma` quantile of their loss into a
//! good and a bad set. Each set gets a per-dimension mixture of truncated
//! Gaussians (one per observation plus a wide prior component); candidates
//! drawn from the good mixture are scored by `log l(x) − log g(x)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeSettings {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeSettings {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 5,
            n_candidates: 24,
        }
    }
}

/// One search dimension. Sampling happens in the internal coordinate,
/// which is `ln x` for log-scaled dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dim {
    pub low: f64,
    pub high: f64,
    pub log: bool,
    pub integer: bool,
}

impl Dim {
    fn bounds(&self) -> (f64, f64) {
        if self.log {
            (self.low.ln(), self.high.ln())
        } else {
            (self.low, self.high)
        }
    }

    pub fn to_internal(&self, x: f64) -> f64 {
        if self.log {
            x.ln()
        } else {
            x
        }
    }

    /// Native value, clamped to the range and rounded for integer dimensions.
    pub fn to_native(&self, u: f64) -> f64 {
        let x = if self.log { u.exp() } else { u };
        let x = x.clamp(self.low, self.high);
        if self.integer {
            x.round().clamp(self.low.ceil(), self.high.floor())
        } else {
            x
        }
    }
}

struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    lo: f64,
    hi: f64,
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

impl Parzen {
    /// Prior component centred on the range plus one kernel per point, all
    /// sharing a Scott's-rule bandwidth.
    fn fit(points: &[f64], lo: f64, hi: f64) -> Self {
        let span = hi - lo;
        let n = points.len();
        let bw = if n > 1 {
            let mean = points.iter().sum::<f64>() / n as f64;
            let sd = (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            1.06 * sd * (n as f64).powf(-0.2)
        } else {
            span
        };
        let floor = span / (1.0 + n as f64).min(100.0);
        let bw = bw.clamp(floor, span);
        let mut mus = vec![0.5 * (lo + hi)];
        let mut sigmas = vec![span];
        mus.extend_from_slice(points);
        sigmas.extend(std::iter::repeat_n(bw, n));
        Self { mus, sigmas, lo, hi }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let w = 1.0 / self.mus.len() as f64;
        let mut total = 0.0;
        for (&mu, &s) in self.mus.iter().zip(&self.sigmas) {
            let mass = norm_cdf((self.hi - mu) / s) - norm_cdf((self.lo - mu) / s);
            let z = (x - mu) / s;
            let pdf = (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            total += w * pdf / mass.max(1e-300);
        }
        total.max(1e-300).ln()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let k = rng.gen_range(0..self.mus.len());
        for _ in 0..100 {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mus[k] + self.sigmas[k] * z;
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        self.mus[k].clamp(self.lo, self.hi)
    }
}

/// Suggests the next point (native values) given `(point, loss)` history.
pub fn suggest<R: Rng>(dims: &[Dim], history: &[(Vec<f64>, f64)], settings: &TpeSettings, rng: &mut R) -> Vec<f64> {
    if history.len() < settings.n_startup.max(1) {
        return dims
            .iter()
            .map(|d| {
                let (lo, hi) = d.bounds();
                d.to_native(rng.gen_range(lo..=hi))
            })
            .collect();
    }
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[a].1.total_cmp(&history[b].1));
    let n_good = ((settings.gamma * history.len() as f64).ceil() as usize).clamp(1, history.len());
    let (good, bad) = order.split_at(n_good);

    let models: Vec<(Parzen, Parzen)> = dims
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let (lo, hi) = d.bounds();
            let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| d.to_internal(history[i].0[j])).collect() };
            (Parzen::fit(&pick(good), lo, hi), Parzen::fit(&pick(bad), lo, hi))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..settings.n_candidates.max(1) {
        let native: Vec<f64> = dims
            .iter()
            .zip(&models)
            .map(|(d, (l, _))| d.to_native(l.sample(rng)))
            .collect();
        let score: f64 = dims
            .iter()
            .zip(&models)
            .zip(&native)
            .map(|((d, (l, g)), &x)| {
                let u = d.to_internal(x);
                l.log_pdf(u) - g.log_pdf(u)
            })
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, native));
        }
    }
    best.expect("at least one candidate").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_mixture_integrates_to_one() {
        let p = Parzen::fit(&[0.2, 0.25, 0.9], 0.0, 1.0);
        let steps = 20_000;
        let h = 1.0 / steps as f64;
        let integral: f64 = (0..steps).map(|i| p.log_pdf((i as f64 + 0.5) * h).exp() * h).sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn integer_dims_round() {
        let d = Dim { low: 4.0, high: 128.0, log: true, integer: true };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x = suggest(&[d], &[], &TpeSettings::default(), &mut rng)[0];
            assert_eq!(x, x.round());
            assert!((4.0..=128.0).contains(&x));
        }
    }
}
