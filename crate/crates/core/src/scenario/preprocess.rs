//! Feature scaling fitted on the training split.
//!
//! Inputs `[P_1..P_N, Q_1..Q_N]`: exact zeros become [`EPSILON`], then each
//! column is standardised and min-max rescaled to [-1, 1]. Targets
//! `[vm_1 − 1 .. vm_N − 1, va_1 .. va_N]` are min-max rescaled to [-1, 1].

use super::Dataset;
use crate::error::{Error, Result};
use crate::powerflow::{Injections, StateVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Replacement for exact zeros in the inputs.
pub const EPSILON: f64 = 1e-8;

/// Input columns with a training standard deviation at or below this are
/// treated as constant (1e-9 p.u. is 1e-7 MW on a 100 MVA base).
const DEGENERATE_STD: f64 = 1e-9;
const DEGENERATE_SPAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMeta {
    pub n_buses: usize,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Extrema of the standardised training columns.
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    /// Constant input columns, mapped to 0.
    pub input_degenerate: Vec<bool>,
    pub target_mid: Vec<f64>,
    pub target_half: Vec<f64>,
    /// Constant target columns; their half-range is set to 1 so the mapping
    /// stays invertible.
    pub target_degenerate: Vec<bool>,
}

/// Network-ready arrays, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedData {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl NormalizedData {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

fn raw_inputs(inj: &Injections) -> Vec<f64> {
    inj.p
        .iter()
        .chain(&inj.q)
        .map(|&v| if v == 0.0 { EPSILON } else { v })
        .collect()
}

fn raw_targets(state: &StateVector) -> Vec<f64> {
    state.vm.iter().map(|v| v - 1.0).chain(state.va.iter().copied()).collect()
}

impl NormMeta {
    fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::contract("cannot fit normalisation on an empty dataset"));
        }
        let n = ds.n_buses();
        let width = 2 * n;
        let count = ds.len() as f64;
        let rows: Vec<Vec<f64>> = ds.samples.iter().map(|s| raw_inputs(&s.inputs)).collect();
        let mut mean = vec![0.0; width];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut std = vec![0.0; width];
        for r in &rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / count).sqrt());
        let mut input_min = vec![f64::INFINITY; width];
        let mut input_max = vec![f64::NEG_INFINITY; width];
        for r in &rows {
            for j in 0..width {
                let z = if std[j] > DEGENERATE_STD { (r[j] - mean[j]) / std[j] } else { 0.0 };
                input_min[j] = input_min[j].min(z);
                input_max[j] = input_max[j].max(z);
            }
        }
        let input_degenerate: Vec<bool> = (0..width)
            .map(|j| std[j] <= DEGENERATE_STD || input_max[j] - input_min[j] <= DEGENERATE_SPAN)
            .collect();

        let mut tmin = vec![f64::INFINITY; width];
        let mut tmax = vec![f64::NEG_INFINITY; width];
        for s in &ds.samples {
            for (j, v) in raw_targets(&s.targets).into_iter().enumerate() {
                tmin[j] = tmin[j].min(v);
                tmax[j] = tmax[j].max(v);
            }
        }
        let mut target_mid = vec![0.0; width];
        let mut target_half = vec![1.0; width];
        let mut target_degenerate = vec![false; width];
        for j in 0..width {
            target_mid[j] = 0.5 * (tmin[j] + tmax[j]);
            let half = 0.5 * (tmax[j] - tmin[j]);
            if half > DEGENERATE_SPAN {
                target_half[j] = half;
            } else {
                target_degenerate[j] = true;
            }
        }
        let flagged = input_degenerate.iter().filter(|d| **d).count();
        if flagged > 0 {
            log::warn!("{flagged} constant input feature(s) mapped to 0");
        }
        Ok(Self {
            n_buses: n,
            input_mean: mean,
            input_std: std,
            input_min,
            input_max,
            input_degenerate,
            target_mid,
            target_half,
            target_degenerate,
        })
    }

    pub fn width(&self) -> usize {
        2 * self.n_buses
    }

    pub fn normalize_inputs(&self, inj: &Injections) -> Vec<f64> {
        raw_inputs(inj)
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                if self.input_degenerate[j] {
                    return 0.0;
                }
                let z = (v - self.input_mean[j]) / self.input_std[j];
                2.0 * (z - self.input_min[j]) / (self.input_max[j] - self.input_min[j]) - 1.0
            })
            .collect()
    }

    pub fn normalize_targets(&self, state: &StateVector) -> Vec<f64> {
        raw_targets(state)
            .into_iter()
            .enumerate()
            .map(|(j, v)| (v - self.target_mid[j]) / self.target_half[j])
            .collect()
    }

    /// Maps a normalised output row back to physical voltages.
    pub fn denormalize_targets(&self, row: &[f64]) -> StateVector {
        let n = self.n_buses;
        let phys: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.target_half[j] + self.target_mid[j])
            .collect();
        StateVector {
            vm: phys[..n].iter().map(|v| v + 1.0).collect(),
            va: phys[n..].to_vec(),
        }
    }

    /// Normalises a dataset with this (training) fit.
    pub fn apply(&self, ds: &Dataset) -> Result<NormalizedData> {
        if !ds.is_empty() && ds.n_buses() != self.n_buses {
            return Err(Error::contract(format!(
                "dataset has {} buses, normalisation was fitted on {}",
                ds.n_buses(),
                self.n_buses
            )));
        }
        let w = self.width();
        let mut inputs = Array2::zeros((ds.len(), w));
        let mut targets = Array2::zeros((ds.len(), w));
        for (i, s) in ds.samples.iter().enumerate() {
            for (j, v) in self.normalize_inputs(&s.inputs).into_iter().enumerate() {
                inputs[[i, j]] = v;
            }
            for (j, v) in self.normalize_targets(&s.targets).into_iter().enumerate() {
                targets[[i, j]] = v;
            }
        }
        Ok(NormalizedData { inputs, targets })
    }

    /// `key=value` lines, one vector per key with comma-separated values.
    pub fn to_kv(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let bits = |v: &[bool]| join(&v.iter().map(|b| *b as u8).collect::<Vec<_>>());
        format!(
            "n_buses={}\ninput_mean={}\ninput_std={}\ninput_min={}\ninput_max={}\ninput_degenerate={}\ntarget_mid={}\ntarget_half={}\ntarget_degenerate={}\n",
            self.n_buses,
            join(&self.input_mean),
            join(&self.input_std),
            join(&self.input_min),
            join(&self.input_max),
            bits(&self.input_degenerate),
            join(&self.target_mid),
            join(&self.target_half),
            bits(&self.target_degenerate),
        )
    }

    /// Inverse of [`NormMeta::to_kv`]; unknown keys are ignored.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim(), v.trim());
            }
        }
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::Format(format!("metadata lacks `{k}`")));
        let floats = |k: &str| -> Result<Vec<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.parse::<f64>().map_err(|e| Error::Format(format!("{k}: {e}"))))
                .collect()
        };
        let flags = |k: &str| -> Result<Vec<bool>> { Ok(floats(k)?.into_iter().map(|x| x != 0.0).collect()) };
        let n_buses: usize = get("n_buses")?
            .parse()
            .map_err(|e| Error::Format(format!("n_buses: {e}")))?;
        let meta = Self {
            n_buses,
            input_mean: floats("input_mean")?,
            input_std: floats("input_std")?,
            input_min: floats("input_min")?,
            input_max: floats("input_max")?,
            input_degenerate: flags("input_degenerate")?,
            target_mid: floats("target_mid")?,
            target_half: floats("target_half")?,
            target_degenerate: flags("target_degenerate")?,
        };
        let w = 2 * n_buses;
        let lens = [
            meta.input_mean.len(),
            meta.input_std.len(),
            meta.input_min.len(),
            meta.input_max.len(),
            meta.input_degenerate.len(),
            meta.target_mid.len(),
            meta.target_half.len(),
            meta.target_degenerate.len(),
        ];
        if lens.iter().any(|&l| l != w) {
            return Err(Error::Format(format!("metadata vectors must have {w} entries")));
        }
        Ok(meta)
    }
}

/// Fits on the training split, or applies a supplied training fit to any
/// other split.
pub fn preprocess(ds: &Dataset, split: Split, meta: Option<&NormMeta>) -> Result<(NormalizedData, NormMeta)> {
    let meta = match (split, meta) {
        (Split::Train, None) => NormMeta::fit(ds)?,
        (Split::Train, Some(_)) => {
            return Err(Error::contract("training split computes its own normalisation"))
        }
        (Split::Test, Some(m)) => m.clone(),
        (Split::Test, None) => {
            return Err(Error::contract("test split needs the training normalisation metadata"))
        }
    };
    Ok((meta.apply(ds)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Sample;

    fn ds(rows: &[([f64; 2], [f64; 2])]) -> Dataset {
        // single bus: inputs (P, Q), targets (vm, va)
        Dataset {
            case_ref: "t".into(),
            samples: rows
                .iter()
                .enumerate()
                .map(|(i, (inp, tgt))| Sample {
                    inputs: Injections { p: vec![inp[0]], q: vec![inp[1]] },
                    targets: StateVector { vm: vec![tgt[0]], va: vec![tgt[1]] },
                    timestamp_index: i,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_becomes_epsilon() {
        assert_eq!(raw_inputs(&Injections { p: vec![0.0], q: vec![-0.0] }), vec![EPSILON, EPSILON]);
    }

    #[test]
    fn constant_column_is_zero_and_flagged() {
        let d = ds(&[([1.0, 0.5], [1.0, 0.0]), ([2.0, 0.5], [1.1, 0.1]), ([3.0, 0.5], [1.2, 0.2])]);
        let (norm, meta) = preprocess(&d, Split::Train, None).unwrap();
        assert_eq!(meta.input_degenerate, vec![false, true]);
        assert!(norm.inputs.column(1).iter().all(|v| *v == 0.0));
        assert_eq!(norm.inputs[[0, 0]], -1.0);
        assert_eq!(norm.inputs[[2, 0]], 1.0);
    }

    #[test]
    fn test_split_requires_meta() {
        let d = ds(&[([1.0, 0.5], [1.0, 0.0])]);
        assert!(matches!(preprocess(&d, Split::Test, None), Err(Error::Contract(_))));
        let (_, meta) = preprocess(&d, Split::Train, None).unwrap();
        assert!(preprocess(&d, Split::Train, Some(&meta)).is_err());
        assert!(preprocess(&d, Split::Test, Some(&meta)).is_ok());
    }

    #[test]
    fn kv_round_trip() {
        let d = ds(&[([1.0, 0.5], [1.0, 0.0]), ([2.0, 0.7], [1.1, 0.1])]);
        let (_, meta) = preprocess(&d, Split::Train, None).unwrap();
        assert_eq!(NormMeta::from_kv(&meta.to_kv()).unwrap(), meta);
    }
}
