//! Loss-weight search: every simplex triple on a grid of step `Δ`, each
//! with `t` TPE-guided training trials, keeping the lowest-MAE model.

mod tpe;

pub use tpe::{suggest, Dim, TpeSettings};

use crate::error::{Error, Result};
use crate::estimator::{HyperParams, PreparedScenario};
use crate::neural::{MlpModel, TrainReport};
use crate::pinn::LossWeights;
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

/// Integer coordinates `(a, b, c)` of a weight triple on a grid with
/// `a + b + c = steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeightKey {
    pub d: u32,
    pub p: u32,
    pub c: u32,
}

impl WeightKey {
    pub fn steps(&self) -> u32 {
        self.d + self.p + self.c
    }

    pub fn weights(&self) -> LossWeights {
        let n = self.steps() as f64;
        let (d, p) = (self.d as f64 / n, self.p as f64 / n);
        LossWeights {
            lambda_d: d,
            lambda_p: p,
            lambda_c: self.c as f64 / n,
        }
    }

    pub fn is_data_only(&self) -> bool {
        self.p == 0 && self.c == 0
    }
}

fn grid_steps(step: f64) -> Result<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::contract(format!("weight step {step} must be in (0, 1]")));
    }
    let n = (1.0 / step).round();
    if ((1.0 / step) - n).abs() > 1e-9 {
        return Err(Error::contract(format!("1/{step} is not an integer")));
    }
    Ok(n as u32)
}

/// All grid points of the weight simplex, starting at the data-only vertex
/// and ordered by decreasing `λd`, then decreasing `λp`.
pub fn enumerate_weight_keys(step: f64) -> Result<Vec<WeightKey>> {
    let n = grid_steps(step)?;
    let mut out = Vec::new();
    for d in (0..=n).rev() {
        for p in (0..=n - d).rev() {
            out.push(WeightKey { d, p, c: n - d - p });
        }
    }
    Ok(out)
}

pub fn enumerate_weights(step: f64) -> Result<Vec<LossWeights>> {
    Ok(enumerate_weight_keys(step)?.iter().map(WeightKey::weights).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub layers: (usize, usize),
    pub neurons: (usize, usize),
    pub learning_rate: (f64, f64),
    pub batch_size: (usize, usize),
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            layers: (2, 10),
            neurons: (64, 4096),
            learning_rate: (1e-5, 1e-1),
            batch_size: (4, 128),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.layers.0 >= 1
            && self.layers.0 < self.layers.1
            && self.neurons.0 >= 1
            && self.neurons.0 < self.neurons.1
            && self.learning_rate.0 > 0.0
            && self.learning_rate.0 < self.learning_rate.1
            && self.batch_size.0 >= 1
            && self.batch_size.0 < self.batch_size.1;
        if !ok {
            return Err(Error::contract(format!("invalid parameter ranges {self:?}")));
        }
        Ok(())
    }

    /// Layers linear; neurons, learning rate and batch size log-scaled.
    pub fn dims(&self) -> [Dim; 4] {
        [
            Dim { low: self.layers.0 as f64, high: self.layers.1 as f64, log: false, integer: true },
            Dim { low: self.neurons.0 as f64, high: self.neurons.1 as f64, log: true, integer: true },
            Dim { low: self.learning_rate.0, high: self.learning_rate.1, log: true, integer: false },
            Dim { low: self.batch_size.0 as f64, high: self.batch_size.1 as f64, log: true, integer: true },
        ]
    }

    pub fn contains(&self, p: &HyperParams) -> bool {
        (self.layers.0..=self.layers.1).contains(&p.layers)
            && (self.neurons.0..=self.neurons.1).contains(&p.neurons)
            && (self.learning_rate.0..=self.learning_rate.1).contains(&p.learning_rate)
            && (self.batch_size.0..=self.batch_size.1).contains(&p.batch_size)
    }
}

fn params_to_vec(p: &HyperParams) -> Vec<f64> {
    vec![p.layers as f64, p.neurons as f64, p.learning_rate, p.batch_size as f64]
}

fn params_from_vec(v: &[f64]) -> HyperParams {
    HyperParams {
        layers: v[0] as usize,
        neurons: v[1] as usize,
        learning_rate: v[2],
        batch_size: v[3] as usize,
    }
}

/// Next hyperparameters for a combination given its earlier trials.
pub fn tpe_suggest(history: &[Trial], ranges: &ParamRanges, settings: &TpeSettings, seed: u64) -> HyperParams {
    let hist: Vec<(Vec<f64>, f64)> = history.iter().map(|t| (params_to_vec(&t.params), t.mae)).collect();
    let mut rng = rng::stream(seed, &[]);
    params_from_vec(&suggest(&ranges.dims(), &hist, settings, &mut rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub combo_id: usize,
    pub trial_id: usize,
    pub key: WeightKey,
    pub weights: LossWeights,
    pub params: HyperParams,
    /// Seed of the training run (initialisation and shuffling).
    pub seed: u64,
    /// Ranking MAE, physical units; infinite for failed trials.
    pub mae: f64,
    /// Validation MAE of the returned model, physical units.
    pub val_mae: f64,
    pub wall_time_s: f64,
    pub failed: bool,
    #[serde(skip)]
    pub report: Option<TrainReport>,
}

/// Which split ranks trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    /// Unseen subset of the training recipe.
    #[default]
    Holdout,
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpoConfig {
    pub step: f64,
    pub trials_per_combo: usize,
    pub ranges: ParamRanges,
    pub tpe: TpeSettings,
    pub rank_by: RankBy,
    pub seed: u64,
}

impl Default for HpoConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            trials_per_combo: 10,
            ranges: ParamRanges::default(),
            tpe: TpeSettings::default(),
            rank_by: RankBy::Holdout,
            seed: 0,
        }
    }
}

/// Outcome of one training run.
pub struct TrialOutcome {
    pub model: MlpModel,
    pub report: TrainReport,
    pub mae: f64,
    pub val_mae: f64,
}

/// Trains and scores one configuration.
pub trait Evaluator: Sync {
    fn evaluate(&self, params: &HyperParams, weights: LossWeights, seed: u64) -> Result<TrialOutcome>;
}

impl PreparedScenario {
    fn run_trial(&self, params: &HyperParams, weights: LossWeights, seed: u64, rank_by: RankBy) -> Result<TrialOutcome> {
        let (model, report) = self.fit(params, weights, seed)?;
        let val_mae = self.mean_mae(&model, &self.validation)?;
        let mae = match rank_by {
            RankBy::Holdout => self.mean_mae(&model, &self.holdout)?,
            RankBy::Validation => val_mae,
        };
        Ok(TrialOutcome { model, report, mae, val_mae })
    }
}

/// A prepared scenario paired with the ranking split.
pub struct ScenarioEvaluator<'a> {
    pub scenario: &'a PreparedScenario,
    pub rank_by: RankBy,
}

impl Evaluator for ScenarioEvaluator<'_> {
    fn evaluate(&self, params: &HyperParams, weights: LossWeights, seed: u64) -> Result<TrialOutcome> {
        self.scenario.run_trial(params, weights, seed, self.rank_by)
    }
}

/// Best trial of one combination with its model.
#[derive(Debug, Clone)]
pub struct ComboBest {
    pub trial: Trial,
    pub model: Option<MlpModel>,
}

#[derive(Debug, Clone)]
pub struct HpoResult {
    pub best: Trial,
    pub best_model: Option<MlpModel>,
    pub per_combination_best: BTreeMap<WeightKey, ComboBest>,
    pub trial_log: Vec<Trial>,
}

impl HpoResult {
    /// The data-only combination, used as the plain NN baseline.
    pub fn baseline(&self) -> Option<&ComboBest> {
        self.per_combination_best.values().find(|c| c.trial.key.is_data_only())
    }
}

const TPE_DOMAIN: u64 = 0x545045;
const TRIAL_DOMAIN: u64 = 0x5452;

/// Seed of the training run for `(combo, trial)`.
pub fn trial_seed(seed: u64, combo_id: usize, trial_id: usize) -> u64 {
    rng::derive_seed(seed, &[TRIAL_DOMAIN, combo_id as u64, trial_id as u64])
}

fn run_combo(
    combo_id: usize,
    key: WeightKey,
    cfg: &HpoConfig,
    evaluator: &dyn Evaluator,
) -> (Vec<Trial>, Option<MlpModel>) {
    let weights = key.weights();
    let mut trials: Vec<Trial> = Vec::with_capacity(cfg.trials_per_combo);
    let mut best_model: Option<(f64, MlpModel)> = None;
    for trial_id in 0..cfg.trials_per_combo {
        let tpe_seed = rng::derive_seed(cfg.seed, &[TPE_DOMAIN, combo_id as u64, trial_id as u64]);
        let params = tpe_suggest(&trials, &cfg.ranges, &cfg.tpe, tpe_seed);
        let seed = trial_seed(cfg.seed, combo_id, trial_id);
        let start = Instant::now();
        let outcome = evaluator.evaluate(&params, weights, seed);
        let wall_time_s = start.elapsed().as_secs_f64();
        let mut trial = Trial {
            combo_id,
            trial_id,
            key,
            weights,
            params,
            seed,
            mae: f64::INFINITY,
            val_mae: f64::INFINITY,
            wall_time_s,
            failed: true,
            report: None,
        };
        match outcome {
            Ok(o) if o.mae.is_finite() => {
                trial.mae = o.mae;
                trial.val_mae = o.val_mae;
                trial.failed = false;
                trial.report = Some(o.report);
                if best_model.as_ref().is_none_or(|(m, _)| o.mae < *m) {
                    best_model = Some((o.mae, o.model));
                }
            }
            Ok(_) => log::warn!("trial {combo_id}/{trial_id} produced a non-finite MAE"),
            Err(e) => log::warn!("trial {combo_id}/{trial_id} failed: {e}"),
        }
        trials.push(trial);
    }
    (trials, best_model.map(|(_, m)| m))
}

fn best_of(trials: &[Trial]) -> Option<&Trial> {
    trials.iter().fold(None, |best: Option<&Trial>, t| match best {
        Some(b) if b.mae <= t.mae => Some(b),
        _ => Some(t),
    })
}

/// Runs `trials_per_combo` TPE trials for every weight triple. Combinations
/// run in parallel; the result does not depend on scheduling.
pub fn optimize(cfg: &HpoConfig, evaluator: &dyn Evaluator) -> Result<HpoResult> {
    if cfg.trials_per_combo == 0 {
        return Err(Error::contract("trials per combination must be at least 1"));
    }
    cfg.ranges.validate()?;
    let keys = enumerate_weight_keys(cfg.step)?;
    let runs: Vec<(Vec<Trial>, Option<MlpModel>)> = keys
        .par_iter()
        .enumerate()
        .map(|(i, &k)| run_combo(i, k, cfg, evaluator))
        .collect();
    let mut per_combination_best = BTreeMap::new();
    let mut trial_log = Vec::new();
    for (trials, model) in runs {
        let best = best_of(&trials).expect("non-empty").clone();
        per_combination_best.insert(best.key, ComboBest { trial: best, model });
        trial_log.extend(trials);
    }
    let best = best_of(&trial_log).expect("non-empty").clone();
    let best_model = per_combination_best[&best.key].model.clone();
    Ok(HpoResult {
        best,
        best_model,
        per_combination_best,
        trial_log,
    })
}

/// Re-runs a logged trial; returns the recomputed ranking MAE.
pub fn replay(trial: &Trial, evaluator: &dyn Evaluator) -> Result<f64> {
    Ok(evaluator.evaluate(&trial.params, trial.weights, trial.seed)?.mae)
}

pub const TRIAL_LOG_HEADER: &str = "combo_id,trial_id,lambda_d,lambda_p,lambda_c,layers,neurons,lr,batch,mae,wall_time_s";

/// Writes the trial log as CSV; `with_timing = false` blanks wall times so
/// that repeated runs compare byte for byte.
pub fn write_trial_log<W: Write>(trials: &[Trial], mut w: W, with_timing: bool) -> Result<()> {
    writeln!(w, "{TRIAL_LOG_HEADER}")?;
    for t in trials {
        let time = if with_timing { format!("{}", t.wall_time_s) } else { String::new() };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            t.combo_id,
            t.trial_id,
            t.weights.lambda_d,
            t.weights.lambda_p,
            t.weights.lambda_c,
            t.params.layers,
            t.params.neurons,
            t.params.learning_rate,
            t.params.batch_size,
            t.mae,
            time
        )?;
    }
    Ok(())
}
