//! Dataset synthesis for training and testing the estimators.
//!
//! Every generator is a deterministic function of its inputs and seed: random
//! draws come from streams keyed by `(seed, domain, sample index)`, so serial
//! and parallel generation give identical datasets.

mod attack;
mod catalog;
mod disturbance;
mod fault;
mod io;
mod noise;
mod preprocess;
mod profile;

pub use attack::{apply_attack, AttackSpec, BiasSegment, Channel};
pub use catalog::{builtin_scenario, BUILTIN_SCENARIOS};
pub use disturbance::gen_disturbance;
pub use fault::gen_fault;
pub use io::{read_dataset_csv, read_sidecar, write_dataset_csv, write_sidecar};
pub use noise::inject_noise;
pub use preprocess::{preprocess, NormMeta, NormalizedData, Split, EPSILON};
pub use profile::{daily_multiplier, gen_daily_profile, DAILY_CURVE};

use crate::error::{Error, Result};
use crate::grid::{build_ybus, AdmittanceMatrix, GridCase};
use crate::powerflow::{injections, solve_nr_with, Injections, StateVector};
use crate::rng;
use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One aligned measurement/state pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Net injections, p.u.
    pub inputs: Injections,
    pub targets: StateVector,
    pub timestamp_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub case_ref: String,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_buses(&self) -> usize {
        self.samples.first().map_or(0, |s| s.targets.len())
    }

    /// Samples at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Dataset {
        Dataset {
            case_ref: self.case_ref.clone(),
            samples: positions.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// How a dataset is produced from the base case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    /// Loads follow a 24-hour curve; `curve` overrides [`DAILY_CURVE`].
    DailyProfile {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curve: Option<Vec<f64>>,
    },
    /// Test-only: an unseen subset of the training-recipe samples.
    HeldOut,
    /// Generator active power ramps to zero; the bus keeps regulating voltage.
    GenShutdown { bus: usize },
    /// Generator active power ramps up by `delta_mw`.
    GenRamp { bus: usize, delta_mw: f64 },
    /// Load changes by `delta_mw`: split equally over `buses` when given,
    /// otherwise spread in proportion to existing load.
    LoadChange {
        delta_mw: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buses: Option<Vec<usize>>,
    },
    /// Self-clearing three-phase fault through `resistance_pu`.
    Fault { bus: usize, resistance_pu: f64 },
}

impl Recipe {
    pub fn is_steady_state(&self) -> bool {
        matches!(self, Recipe::DailyProfile { .. } | Recipe::HeldOut)
    }

    fn check_buses(&self, case: &GridCase) -> Result<()> {
        let mut buses = Vec::new();
        match self {
            Recipe::GenShutdown { bus } | Recipe::GenRamp { bus, .. } | Recipe::Fault { bus, .. } => {
                buses.push(*bus)
            }
            Recipe::LoadChange { buses: Some(b), .. } => buses.extend(b),
            _ => {}
        }
        for b in buses {
            if case.bus(b).is_none() {
                return Err(Error::contract(format!("recipe references missing bus {b}")));
            }
        }
        Ok(())
    }
}

/// Episode layout shared by disturbance and fault trajectories. Position `k`
/// of a dataset maps to step `k % episode_len` of the episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryShape {
    pub episode_len: usize,
    /// First step of a disturbance ramp.
    pub onset: usize,
    /// Steps from pre-event to post-event operating point.
    pub ramp_steps: usize,
    /// First faulted step.
    pub fault_onset: usize,
    /// Faulted steps; a 0.5 s fault maps to 10 steps.
    pub fault_window: usize,
}

impl Default for TrajectoryShape {
    fn default() -> Self {
        Self {
            episode_len: 100,
            onset: 30,
            ramp_steps: 20,
            fault_onset: 45,
            fault_window: 10,
        }
    }
}

impl TrajectoryShape {
    /// Fraction of the disturbance applied at dataset position `k`.
    pub fn ramp_progress(&self, k: usize) -> f64 {
        let pos = k % self.episode_len.max(1);
        if pos < self.onset {
            0.0
        } else if self.ramp_steps == 0 {
            1.0
        } else {
            ((pos - self.onset + 1) as f64 / self.ramp_steps as f64).min(1.0)
        }
    }

    pub fn in_fault(&self, k: usize) -> bool {
        let pos = k % self.episode_len.max(1);
        pos >= self.fault_onset && pos < self.fault_onset + self.fault_window
    }
}

/// Everything a generator needs besides the case and the recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub count: usize,
    /// Standard deviation of the per-bus multiplicative load jitter.
    pub jitter: f64,
    pub seed: u64,
    pub shape: TrajectoryShape,
    pub tol: f64,
    pub max_iter: usize,
}

impl GenerationParams {
    pub fn new(count: usize, jitter: f64, seed: u64) -> Self {
        Self {
            count,
            jitter,
            seed,
            shape: TrajectoryShape::default(),
            tol: 1e-10,
            max_iter: 30,
        }
    }
}

/// RNG stream domains.
pub(crate) mod domain {
    pub const JITTER: u64 = 1;
    pub const NOISE_TRAIN: u64 = 2;
    pub const NOISE_TEST: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const TEST_RECIPE: u64 = 5;
}

/// Produces a dataset for any non-`HeldOut` recipe.
pub fn generate(case: &GridCase, recipe: &Recipe, params: &GenerationParams) -> Result<Dataset> {
    match recipe {
        Recipe::DailyProfile { curve } => gen_daily_profile(case, curve.as_deref(), params),
        Recipe::Fault { .. } => gen_fault(case, recipe, params),
        Recipe::HeldOut => Err(Error::contract("held-out recipe has no generator of its own")),
        _ => gen_disturbance(case, recipe, params),
    }
}

/// Multiplies each bus load by `1 + jitter·z`, z standard normal, drawn from
/// the stream of dataset position `k`.
pub(crate) fn jitter_loads(case: &mut GridCase, jitter: f64, seed: u64, k: usize) {
    if jitter == 0.0 {
        return;
    }
    let mut rng = rng::stream(seed, &[domain::JITTER, k as u64]);
    for bus in &mut case.buses {
        let z: f64 = StandardNormal.sample(&mut rng);
        let factor = 1.0 + jitter * z;
        bus.load_p *= factor;
        bus.load_q *= factor;
    }
}

/// Solves one operating point. `measure_y` is the admittance matrix the
/// injections are measured against (the unfaulted network).
pub(crate) fn solve_sample(
    case: &GridCase,
    solve_y: &AdmittanceMatrix,
    measure_y: &AdmittanceMatrix,
    params: &GenerationParams,
    k: usize,
) -> Result<Sample> {
    let sol = solve_nr_with(case, solve_y, params.tol, params.max_iter).map_err(|e| Error::Generation {
        step: k,
        reason: e.to_string(),
    })?;
    if !sol.converged {
        return Err(Error::Generation {
            step: k,
            reason: format!(
                "power flow did not converge (mismatch {:.3e} after {} iterations)",
                sol.max_mismatch, sol.iterations
            ),
        });
    }
    let inputs = injections(&sol.state, measure_y)?;
    Ok(Sample {
        inputs,
        targets: sol.state,
        timestamp_index: k,
    })
}

/// Runs `build(k)` for every position in parallel and reports the earliest
/// failing step.
pub(crate) fn generate_steps<F>(case: &GridCase, params: &GenerationParams, build: F) -> Result<Dataset>
where
    F: Fn(usize) -> Result<Sample> + Sync,
{
    let results: Vec<Result<Sample>> = (0..params.count).into_par_iter().map(&build).collect();
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        case_ref: case.name.clone(),
        samples,
    })
}

pub(crate) fn base_ybus(case: &GridCase) -> Result<AdmittanceMatrix> {
    build_ybus(case)
}

/// Sample counts per split. The training recipe yields
/// `train + validation + holdout` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleCounts {
    pub train: usize,
    pub validation: usize,
    pub holdout: usize,
    pub test: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            train: 800,
            validation: 200,
            holdout: 100,
            test: 100,
        }
    }
}

fn default_noise() -> f64 {
    0.01
}

fn default_jitter() -> f64 {
    0.02
}

/// Declarative description of one experiment scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub index: String,
    /// Bundled case name or path to a case file.
    pub case: String,
    pub train_recipe: Recipe,
    pub test_recipe: Recipe,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default = "default_noise")]
    pub noise_level: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub shape: TrajectoryShape,
}

impl ScenarioSpec {
    pub fn validate(&self, case: &GridCase) -> Result<()> {
        let c = &self.samples;
        if c.train == 0 || c.validation == 0 || c.test == 0 {
            return Err(Error::contract("sample counts must be positive"));
        }
        if matches!(self.test_recipe, Recipe::HeldOut) && c.holdout == 0 {
            return Err(Error::contract("held-out test recipe needs holdout samples"));
        }
        if matches!(self.train_recipe, Recipe::HeldOut) {
            return Err(Error::contract("training recipe cannot be held-out"));
        }
        if self.noise_level < 0.0 || self.jitter < 0.0 {
            return Err(Error::contract("noise and jitter must be non-negative"));
        }
        self.train_recipe.check_buses(case)?;
        self.test_recipe.check_buses(case)?;
        if let Some(atk) = &self.attack {
            atk.validate(case.n_buses())?;
            let points = if matches!(self.test_recipe, Recipe::HeldOut) { c.holdout } else { c.test };
            if atk.span() > points {
                return Err(Error::contract(format!(
                    "attack schedule spans {} test points, the test set has {points}",
                    atk.span()
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    /// Whether known constants may include PV-bus voltage magnitudes.
    pub fn is_steady_state(&self) -> bool {
        self.train_recipe.is_steady_state()
    }
}

/// Raw (noisy, un-normalised) splits of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub train: Dataset,
    pub validation: Dataset,
    /// Unseen subset of the training-recipe data.
    pub holdout: Dataset,
    /// Scenario test set, attacked when the spec carries an attack.
    pub test: Dataset,
    /// The test set before the attack was applied.
    pub test_clean: Dataset,
}

/// Generates, perturbs and splits the datasets of a scenario. Noise is added
/// before the attack; preprocessing happens later with training statistics.
pub fn build_scenario_data(spec: &ScenarioSpec, case: &GridCase) -> Result<ScenarioData> {
    spec.validate(case)?;
    let c = spec.samples;
    let mut params = GenerationParams::new(c.train + c.validation + c.holdout, spec.jitter, spec.seed);
    params.shape = spec.shape;
    let full = generate(case, &spec.train_recipe, &params)?;
    let full = inject_noise(&full, spec.noise_level, rng::derive_seed(spec.seed, &[domain::NOISE_TRAIN]))?;

    let mut split_rng = rng::stream(spec.seed, &[domain::SPLIT]);
    let mut order: Vec<usize> = sample_indices(&mut split_rng, full.len(), full.len()).into_vec();
    let mut holdout_idx: Vec<usize> = order.drain(..c.holdout).collect();
    let mut val_idx: Vec<usize> = order.drain(..c.validation).collect();
    let mut train_idx = order;
    holdout_idx.sort_unstable();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    let holdout = full.select(&holdout_idx);
    let validation = full.select(&val_idx);
    let train = full.select(&train_idx);

    let test_clean = match &spec.test_recipe {
        Recipe::HeldOut => holdout.clone(),
        recipe => {
            let mut tp = GenerationParams::new(
                c.test,
                spec.jitter,
                rng::derive_seed(spec.seed, &[domain::TEST_RECIPE]),
            );
            tp.shape = spec.shape;
            let raw = generate(case, recipe, &tp)?;
            inject_noise(&raw, spec.noise_level, rng::derive_seed(spec.seed, &[domain::NOISE_TEST]))?
        }
    };
    let test = match &spec.attack {
        Some(atk) => apply_attack(&test_clean, atk)?,
        None => test_clean.clone(),
    };
    Ok(ScenarioData {
        train,
        validation,
        holdout,
        test,
        test_clean,
    })
}

/// Case referenced by a spec: a bundled name, otherwise a case-file path.
pub fn resolve_case(spec: &ScenarioSpec) -> Result<GridCase> {
    if crate::grid::builtin_case_text(&spec.case).is_some() {
        return crate::grid::builtin_case(&spec.case);
    }
    let text = std::fs::read_to_string(&spec.case)?;
    crate::grid::parse_case(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_progress_shape() {
        let s = TrajectoryShape::default();
        assert_eq!(s.ramp_progress(0), 0.0);
        assert_eq!(s.ramp_progress(29), 0.0);
        assert_eq!(s.ramp_progress(30), 0.05);
        assert_eq!(s.ramp_progress(49), 1.0);
        assert_eq!(s.ramp_progress(99), 1.0);
        assert_eq!(s.ramp_progress(100), 0.0);
    }

    #[test]
    fn fault_window_is_ten_steps() {
        let s = TrajectoryShape::default();
        let faulted: Vec<usize> = (0..100).filter(|&k| s.in_fault(k)).collect();
        assert_eq!(faulted, (45..55).collect::<Vec<_>>());
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let case = crate::grid::builtin_case("ieee14").unwrap();
        let mut spec = builtin_scenario("S1.1").unwrap();
        spec.samples = SampleCounts {
            train: 40,
            validation: 10,
            holdout: 5,
            test: 5,
        };
        let data = build_scenario_data(&spec, &case).unwrap();
        assert_eq!(data.train.len(), 40);
        assert_eq!(data.validation.len(), 10);
        assert_eq!(data.holdout.len(), 5);
        assert_eq!(data.test, data.holdout);
        let mut all: Vec<usize> = data
            .train
            .samples
            .iter()
            .chain(&data.validation.samples)
            .chain(&data.holdout.samples)
            .map(|s| s.timestamp_index)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..55).collect::<Vec<_>>());
    }
}
