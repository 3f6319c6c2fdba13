//! A scenario prepared for training: normalised splits, the physics context
//! and the constants, plus the single code path that builds, trains and
//! scores an estimator for given hyperparameters and loss weights.

use crate::error::{Error, Result};
use crate::grid::{build_ybus, GridCase};
use crate::neural::{glorot_init, train, MlpModel, TrainConfig, TrainReport};
use crate::pinn::{CompositeLoss, ConstantsSpec, LossWeights, PhysicsContext};
use crate::rng;
use crate::scenario::{preprocess, Dataset, NormMeta, NormalizedData, ScenarioData, Split};
use serde::{Deserialize, Serialize};

/// Architecture and optimiser settings chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Hidden-layer count.
    pub layers: usize,
    pub neurons: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl HyperParams {
    /// `[2N, neurons × layers, 2N]`.
    pub fn layer_dims(&self, n_buses: usize) -> Vec<usize> {
        let mut dims = vec![2 * n_buses];
        dims.extend(std::iter::repeat_n(self.neurons, self.layers));
        dims.push(2 * n_buses);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub max_epochs: usize,
    pub patience: usize,
    /// `true` uses the conjugated admittance matrix in the physics term.
    pub conjugate: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            patience: 20,
            conjugate: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub n_buses: usize,
    pub meta: NormMeta,
    pub train: NormalizedData,
    pub validation: NormalizedData,
    /// Unseen subset of the training recipe.
    pub holdout: NormalizedData,
    pub test: NormalizedData,
    pub test_clean: NormalizedData,
    pub ctx: PhysicsContext,
    pub constants: ConstantsSpec,
    pub settings: FitSettings,
}

const INIT_DOMAIN: u64 = 0x494e;

impl PreparedScenario {
    /// Fits normalisation on the training split and applies it everywhere.
    pub fn new(case: &GridCase, data: &ScenarioData, steady_state: bool, settings: FitSettings) -> Result<Self> {
        let (train, meta) = preprocess(&data.train, Split::Train, None)?;
        let apply = |ds: &Dataset| preprocess(ds, Split::Test, Some(&meta)).map(|r| r.0);
        let y = build_ybus(case)?;
        Ok(Self {
            n_buses: case.n_buses(),
            validation: apply(&data.validation)?,
            holdout: apply(&data.holdout)?,
            test: apply(&data.test)?,
            test_clean: apply(&data.test_clean)?,
            ctx: PhysicsContext::new(&y, meta.clone(), settings.conjugate)?,
            constants: ConstantsSpec::from_case(case, steady_state),
            meta,
            train,
            settings,
        })
    }

    pub fn objective(&self, weights: LossWeights) -> Result<CompositeLoss> {
        CompositeLoss::new(weights, self.ctx.clone(), self.constants.clone())
    }

    /// Builds a Glorot-initialised model and trains it. Initialisation and
    /// batch order both derive from `seed`.
    pub fn fit(&self, params: &HyperParams, weights: LossWeights, seed: u64) -> Result<(MlpModel, TrainReport)> {
        let model = glorot_init(&params.layer_dims(self.n_buses), rng::derive_seed(seed, &[INIT_DOMAIN]))?;
        let cfg = TrainConfig {
            learning_rate: params.learning_rate,
            batch_size: params.batch_size,
            max_epochs: self.settings.max_epochs,
            patience: self.settings.patience,
            seed,
        };
        train(model, &self.train, &self.validation, &cfg, &self.objective(weights)?)
    }

    /// Per-sample MAE in physical units: mean of |Δvm| (p.u.) and |Δva|
    /// (rad) over the stacked 2N vector.
    pub fn mae_per_point(&self, model: &MlpModel, data: &NormalizedData) -> Result<Vec<f64>> {
        Ok(self.abs_errors(model, data)?.into_iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect())
    }

    /// Physical absolute errors, one `2N` row per sample.
    pub fn abs_errors(&self, model: &MlpModel, data: &NormalizedData) -> Result<Vec<Vec<f64>>> {
        if data.targets.ncols() != 2 * self.n_buses {
            return Err(Error::contract("dataset does not match the prepared scenario"));
        }
        let out = model.forward(data.inputs.view())?;
        Ok(out
            .rows()
            .into_iter()
            .zip(data.targets.rows())
            .map(|(o, t)| {
                let est = self.meta.denormalize_targets(&o.to_vec());
                let tru = self.meta.denormalize_targets(&t.to_vec());
                est.vm
                    .iter()
                    .zip(&tru.vm)
                    .chain(est.va.iter().zip(&tru.va))
                    .map(|(a, b)| (a - b).abs())
                    .collect()
            })
            .collect())
    }

    pub fn mean_mae(&self, model: &MlpModel, data: &NormalizedData) -> Result<f64> {
        let per_point = self.mae_per_point(model, data)?;
        Ok(per_point.iter().sum::<f64>() / per_point.len().max(1) as f64)
    }
}
