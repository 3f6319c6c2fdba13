use crate::config::ExperimentConfig;
use crate::costs::{measure_inference, CostReport};
use crate::error::{BenchError, Stage, StageExt};
use crate::evaluate::{evaluate, MaeReport, Spread};
use crate::files::write_atomic;
use gridpinn_core::estimator::{HyperParams, PreparedScenario};
use gridpinn_core::grid::GridCase;
use gridpinn_core::hpo::{optimize, write_trial_log, HpoResult, ScenarioEvaluator};
use gridpinn_core::neural::{MlpModel, TrainReport};
use gridpinn_core::pinn::LossWeights;
use gridpinn_core::scenario::{
    build_scenario_data, read_dataset_csv, resolve_case, write_dataset_csv, Dataset, ScenarioData, ScenarioSpec,
};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

const SPLITS: [&str; 5] = ["train", "validation", "holdout", "test", "test_clean"];

fn spec_hash(spec: &ScenarioSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serialises");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
}

fn split_of<'a>(data: &'a ScenarioData, name: &str) -> &'a Dataset {
    match name {
        "train" => &data.train,
        "validation" => &data.validation,
        "holdout" => &data.holdout,
        "test" => &data.test,
        _ => &data.test_clean,
    }
}

fn read_cached(dir: &Path, case_ref: &str) -> Option<ScenarioData> {
    let mut sets = Vec::with_capacity(SPLITS.len());
    for name in SPLITS {
        let file = std::fs::File::open(dir.join(format!("{name}.csv"))).ok()?;
        sets.push(read_dataset_csv(file, case_ref).ok()?);
    }
    let mut it = sets.into_iter();
    Some(ScenarioData {
        train: it.next()?,
        validation: it.next()?,
        holdout: it.next()?,
        test: it.next()?,
        test_clean: it.next()?,
    })
}

/// Datasets of `spec`, read from `cache_root/<hash>` when present and
/// generated (then cached) otherwise. The hash covers the whole spec,
/// seed included.
pub fn load_or_generate(spec: &ScenarioSpec, case: &GridCase, cache_root: Option<&Path>) -> Result<ScenarioData, BenchError> {
    let dir = cache_root.map(|r| r.join(spec_hash(spec)));
    if let Some(d) = &dir {
        if let Some(data) = read_cached(d, &spec.case) {
            log::debug!("dataset cache hit {}", d.display());
            return Ok(data);
        }
    }
    let data = build_scenario_data(spec, case).stage(Stage::Generation)?;
    if let Some(d) = &dir {
        for name in SPLITS {
            let mut buf = Vec::new();
            write_dataset_csv(split_of(&data, name), &mut buf).stage(Stage::Output)?;
            write_atomic(&d.join(format!("{name}.csv")), &buf).stage(Stage::Output)?;
        }
        write_atomic(&d.join("spec.toml"), spec.to_toml().as_bytes()).stage(Stage::Output)?;
    }
    Ok(data)
}

/// Spec, case and prepared splits of one seed.
pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<(ScenarioSpec, PreparedScenario), BenchError> {
    let spec = cfg.spec_for_seed(seed)?;
    let case = resolve_case(&spec).map_err(BenchError::config)?;
    spec.validate(&case).map_err(BenchError::config)?;
    let data = load_or_generate(&spec, &case, Some(&cfg.output_dir.join("cache")))?;
    let prepared =
        PreparedScenario::new(&case, &data, spec.is_steady_state(), cfg.fit).stage(Stage::Generation)?;
    Ok((spec, prepared))
}

/// A trained estimator and its scores.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub label: &'static str,
    pub weights: LossWeights,
    pub params: HyperParams,
    pub seed: u64,
    pub model: MlpModel,
    pub train_report: TrainReport,
    pub holdout: MaeReport,
    pub test: MaeReport,
    /// Test set before the attack; present for attacked scenarios.
    pub test_clean: Option<MaeReport>,
    /// Per-point error at the attacked bus on the attacked test set.
    pub attacked_bus_series: Option<Vec<f64>>,
    pub costs: CostReport,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub pinn: ModelOutcome,
    pub nn: ModelOutcome,
    pub hpo: Option<HpoResult>,
}

#[derive(Debug, Clone)]
pub struct BundleSummary {
    pub scenario: String,
    pub case: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

impl BundleSummary {
    fn spread(&self, f: impl Fn(&SeedOutcome) -> Option<f64>) -> Option<Spread> {
        Spread::of(&self.seeds.iter().filter_map(f).collect::<Vec<_>>())
    }

    pub fn pinn_test(&self) -> Option<Spread> {
        self.spread(|s| Some(s.pinn.test.mean_mae))
    }

    pub fn nn_test(&self) -> Option<Spread> {
        self.spread(|s| Some(s.nn.test.mean_mae))
    }

    /// (summary metric, model, values) rows written to `summary.csv`.
    fn metrics(&self) -> Vec<(&'static str, &'static str, Vec<f64>)> {
        let mut rows = Vec::new();
        type Getter = fn(&ModelOutcome) -> Option<f64>;
        let getters: [(&str, Getter); 5] = [
            ("holdout_mae", |m| Some(m.holdout.mean_mae)),
            ("test_mae", |m| Some(m.test.mean_mae)),
            ("test_clean_mae", |m| m.test_clean.as_ref().map(|r| r.mean_mae)),
            ("attacked_bus_mae", |m| m.test.attacked_bus_mae),
            ("attack_degradation", |m| m.test_clean.as_ref().map(|c| m.test.mean_mae - c.mean_mae)),
        ];
        for (metric, get) in getters {
            for model in ["PINN", "NN"] {
                let values: Vec<f64> = self
                    .seeds
                    .iter()
                    .filter_map(|s| get(if model == "PINN" { &s.pinn } else { &s.nn }))
                    .collect();
                if !values.is_empty() {
                    rows.push((metric, model, values));
                }
            }
        }
        rows
    }
}

fn score(
    label: &'static str,
    prepared: &PreparedScenario,
    attacked_bus: Option<usize>,
    weights: LossWeights,
    params: HyperParams,
    seed: u64,
    model: MlpModel,
    train_report: TrainReport,
    reps: usize,
) -> Result<ModelOutcome, BenchError> {
    let holdout = evaluate(prepared, &model, &prepared.holdout, None).stage(Stage::Training)?;
    let mut test = evaluate(prepared, &model, &prepared.test, attacked_bus).stage(Stage::Training)?;
    let (test_clean, attacked_bus_series) = match attacked_bus {
        Some(bus) => {
            let clean = evaluate(prepared, &model, &prepared.test_clean, Some(bus)).stage(Stage::Training)?;
            let n = prepared.n_buses;
            let rows = prepared.abs_errors(&model, &prepared.test).stage(Stage::Training)?;
            let series = rows.iter().map(|r| 0.5 * (r[bus - 1] + r[n + bus - 1])).collect();
            (Some(clean), Some(series))
        }
        None => (None, None),
    };
    let (mean, std) = measure_inference(&model, &prepared.test, reps).stage(Stage::Training)?;
    let costs = CostReport {
        training_s: train_report.wall_time_s,
        inference_ms_mean: mean,
        inference_ms_std: std,
        reps,
    };
    test.training_time_s = costs.training_s;
    test.inference_time_ms = costs.inference_ms_mean;
    Ok(ModelOutcome {
        label,
        weights,
        params,
        seed,
        model,
        train_report,
        holdout,
        test,
        test_clean,
        attacked_bus_series,
        costs,
    })
}

/// Trains PINN and NN for one seed. With HPO the PINN is the best
/// combination other than (1, 0, 0) and the NN is the best (1, 0, 0) trial.
fn train_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    prepared: &PreparedScenario,
    attacked_bus: Option<usize>,
) -> Result<(ModelOutcome, ModelOutcome, Option<HpoResult>), BenchError> {
    let reps = cfg.inference_reps;
    if let Some(hpo_cfg) = cfg.hpo_config(seed) {
        let evaluator = ScenarioEvaluator {
            scenario: prepared,
            rank_by: hpo_cfg.rank_by,
        };
        let result = optimize(&hpo_cfg, &evaluator).stage(Stage::Training)?;
        let pick = |data_only: bool| {
            result
                .per_combination_best
                .values()
                .filter(|c| c.trial.key.is_data_only() == data_only && !c.trial.failed)
                .fold(None, |best: Option<&gridpinn_core::hpo::ComboBest>, c| match best {
                    Some(b) if b.trial.mae <= c.trial.mae => Some(b),
                    _ => Some(c),
                })
        };
        let mut outcomes = Vec::new();
        for (label, data_only) in [("PINN", false), ("NN", true)] {
            let c = pick(data_only)
                .ok_or_else(|| BenchError::new(Stage::Training, format!("every {label} trial failed")))?;
            let t = &c.trial;
            let model = c.model.clone().expect("successful trial keeps its model");
            let report = t.report.clone().expect("successful trial keeps its report");
            outcomes.push(score(label, prepared, attacked_bus, t.weights, t.params, t.seed, model, report, reps)?);
        }
        let nn = outcomes.pop().expect("two outcomes");
        let pinn = outcomes.pop().expect("two outcomes");
        return Ok((pinn, nn, Some(result)));
    }
    let fixed = cfg.fixed.as_ref().ok_or_else(|| BenchError::config("no [hpo] or [fixed] section"))?;
    let mut outcomes = Vec::new();
    for (label, weights) in [("PINN", fixed.weights), ("NN", LossWeights::DATA_ONLY)] {
        let start = Instant::now();
        let (model, mut report) = prepared.fit(&fixed.params, weights, seed).stage(Stage::Training)?;
        report.wall_time_s = start.elapsed().as_secs_f64();
        outcomes.push(score(label, prepared, attacked_bus, weights, fixed.params, seed, model, report, reps)?);
    }
    let nn = outcomes.pop().expect("two outcomes");
    let pinn = outcomes.pop().expect("two outcomes");
    Ok((pinn, nn, None))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn epoch_rows(out: &mut String, label: &str, w: LossWeights, report: &TrainReport) {
    for (e, (loss, val)) in report.epoch_losses.iter().zip(&report.epoch_val_mae).enumerate() {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{},{val}",
            w.lambda_d,
            w.lambda_p,
            w.lambda_c,
            e + 1,
            loss.total
        );
    }
}

fn write_seed_bundle(dir: &Path, pinn: &ModelOutcome, nn: &ModelOutcome, hpo: Option<&HpoResult>) -> Result<(), BenchError> {
    let put = |name: &str, text: &str| write_atomic(&dir.join(name), text.as_bytes()).stage(Stage::Output);
    let attacked = pinn.test_clean.is_some();

    let mut epochs = String::from("label,lambda_d,lambda_p,lambda_c,epoch,train_loss,val_mae\n");
    let mut heat = String::from("lambda_d,lambda_p,lambda_c,mae\n");
    match hpo {
        Some(result) => {
            let mut log = Vec::new();
            write_trial_log(&result.trial_log, &mut log, true).stage(Stage::Output)?;
            write_atomic(&dir.join("trial_log.csv"), &log).stage(Stage::Output)?;
            for c in result.per_combination_best.values() {
                let w = c.trial.weights;
                let label = format!("({:.3} {:.3} {:.3})", w.lambda_d, w.lambda_p, w.lambda_c);
                if let Some(r) = &c.trial.report {
                    epoch_rows(&mut epochs, &label, w, r);
                }
                let _ = writeln!(heat, "{},{},{},{}", w.lambda_d, w.lambda_p, w.lambda_c, c.trial.mae);
            }
        }
        None => {
            for m in [pinn, nn] {
                epoch_rows(&mut epochs, m.label, m.weights, &m.train_report);
                let w = m.weights;
                let _ = writeln!(heat, "{},{},{},{}", w.lambda_d, w.lambda_p, w.lambda_c, m.holdout.mean_mae);
            }
        }
    }
    put("mae_per_epoch.csv", &epochs)?;
    put("lambda_heatmap.csv", &heat)?;

    let mut holdout = String::from("point,pinn,nn\n");
    for (i, (a, b)) in pinn.holdout.per_test_point_mae.iter().zip(&nn.holdout.per_test_point_mae).enumerate() {
        let _ = writeln!(holdout, "{},{a},{b}", i + 1);
    }
    put("holdout_series.csv", &holdout)?;

    let mut test = String::from(if attacked {
        "point,pinn,nn,pinn_bus,nn_bus,pinn_clean,nn_clean\n"
    } else {
        "point,pinn,nn\n"
    });
    for i in 0..pinn.test.per_test_point_mae.len() {
        let _ = write!(test, "{},{},{}", i + 1, pinn.test.per_test_point_mae[i], nn.test.per_test_point_mae[i]);
        if let (Some(pb), Some(nb), Some(pc), Some(nc)) =
            (&pinn.attacked_bus_series, &nn.attacked_bus_series, &pinn.test_clean, &nn.test_clean)
        {
            let _ = write!(test, ",{},{},{},{}", pb[i], nb[i], pc.per_test_point_mae[i], nc.per_test_point_mae[i]);
        }
        test.push('\n');
    }
    put("test_series.csv", &test)?;

    let mut per_bus = String::from("bus,pinn_test,nn_test,pinn_holdout,nn_holdout\n");
    for i in 0..pinn.test.per_bus_mae.len() {
        let _ = writeln!(
            per_bus,
            "{},{},{},{},{}",
            i + 1,
            pinn.test.per_bus_mae[i],
            nn.test.per_bus_mae[i],
            pinn.holdout.per_bus_mae[i],
            nn.holdout.per_bus_mae[i]
        );
    }
    put("per_bus.csv", &per_bus)?;

    let mut report = String::from(
        "model,lambda_d,lambda_p,lambda_c,layers,neurons,lr,batch,train_seed,epochs,best_epoch,holdout_mae,test_mae,\
         test_clean_mae,attacked_bus_mae,normalized_test_mae,training_time_s,inference_time_ms\n",
    );
    for m in [pinn, nn] {
        let _ = writeln!(
            report,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.label,
            m.weights.lambda_d,
            m.weights.lambda_p,
            m.weights.lambda_c,
            m.params.layers,
            m.params.neurons,
            m.params.learning_rate,
            m.params.batch_size,
            m.seed,
            m.train_report.epochs_run(),
            m.train_report.best_epoch,
            m.holdout.mean_mae,
            m.test.mean_mae,
            fmt_opt(m.test_clean.as_ref().map(|r| r.mean_mae)),
            fmt_opt(m.test.attacked_bus_mae),
            m.test.normalized_mae,
            m.costs.training_s,
            m.costs.inference_ms_mean
        );
    }
    put("report.csv", &report)?;
    put("pinn.model", &pinn.model.to_text())?;
    put("nn.model", &nn.model.to_text())?;
    Ok(())
}

fn write_summary(summary: &BundleSummary) -> Result<(), BenchError> {
    let mut text = String::from("metric,model,median,min,max,seeds\n");
    for (metric, model, values) in summary.metrics() {
        let s = Spread::of(&values).expect("non-empty");
        let _ = writeln!(text, "{metric},{model},{},{},{},{}", s.median, s.min, s.max, values.len());
    }
    write_atomic(&summary.output_dir.join("summary.csv"), text.as_bytes()).stage(Stage::Output)?;

    let mut costs = String::from("case,seed,model,training_s,inference_ms_mean,inference_ms_std,reps\n");
    for s in &summary.seeds {
        for m in [&s.pinn, &s.nn] {
            let c = m.costs;
            let _ = writeln!(
                costs,
                "{},{},{},{},{},{},{}",
                summary.case, s.seed, m.label, c.training_s, c.inference_ms_mean, c.inference_ms_std, c.reps
            );
        }
    }
    write_atomic(&summary.output_dir.join("costs.csv"), costs.as_bytes()).stage(Stage::Output)
}

/// Runs every seed of the experiment and writes the bundle below
/// `output_dir`. With `dry_run` only the configuration is checked and
/// `Ok(None)` is returned. Artifacts of finished seeds stay on disk when a
/// later seed fails.
pub fn run_scenario(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<BundleSummary>, BenchError> {
    cfg.validate()?;
    let first = cfg.spec_for_seed(cfg.seeds[0])?;
    let case = resolve_case(&first).map_err(BenchError::config)?;
    first.validate(&case).map_err(BenchError::config)?;
    if dry_run {
        return Ok(None);
    }
    let mut summary = BundleSummary {
        scenario: first.index.clone(),
        case: first.case.clone(),
        output_dir: cfg.output_dir.clone(),
        seeds: Vec::new(),
    };
    for &seed in &cfg.seeds {
        let (spec, prepared) = prepare(cfg, seed)?;
        let attacked_bus = spec.attack.as_ref().map(|a| a.target_bus);
        let (pinn, nn, hpo) = train_seed(cfg, seed, &prepared, attacked_bus)?;
        let dir = cfg.output_dir.join(format!("seed_{seed}"));
        write_seed_bundle(&dir, &pinn, &nn, hpo.as_ref())?;
        log::info!(
            "{} seed {seed}: PINN test MAE {:.4e}, NN test MAE {:.4e}",
            spec.index,
            pinn.test.mean_mae,
            nn.test.mean_mae
        );
        summary.seeds.push(SeedOutcome { seed, dir, pinn, nn, hpo });
    }
    write_summary(&summary)?;
    Ok(Some(summary))
}
