//! `gridpinn` command line: case checks, dataset generation, training, HPO,
//! evaluation, attack injection, full scenario reports and plots.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridpinn_bench::files::write_atomic;
use gridpinn_bench::{evaluate, prepare, render_plots, run_scenario, BenchError, ExperimentConfig, FixedRun, HpoSettings, Stage};
use gridpinn_core::estimator::HyperParams;
use gridpinn_core::grid::{builtin_case, builtin_case_text, parse_case, parse_cdf, GridCase};
use gridpinn_core::neural::MlpModel;
use gridpinn_core::pinn::LossWeights;
use gridpinn_core::powerflow::solve_nr;
use gridpinn_core::scenario::{build_scenario_data, resolve_case, write_dataset_csv, write_sidecar, preprocess, Split};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gridpinn", version, about = "Physics-informed grid state estimation experiments")]
struct Cli {
    /// Seed for every stochastic stage; replaces the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; replaces the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data generation and HPO.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid case utilities.
    Case {
        #[command(subcommand)]
        action: CaseAction,
    },
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
    /// Train one PINN and the NN baseline with fixed weights and parameters.
    Train(TrainArgs),
    /// Search loss weights and hyperparameters.
    Hpo(HpoArgs),
    /// Score a saved model on a scenario's splits.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Write the clean and attacked test sets of a scenario.
    Attack {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Run the experiment of `--config` end to end and render plots.
    Report {
        /// Validate the configuration without generating anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render SVG charts for every seed bundle below a directory.
    Plot { dir: PathBuf },
}

#[derive(Subcommand)]
enum CaseAction {
    /// Parse a case, solve its base power flow and print a summary.
    Validate {
        /// Bundled case name (`ieee14`, `ieee118`) or case file path.
        case: String,
        /// Read the file as IEEE Common Data Format.
        #[arg(long)]
        cdf: bool,
    },
}

#[derive(Subcommand)]
enum DataAction {
    /// Generate and write the raw splits plus the normalisation sidecar.
    Gen {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
}

#[derive(Args, Clone)]
struct ScenarioArg {
    /// Catalogued scenario such as `S1.1`; otherwise taken from `--config`.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Loss weights `d,p,c`.
    #[arg(long, default_value = "0.5,0.25,0.25")]
    weights: String,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    neurons: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
}

#[derive(Args)]
struct HpoArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Simplex step of the weight grid.
    #[arg(long)]
    step: Option<f64>,
    /// TPE trials per weight combination.
    #[arg(long)]
    trials: Option<usize>,
}

fn load_config(cli: &Cli, scenario: Option<&ScenarioArg>) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::for_scenario("S1.1"),
    };
    if let Some(s) = scenario.and_then(|s| s.scenario.clone()) {
        cfg.scenario = Some(s);
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn load_case(name: &str, cdf: bool) -> Result<GridCase, BenchError> {
    if !cdf && builtin_case_text(name).is_some() {
        return builtin_case(name).map_err(BenchError::config);
    }
    let text = std::fs::read_to_string(name).map_err(|e| BenchError::config(format!("{name}: {e}")))?;
    if cdf { parse_cdf(&text) } else { parse_case(&text) }.map_err(BenchError::config)
}

fn parse_weights(s: &str) -> Result<LossWeights, BenchError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::config(format!("weights `{s}`: {e}")))?;
    let [d, p, c] = v[..] else {
        return Err(BenchError::config("weights need three values d,p,c"));
    };
    let w = LossWeights::new(d, p, c).map_err(BenchError::config)?;
    Ok(w)
}

fn out_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::new(Stage::Output, e)
}

fn print_bundle(summary: &gridpinn_bench::BundleSummary) {
    for s in &summary.seeds {
        println!(
            "seed {}: PINN ({:.3}, {:.3}, {:.3}) test MAE {:.4e} | NN test MAE {:.4e}",
            s.seed,
            s.pinn.weights.lambda_d,
            s.pinn.weights.lambda_p,
            s.pinn.weights.lambda_c,
            s.pinn.test.mean_mae,
            s.nn.test.mean_mae
        );
    }
    if let (Some(p), Some(n)) = (summary.pinn_test(), summary.nn_test()) {
        println!("median test MAE: PINN {:.4e}, NN {:.4e}", p.median, n.median);
    }
    println!("bundle written to {}", summary.output_dir.display());
}

fn plot_tree(dir: &Path) -> Result<usize, BenchError> {
    let mut count = 0;
    let mut seeds = 0;
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::config(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(out_err)?.path();
        if path.is_dir() && path.file_name().is_some_and(|n| n.to_string_lossy().starts_with("seed_")) {
            seeds += 1;
            count += render_plots(&path).map_err(out_err)?.len();
        }
    }
    if seeds == 0 {
        count += render_plots(dir).map_err(out_err)?.len();
    }
    Ok(count)
}

fn execute(cli: &Cli) -> Result<(), BenchError> {
    match &cli.command {
        Command::Case { action: CaseAction::Validate { case, cdf } } => {
            let grid = load_case(case, *cdf)?;
            grid.validate().map_err(BenchError::config)?;
            let sol = solve_nr(&grid, 1e-10, 30).map_err(|e| BenchError::new(Stage::Generation, e))?;
            println!(
                "{}: {} buses, {} branches, converged={} in {} iterations, max mismatch {:.3e} p.u.",
                case,
                grid.n_buses(),
                grid.branches.len(),
                sol.converged,
                sol.iterations,
                sol.max_mismatch
            );
            if !sol.converged {
                return Err(BenchError::new(Stage::Generation, "base power flow did not converge"));
            }
        }
        Command::Data { action: DataAction::Gen { scenario } } => {
            let cfg = load_config(cli, Some(scenario))?;
            for &seed in &cfg.seeds {
                let spec = cfg.spec_for_seed(seed)?;
                let case = resolve_case(&spec).map_err(BenchError::config)?;
                let data = build_scenario_data(&spec, &case).map_err(|e| BenchError::new(Stage::Generation, e))?;
                let dir = cfg.output_dir.join(format!("data_seed_{seed}"));
                for (name, ds) in [
                    ("train", &data.train),
                    ("validation", &data.validation),
                    ("holdout", &data.holdout),
                    ("test", &data.test),
                ] {
                    let mut buf = Vec::new();
                    write_dataset_csv(ds, &mut buf).map_err(out_err)?;
                    write_atomic(&dir.join(format!("{name}.csv")), &buf).map_err(out_err)?;
                }
                let (_, meta) = preprocess(&data.train, Split::Train, None).map_err(|e| BenchError::new(Stage::Generation, e))?;
                write_atomic(&dir.join("meta.txt"), write_sidecar(&meta, Some(&spec)).as_bytes()).map_err(out_err)?;
                println!("{} seed {seed}: {} train samples written to {}", spec.index, data.train.len(), dir.display());
            }
        }
        Command::Train(args) => {
            let mut cfg = load_config(cli, Some(&args.scenario))?;
            if cfg.fixed.is_none() || cli.config.is_none() {
                cfg.hpo = None;
                cfg.fixed = Some(FixedRun {
                    weights: parse_weights(&args.weights)?,
                    params: HyperParams {
                        layers: args.layers,
                        neurons: args.neurons,
                        learning_rate: args.lr,
                        batch_size: args.batch,
                    },
                });
            }
            let summary = run_scenario(&cfg, false)?.expect("not a dry run");
            print_bundle(&summary);
        }
        Command::Hpo(args) => {
            let mut cfg = load_config(cli, Some(&args.scenario))?;
            cfg.fixed = None;
            let mut hpo = cfg.hpo.clone().unwrap_or(HpoSettings {
                step: 0.25,
                trials: 4,
                ranges: Default::default(),
                rank_by: Default::default(),
                tpe: Default::default(),
            });
            if let Some(step) = args.step {
                hpo.step = step;
            }
            if let Some(t) = args.trials {
                hpo.trials = t;
            }
            cfg.hpo = Some(hpo);
            let summary = run_scenario(&cfg, false)?.expect("not a dry run");
            print_bundle(&summary);
        }
        Command::Eval { model, scenario } => {
            let cfg = load_config(cli, Some(scenario))?;
            let text = std::fs::read_to_string(model).map_err(|e| BenchError::config(format!("{}: {e}", model.display())))?;
            let mlp = MlpModel::from_text(&text).map_err(BenchError::config)?;
            let seed = cfg.seeds[0];
            let (spec, prepared) = prepare(&cfg, seed)?;
            let bus = spec.attack.as_ref().map(|a| a.target_bus);
            let train_err = |e| BenchError::new(Stage::Training, e);
            let holdout = evaluate(&prepared, &mlp, &prepared.holdout, None).map_err(train_err)?;
            let test = evaluate(&prepared, &mlp, &prepared.test, bus).map_err(train_err)?;
            println!("{} seed {seed}: holdout MAE {:.4e}, test MAE {:.4e}", spec.index, holdout.mean_mae, test.mean_mae);
            if let (Some(b), Some(m)) = (bus, test.attacked_bus_mae) {
                println!("attacked bus {b} MAE {m:.4e}");
            }
        }
        Command::Attack { scenario } => {
            let cfg = load_config(cli, Some(scenario))?;
            let seed = cfg.seeds[0];
            let spec = cfg.spec_for_seed(seed)?;
            if spec.attack.is_none() {
                return Err(BenchError::config(format!("scenario {} carries no attack", spec.index)));
            }
            let case = resolve_case(&spec).map_err(BenchError::config)?;
            let data = build_scenario_data(&spec, &case).map_err(|e| BenchError::new(Stage::Generation, e))?;
            for (name, ds) in [("test_clean", &data.test_clean), ("test_attacked", &data.test)] {
                let mut buf = Vec::new();
                write_dataset_csv(ds, &mut buf).map_err(out_err)?;
                write_atomic(&cfg.output_dir.join(format!("{name}.csv")), &buf).map_err(out_err)?;
            }
            println!("{}: clean and attacked test sets written to {}", spec.index, cfg.output_dir.display());
        }
        Command::Report { dry_run } => {
            if cli.config.is_none() {
                return Err(BenchError::config("report needs --config"));
            }
            let cfg = load_config(cli, None)?;
            match run_scenario(&cfg, *dry_run)? {
                None => println!("configuration valid; nothing generated"),
                Some(summary) => {
                    print_bundle(&summary);
                    let n = plot_tree(&summary.output_dir)?;
                    println!("{n} charts rendered");
                }
            }
        }
        Command::Plot { dir } => {
            let n = plot_tree(dir)?;
            println!("{n} charts rendered");
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            std::process::exit(Stage::Config.exit_code());
        }
    }
    let result: Result<()> = execute(&cli).map_err(|e| anyhow!(e)).context("gridpinn failed");
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        let code = err.downcast_ref::<BenchError>().map_or(1, |e| e.stage.exit_code());
        std::process::exit(code);
    }
}
