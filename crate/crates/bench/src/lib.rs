//! Experiment harness: scenario bundles, MAE reports, cost measurement and
//! SVG plots on top of `gridpinn-core`.

mod config;
mod costs;
mod error;
mod evaluate;
pub mod files;
mod plot;
mod run;

pub use config::{ExperimentConfig, FixedRun, HpoSettings};
pub use costs::{measure_costs, measure_inference, CostReport};
pub use error::{BenchError, Stage};
pub use evaluate::{evaluate, MaeReport, Spread};
pub use plot::{render_plots, simplex_heatmap_svg, line_chart_svg, Series};
pub use run::{load_or_generate, prepare, run_scenario, BundleSummary, ModelOutcome, SeedOutcome};
