//! Simulation designs, oracle treatment effects and the experiment runner.

pub mod experiment;
pub mod normal;
pub mod quadrature;
pub mod scenario;

pub use experiment::{run_experiment, test_draw, training_draw, ExperimentConfig, ExperimentResult, MethodSummary};
pub use normal::{norm_cdf, norm_quantile, truncnorm_mean, truncnorm_sample};
pub use scenario::{compliance, expit, Family, ModelVariant, Oracle, SimScenario};
