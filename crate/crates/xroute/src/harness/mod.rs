//! Instance generation, configuration, experiments and metric emission.

mod config;
mod experiment;
mod generators;
mod instances;

pub use config::{profile, ConfigError, ExperimentConfig, Pattern, Task, Tier};
pub use experiment::{bench_suite, run_experiment, Check, ExperimentError, MetricsRecord};
pub use generators::{barbell, generate, gnp, hypercube, margulis_torus, random_regular, ring_of_cliques, spread_ids, star, wheel, Family, GenError};
pub use instances::{route_tokens, routing_requests, sort_tokens};
