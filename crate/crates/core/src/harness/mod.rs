//! Configuration, seed sweeps, aggregation and CSV output.

pub mod aggregate;
pub mod config;
pub mod csv_io;
pub mod run;

pub use aggregate::{aggregate, aggregate_curves, mean_stderr, Aggregate, AggregateMode};
pub use config::{DeltaSetting, GossipSpec, RunConfig};
pub use run::{build_instance, run_config, run_seed, SeedRun};
