//! Benchmark and ablation harness for the attention cores in `lbla-core`.
//!
//! [`run_bench`] times the per-head attention cores over a sweep of sequence
//! lengths, [`fit_slope`] turns the medians into a log-log scaling exponent,
//! and [`run_ablation`] checks which structural property each ablated
//! variant of LBLA loses.

mod ablation;
mod bench;
mod csv_io;
mod error;
mod slope;

pub use ablation::{run_ablation, AblationArm, AblationConfig, AblationReport, ArmReport, Property, PropertyCheck};
pub use bench::{
    run_bench, BenchOutcome, BenchRecord, BenchSpec, Precision, SkippedCell,
    DEFAULT_LENGTHS,
};
pub use csv_io::{emit_csv, read_csv, read_records, write_records, CSV_HEADER};
pub use error::{BenchError, Result};
pub use slope::{fit_slope, fit_slope_points};
