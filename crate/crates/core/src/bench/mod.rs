//! Benchmark harness: scoring methods against targets, exhaustive
//! two-objective parameter tuning and report output.

mod evaluate;
mod report;
mod synth;
mod tune;

pub use evaluate::{baseline_scores, capped_psnr, evaluate_method, load_pairs, measured_noise_sigma, run_benchmark, ImageFn, Method};
pub use report::{emit_report, BenchmarkReport, ReportFormat, ReportRow, REPORT_COLUMNS};
pub use synth::synthetic_pairs;
pub use tune::{dominates, knee_point, pareto_front, select, tune_params, Candidate, ParamGrid, ParetoSet};
