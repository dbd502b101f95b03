//! Crash detection and Log Periodic Power Law (LPPL) fitting for daily
//! price-index series.
//!
//! The pipeline is: load a series ([`series`]), find crash-initiating peaks
//! and the bubble windows before them ([`crashes`]), fit the LPPL to each
//! window ([`fitter`], built on the model in [`lppl`]) and probe the fits
//! ([`sensitivity`]). [`synthetic`] generates LPPL paths with known
//! parameters for testing.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod crashes;
pub mod error;
pub mod fitter;
pub mod lppl;
pub mod sensitivity;
pub mod series;
pub mod synthetic;

pub use crashes::{
    find_crash_peaks, find_trough, make_bubble_window, plan_bubbles, read_overrides,
    BubblePlan, BubbleWindow, CrashConfig, CrashEvent, StartOverride,
};
pub use error::{Error, Result};
pub use fitter::{
    classify_fit, fit_bubble, nelder_mead, recursive_seed_search, BubbleFitReport,
    Classification, FitOptions, FitResult, NelderMeadOptions, NelderMeadResult, ParamBounds,
    PrecursorRanges, RankedFit, ScaleChoice, SearchBounds,
};
pub use lppl::{
    hazard_rate, integrated_hazard, linear_solve, lppl_value, monotonicity_check,
    raw_index_validity, rmse, FitDiagnostics, HazardParams, LinearSolution, LpplParams,
    Monotonicity, NonlinearParams, Validity, WindowData,
};
pub use sensitivity::{scan_parameter, ScanParam, ScanPoint, ScanSpec};
pub use series::{
    descriptive_stats, load_csv, log_returns, read_csv, Ingested, Observation, PriceSeries,
    ReturnSeries, Scale, StatsReport,
};
pub use synthetic::{generate, GeneratorSpec};
