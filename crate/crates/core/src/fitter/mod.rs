//! Searching the non-linear LPPL parameters and classifying the fits.
//!
//! Only `(beta, omega, t2c, phi)` are searched; `(A, B, C)` always come
//! from the linear sub-solve. Seeds are chosen by recursively splitting the
//! seed box in the `(beta, omega)` plane around each simplex run, and every
//! simplex solution is kept, canonicalised, de-duplicated and ranked by RMSE.

pub mod nelder_mead;
mod search;

use std::f64::consts::PI;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::crashes::BubbleWindow;
use crate::error::{Error, Result};
use crate::lppl::{
    monotonicity_check, raw_index_validity, FitDiagnostics, LpplParams, Validity, WindowData,
};
use crate::series::Scale;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use search::{explore_seeds, ExploredSeed, Objective};

/// Seed range for one parameter. `min_width` is set only for the
/// parameters whose range is split recursively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: f64,
    pub upper: f64,
    pub min_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub beta: ParamBounds,
    pub omega: ParamBounds,
    pub t2c: ParamBounds,
    pub phi: ParamBounds,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            beta: ParamBounds {
                lower: 0.0,
                upper: 2.0,
                min_width: Some(0.2),
            },
            omega: ParamBounds {
                lower: 0.0,
                upper: 20.0,
                min_width: Some(2.0),
            },
            t2c: ParamBounds {
                lower: 1.0,
                upper: 260.0,
                min_width: None,
            },
            phi: ParamBounds {
                lower: 0.0,
                upper: PI,
                min_width: None,
            },
        }
    }
}

pub const PARAM_NAMES: [&str; 4] = ["beta", "omega", "t2c", "phi"];

impl SearchBounds {
    pub fn as_array(&self) -> [ParamBounds; 4] {
        [self.beta, self.omega, self.t2c, self.phi]
    }

    pub fn lower(&self) -> [f64; 4] {
        self.as_array().map(|b| b.lower)
    }

    pub fn upper(&self) -> [f64; 4] {
        self.as_array().map(|b| b.upper)
    }

    pub fn min_widths(&self) -> [Option<f64>; 4] {
        self.as_array().map(|b| b.min_width)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in PARAM_NAMES.iter().zip(self.as_array()) {
            if !(b.lower < b.upper) || !b.lower.is_finite() || !b.upper.is_finite() {
                return Err(Error::Config(format!(
                    "{name} bounds [{}, {}] are not an interval",
                    b.lower, b.upper
                )));
            }
            if let Some(w) = b.min_width {
                if !(w > 0.0) {
                    return Err(Error::Config(format!("{name} minimum width must be positive")));
                }
            }
        }
        if self.beta.lower < 0.0 {
            return Err(Error::Config("beta bounds must be non-negative".into()));
        }
        if self.t2c.lower < 1.0 {
            return Err(Error::Config("t2c bounds must start at one day or later".into()));
        }
        Ok(())
    }
}

/// Parameter ranges that mark a fit as a crash precursor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecursorRanges {
    pub beta_range: [f64; 2],
    pub omega_range: [f64; 2],
}

impl Default for PrecursorRanges {
    fn default() -> Self {
        Self {
            beta_range: [0.15, 0.51],
            omega_range: [4.80, 7.92],
        }
    }
}

impl PrecursorRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("beta", self.beta_range), ("omega", self.omega_range)] {
            if !(r[0] <= r[1]) {
                return Err(Error::Config(format!("{name} precursor range is empty")));
            }
        }
        Ok(())
    }

    fn contains(range: [f64; 2], v: f64) -> bool {
        range[0] <= v && v <= range[1]
    }

    /// Within 5% of a range's width outside it: reported as a warning but
    /// never reclassified.
    fn near(range: [f64; 2], v: f64) -> bool {
        let margin = 0.05 * (range[1] - range[0]);
        range[0] - margin <= v && v <= range[1] + margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Precursor,
    NotPrecursor,
    RejectedBetaGe1,
}

pub fn classify_fit(result: &FitResult, ranges: &PrecursorRanges) -> Classification {
    classify_params(&result.params, ranges)
}

pub fn classify_params(params: &LpplParams, ranges: &PrecursorRanges) -> Classification {
    if params.beta >= 1.0 {
        Classification::RejectedBetaGe1
    } else if PrecursorRanges::contains(ranges.beta_range, params.beta)
        && PrecursorRanges::contains(ranges.omega_range, params.omega)
    {
        Classification::Precursor
    } else {
        Classification::NotPrecursor
    }
}

/// True for a non-precursor with `beta < 1` whose `beta` and `omega` both
/// sit inside the ranges widened by 5% of their width.
pub fn boundary_warning(params: &LpplParams, ranges: &PrecursorRanges) -> bool {
    classify_params(params, ranges) == Classification::NotPrecursor
        && PrecursorRanges::near(ranges.beta_range, params.beta)
        && PrecursorRanges::near(ranges.omega_range, params.omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Simplex settings. `x_tol` applies to parameters divided by their
    /// seed-range width; `f_tol` is relative to the standard deviation of
    /// the fitted values.
    pub nelder_mead: NelderMeadOptions,
    /// Lower limit on `beta` during the search; `None` only requires
    /// `beta > 0`.
    pub beta_floor: Option<f64>,
    pub ranges: PrecursorRanges,
    /// Number of ranked fits kept in a bubble report.
    pub max_reported: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadOptions::default(),
            beta_floor: None,
            ranges: PrecursorRanges::default(),
            max_reported: 20,
        }
    }
}

/// The `beta >= 0.01` floor applied in paper mode.
pub const PAPER_BETA_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LpplParams,
    pub diagnostics: FitDiagnostics,
    /// `(beta, omega, t2c, phi)` the simplex started from.
    pub seed_used: [f64; 4],
    pub function_evaluations: usize,
    pub converged: bool,
    /// The linear sub-solve found `B = 0` and reported `C = 0`.
    pub linear_degenerate: bool,
}

/// Raw-level validity of a window on either scale.
fn window_validity(window: &BubbleWindow) -> Result<Validity> {
    match window.scale() {
        Scale::Raw => raw_index_validity(window),
        Scale::Log => {
            let s = &window.series_slice;
            let (Some(first), Some(last)) = (s.first(), s.last()) else {
                return Err(Error::Usage("empty window".into()));
            };
            let ratio = (last.value - first.value).exp();
            Ok(Validity {
                ratio,
                raw_fit_valid: ratio <= crate::lppl::MAX_RAW_RATIO,
            })
        }
    }
}

pub const MIN_FIT_OBSERVATIONS: usize = 10;

/// Runs the recursive seed search on `window` and returns every distinct
/// simplex solution, best RMSE first.
///
/// Solutions are canonicalised, then two are duplicates when they differ
/// by less than `(1e-3, 1e-3, 0.5 day, 1e-3)` in `(beta, omega, t2c, phi)`,
/// with `phi` compared modulo `pi`. Ties in RMSE are broken by comparing
/// `(beta, omega, t2c, phi)` lexicographically.
pub fn recursive_seed_search(
    window: &BubbleWindow,
    bounds: &SearchBounds,
    options: &FitOptions,
) -> Result<Vec<FitResult>> {
    let (results, _) = search_window(window, bounds, options)?;
    Ok(results)
}

fn search_window(
    window: &BubbleWindow,
    bounds: &SearchBounds,
    options: &FitOptions,
) -> Result<(Vec<FitResult>, usize)> {
    bounds.validate()?;
    options.ranges.validate()?;
    if window.len() < MIN_FIT_OBSERVATIONS {
        return Err(Error::Usage(format!(
            "a 7-parameter fit needs at least {MIN_FIT_OBSERVATIONS} observations, window has {}",
            window.len()
        )));
    }
    let data = WindowData::new(window)?;
    let objective = Objective::new(&data, bounds, options.beta_floor);
    let nm = scaled_options(&options.nelder_mead, &data);
    let explored = explore_seeds(&objective, bounds, &nm);
    let seeds = explored.len();
    let solutions = dedupe(canonical_solutions(&objective, &explored));
    let results = solutions
        .into_iter()
        .map(|s| finish(window, s, &options.ranges))
        .collect::<Result<Vec<_>>>()?;
    Ok((results, seeds))
}

fn scaled_options(nm: &NelderMeadOptions, data: &WindowData) -> NelderMeadOptions {
    let spread = data.y_spread();
    NelderMeadOptions {
        f_tol: nm.f_tol * if spread > 0.0 { spread } else { 1.0 },
        ..*nm
    }
}

#[derive(Debug, Clone)]
struct Solution {
    params: LpplParams,
    rmse: f64,
    seed: [f64; 4],
    evaluations: usize,
    converged: bool,
    degenerate: bool,
}

fn key(p: &LpplParams) -> [f64; 4] {
    [p.beta, p.omega, p.t2c, p.phi]
}

fn rank_order(a: &Solution, b: &Solution) -> std::cmp::Ordering {
    a.rmse.total_cmp(&b.rmse).then_with(|| {
        key(&a.params)
            .iter()
            .zip(key(&b.params).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn canonical_solutions(objective: &Objective, explored: &[ExploredSeed]) -> Vec<Solution> {
    explored
        .iter()
        .filter_map(|e| {
            // Re-solved at the canonical point so scans reproduce the RMSE exactly.
            let (params, _) = objective.solve(e.solution).ok()?;
            let (params, linear) = objective.solve(params.canonical().nonlinear()).ok()?;
            let rmse = objective.data().rmse(&params).ok()?;
            rmse.is_finite().then_some(Solution {
                params,
                rmse,
                seed: e.seed.to_array(),
                evaluations: e.evaluations,
                converged: e.converged,
                degenerate: linear.degenerate,
            })
        })
        .collect()
}

const DEDUPE_TOL: [f64; 4] = [1e-3, 1e-3, 0.5, 1e-3];

fn same_solution(a: &LpplParams, b: &LpplParams) -> bool {
    let (ka, kb) = (key(a), key(b));
    (0..3).all(|i| (ka[i] - kb[i]).abs() < DEDUPE_TOL[i]) && {
        let d = (ka[3] - kb[3]).rem_euclid(PI);
        d.min(PI - d) < DEDUPE_TOL[3]
    }
}

fn dedupe(mut solutions: Vec<Solution>) -> Vec<Solution> {
    solutions.sort_by(rank_order);
    let mut kept: Vec<Solution> = Vec::new();
    for s in solutions {
        if !kept.iter().any(|k| same_solution(&k.params, &s.params)) {
            kept.push(s);
        }
    }
    kept
}

fn finish(window: &BubbleWindow, s: Solution, ranges: &PrecursorRanges) -> Result<FitResult> {
    let validity = window_validity(window)?;
    let monotone = monotonicity_check(&s.params, window)?;
    Ok(FitResult {
        diagnostics: FitDiagnostics {
            rmse: s.rmse,
            is_precursor: classify_params(&s.params, ranges) == Classification::Precursor,
            monotone_increasing: monotone.monotone_increasing,
            violation_dates: monotone.violation_dates,
            validity_ratio: validity.ratio,
            raw_fit_valid: validity.raw_fit_valid,
        },
        params: s.params,
        seed_used: s.seed,
        function_evaluations: s.evaluations,
        converged: s.converged,
        linear_degenerate: s.degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleChoice {
    Raw,
    Log,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFit {
    /// Position in the full ranked list, 1-based.
    pub rank: usize,
    pub classification: Classification,
    pub boundary_warning: bool,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleFitReport {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub observations: usize,
    pub override_applied: bool,
    pub validity_ratio: f64,
    pub raw_fit_valid: bool,
    pub scale_choice: ScaleChoice,
    pub scale_used: Scale,
    pub seeds_explored: usize,
    pub distinct_solutions: usize,
    /// The best `max_reported` fits.
    pub fits: Vec<RankedFit>,
    /// Best fit with `beta < 1`, when the overall best has `beta >= 1`.
    pub best_not_rejected: Option<RankedFit>,
    /// Best precursor, when the overall best is not one.
    pub best_precursor: Option<RankedFit>,
    /// Re-optimised with `beta >= 0.01` when the best unconstrained fit
    /// went below that.
    pub constrained_best: Option<RankedFit>,
}

impl BubbleFitReport {
    pub fn best(&self) -> Option<&RankedFit> {
        self.fits.first()
    }
}

/// Fits one bubble window and attaches classification and diagnostics.
///
/// With [`ScaleChoice::Auto`] the log of the index is fitted when the
/// window more than doubles, the raw index otherwise.
pub fn fit_bubble(
    window: &BubbleWindow,
    bounds: &SearchBounds,
    scale_choice: ScaleChoice,
    options: &FitOptions,
) -> Result<BubbleFitReport> {
    if window.scale() != Scale::Raw {
        return Err(Error::Usage("fit_bubble expects a raw-scale window".into()));
    }
    let validity = raw_index_validity(window)?;
    let scale_used = match scale_choice {
        ScaleChoice::Raw => Scale::Raw,
        ScaleChoice::Log => Scale::Log,
        ScaleChoice::Auto if validity.raw_fit_valid => Scale::Raw,
        ScaleChoice::Auto => Scale::Log,
    };
    let fitted = match scale_used {
        Scale::Raw => window.clone(),
        Scale::Log => window.to_log()?,
    };
    let (results, seeds_explored) = search_window(&fitted, bounds, options)?;
    let ranges = &options.ranges;
    let ranked: Vec<RankedFit> = results
        .into_iter()
        .enumerate()
        .map(|(i, fit)| RankedFit {
            rank: i + 1,
            classification: classify_fit(&fit, ranges),
            boundary_warning: boundary_warning(&fit.params, ranges),
            fit,
        })
        .collect();

    let best_class = ranked.first().map(|r| r.classification);
    let best_not_rejected = (best_class == Some(Classification::RejectedBetaGe1))
        .then(|| {
            ranked
                .iter()
                .find(|r| r.classification != Classification::RejectedBetaGe1)
                .cloned()
        })
        .flatten();
    let best_precursor = (best_class.is_some() && best_class != Some(Classification::Precursor))
        .then(|| {
            ranked
                .iter()
                .find(|r| r.classification == Classification::Precursor)
                .cloned()
        })
        .flatten();

    let constrained_best = match (options.beta_floor, ranked.first()) {
        (None, Some(best)) if best.fit.params.beta < PAPER_BETA_FLOOR => {
            constrained_refit(&fitted, bounds, options, &best.fit)?
        }
        _ => None,
    };

    Ok(BubbleFitReport {
        start_date: window.start_date,
        end_date: window.end_date,
        observations: window.len(),
        override_applied: window.override_applied,
        validity_ratio: validity.ratio,
        raw_fit_valid: validity.raw_fit_valid,
        scale_choice,
        scale_used,
        seeds_explored,
        distinct_solutions: ranked.len(),
        fits: ranked.iter().take(options.max_reported.max(1)).cloned().collect(),
        best_not_rejected,
        best_precursor,
        constrained_best,
    })
}

fn constrained_refit(
    window: &BubbleWindow,
    bounds: &SearchBounds,
    options: &FitOptions,
    best: &FitResult,
) -> Result<Option<RankedFit>> {
    let data = WindowData::new(window)?;
    let objective = Objective::new(&data, bounds, Some(PAPER_BETA_FLOOR));
    let nm = scaled_options(&options.nelder_mead, &data);
    let mut seed = best.params.nonlinear();
    seed.beta = PAPER_BETA_FLOOR;
    let Ok(explored) = objective.run_simplex(seed, &nm) else {
        return Ok(None);
    };
    let Some(solution) = canonical_solutions(&objective, &[explored]).pop() else {
        return Ok(None);
    };
    let fit = finish(window, solution, &options.ranges)?;
    Ok(Some(RankedFit {
        rank: 0,
        classification: classify_fit(&fit, &options.ranges),
        boundary_warning: boundary_warning(&fit.params, &options.ranges),
        fit,
    }))
}
