//! Command-line flags and the resolved run configuration.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Parser, ValueEnum};
use lppl_core::fitter::PAPER_BETA_FLOOR;
use lppl_core::series::parse_date;
use lppl_core::{
    CrashConfig, FitOptions, ParamBounds, PrecursorRanges, ScaleChoice, ScanParam, SearchBounds,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Stats,
    Detect,
    Fit,
    Scan,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Raw,
    Log,
    Auto,
}

/// Crash detection and LPPL bubble fitting for daily index series.
#[derive(Debug, Clone, Parser)]
#[command(name = "lppl", version)]
pub struct Args {
    /// Price CSV (stats, detect, fit, scan) or generator spec JSON (generate).
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub command: Option<Command>,

    /// Weekdays a peak must dominate.
    #[arg(long, default_value_t = 262)]
    pub lookback: usize,

    /// Fraction of the peak the index must fall to.
    #[arg(long, default_value_t = 0.75)]
    pub drop_to: f64,

    /// Weekdays allowed for the fall.
    #[arg(long, default_value_t = 60)]
    pub drop_window: usize,

    /// Shortest bubble window that is fitted, in weekdays.
    #[arg(long, default_value_t = 131)]
    pub min_bubble: usize,

    /// CSV of `peak_date,bubble_start_date` rows.
    #[arg(long)]
    pub overrides: Option<PathBuf>,

    /// Defaults to `raw` with --paper-mode and `auto` otherwise.
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,

    /// Search with beta >= 0.01 and fit the raw index.
    #[arg(long)]
    pub paper_mode: bool,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Seed box overrides, e.g. `beta=0:2:0.2,t2c=1:100`
    /// (`name=lower:upper[:min_width]`).
    #[arg(long)]
    pub seed_bounds: Option<String>,

    /// Inclusive precursor range for beta, `low,high`.
    #[arg(long)]
    pub precursor_beta: Option<String>,

    /// Inclusive precursor range for omega, `low,high`.
    #[arg(long)]
    pub precursor_omega: Option<String>,

    /// Parameter to scan, or `all`.
    #[arg(long, default_value = "all")]
    pub scan_param: String,

    /// Samples per scan (odd).
    #[arg(long, default_value_t = lppl_core::sensitivity::DEFAULT_SCAN_STEPS)]
    pub scan_steps: usize,

    /// Overrides the seed in the generator spec.
    #[arg(long)]
    pub rng_seed: Option<u64>,

    /// Re-optimise the other non-linear parameters at each scan sample.
    #[arg(long)]
    pub reoptimize: bool,

    #[arg(long, default_value = "date")]
    pub date_column: String,

    #[arg(long, default_value = "value")]
    pub value_column: String,

    /// Fit one explicit window `START,END` instead of the detected bubbles.
    #[arg(long)]
    pub window: Option<String>,

    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "command")]
    pub replay: Option<PathBuf>,
}

/// Everything a run depends on, as recorded in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub date_column: String,
    pub value_column: String,
    pub crash: CrashConfig,
    pub overrides: Option<PathBuf>,
    pub window: Option<(NaiveDate, NaiveDate)>,
    pub bounds: SearchBounds,
    pub ranges: PrecursorRanges,
    pub scale: ScaleChoice,
    pub paper_mode: bool,
    pub scan_params: Vec<ScanParam>,
    pub scan_steps: usize,
    pub reoptimize: bool,
    pub rng_seed: Option<u64>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let command = args
            .command
            .ok_or_else(|| CliError::usage("one of --command or --replay is required"))?;
        let crash = CrashConfig {
            lookback_weekdays: args.lookback,
            drop_to_fraction: args.drop_to,
            drop_window_weekdays: args.drop_window,
            min_bubble_weekdays: args.min_bubble,
        };
        let mut ranges = PrecursorRanges::default();
        if let Some(text) = &args.precursor_beta {
            ranges.beta_range = parse_pair("--precursor-beta", text)?;
        }
        if let Some(text) = &args.precursor_omega {
            ranges.omega_range = parse_pair("--precursor-omega", text)?;
        }
        let scale = match (args.scale, args.paper_mode) {
            (Some(ScaleArg::Raw), _) | (None, true) => ScaleChoice::Raw,
            (Some(ScaleArg::Log), _) => ScaleChoice::Log,
            (Some(ScaleArg::Auto), _) | (None, false) => ScaleChoice::Auto,
        };
        let scan_params = if args.scan_param == "all" {
            ScanParam::ALL.to_vec()
        } else {
            vec![args.scan_param.parse().map_err(CliError::from)?]
        };
        let config = Self {
            command,
            input: args.input.clone(),
            date_column: args.date_column.clone(),
            value_column: args.value_column.clone(),
            crash,
            overrides: args.overrides.clone(),
            window: args.window.as_deref().map(parse_window).transpose()?,
            bounds: parse_bounds(args.seed_bounds.as_deref())?,
            ranges,
            scale,
            paper_mode: args.paper_mode,
            scan_params,
            scan_steps: args.scan_steps,
            reoptimize: args.reoptimize,
            rng_seed: args.rng_seed,
            out: args.out.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.crash.validate()?;
        self.bounds.validate()?;
        self.ranges.validate()?;
        if self.input.is_none() {
            return Err(CliError::usage("--input is required"));
        }
        if let Some((start, end)) = self.window {
            if start >= end {
                return Err(CliError::usage(format!("--window start {start} is not before {end}")));
            }
        }
        if self.command == Command::Scan && (self.scan_steps < 3 || self.scan_steps.is_multiple_of(2)) {
            return Err(CliError::usage("--scan-steps must be odd and at least 3"));
        }
        Ok(())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            beta_floor: self.paper_mode.then_some(PAPER_BETA_FLOOR),
            ranges: self.ranges,
            ..FitOptions::default()
        }
    }
}

fn parse_number(flag: &str, text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| CliError::usage(format!("{flag}: `{text}` is not a number")))
}

fn parse_pair(flag: &str, text: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::usage(format!("{flag} expects `low,high`, got `{text}`")));
    }
    Ok([parse_number(flag, parts[0])?, parse_number(flag, parts[1])?])
}

fn parse_window(text: &str) -> Result<(NaiveDate, NaiveDate), CliError> {
    let date = |s: &str| {
        parse_date(s).ok_or_else(|| CliError::usage(format!("--window: bad date `{s}`")))
    };
    match text.split_once(',') {
        Some((a, b)) => Ok((date(a)?, date(b)?)),
        None => Err(CliError::usage("--window expects `START,END`")),
    }
}

/// Applies `name=lower:upper[:min_width]` overrides to the default box.
pub fn parse_bounds(text: Option<&str>) -> Result<SearchBounds, CliError> {
    let mut bounds = SearchBounds::default();
    let Some(text) = text else { return Ok(bounds) };
    for item in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, spec) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--seed-bounds: `{item}` lacks `=`")))?;
        let slot: &mut ParamBounds = match name.trim() {
            "beta" => &mut bounds.beta,
            "omega" => &mut bounds.omega,
            "t2c" => &mut bounds.t2c,
            "phi" => &mut bounds.phi,
            other => return Err(CliError::usage(format!("--seed-bounds: unknown parameter `{other}`"))),
        };
        let fields: Vec<&str> = spec.split(':').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(CliError::usage(format!(
                "--seed-bounds: `{item}` should be name=lower:upper[:min_width]"
            )));
        }
        slot.lower = parse_number("--seed-bounds", fields[0])?;
        slot.upper = parse_number("--seed-bounds", fields[1])?;
        if let Some(w) = fields.get(2) {
            slot.min_width = Some(parse_number("--seed-bounds", w)?);
        }
    }
    Ok(bounds)
}
