//! The `lppl` command line: each run executes one command, writes its
//! results under the output directory and finishes with `manifest.json`.

pub mod config;
mod manifest;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lppl_core::lppl::{curve, write_curve_csv};
use lppl_core::sensitivity::{scan_parameter_reoptimized, write_scan_csv};
use lppl_core::{
    descriptive_stats, find_crash_peaks, fit_bubble, generate, load_csv, log_returns,
    make_bubble_window, plan_bubbles, read_overrides, scan_parameter, BubbleFitReport,
    BubbleWindow, CrashEvent, GeneratorSpec, NelderMeadOptions, PriceSeries, Scale, ScanSpec,
    StartOverride, StatsReport,
};
use serde::Serialize;

pub use config::{Args, Command, RunConfig};
pub use manifest::{read_manifest, Manifest};

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    /// 1 usage or configuration, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        self.code
    }
}

impl From<lppl_core::Error> for CliError {
    fn from(e: lppl_core::Error) -> Self {
        use lppl_core::Error as E;
        let code = match &e {
            E::Usage(_) | E::Config(_) | E::Io(_) => 1,
            E::Data(_)
            | E::Csv(_)
            | E::Degenerate(_)
            | E::Domain(_)
            | E::Collinear { .. }
            | E::WindowTooShort { .. }
            | E::Generation { .. } => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("output: {e}"))
    }
}

/// Files written by a run, relative to its output directory.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::internal(format!("serialising {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_with<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(BufWriter<fs::File>) -> lppl_core::Result<()>,
    {
        let file = fs::File::create(self.dir.join(name))?;
        write(BufWriter::new(file))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs `config.command`, then writes the manifest.
pub fn execute(config: &RunConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::create(&config.out)?;
    match config.command {
        Command::Stats => cmd_stats(config, &mut out).map(drop)?,
        Command::Detect => cmd_detect(config, &mut out).map(drop)?,
        Command::Fit => cmd_fit(config, &mut out).map(drop)?,
        Command::Scan => cmd_scan(config, &mut out).map(drop)?,
        Command::Generate => cmd_generate(config, &mut out).map(drop)?,
    }
    manifest::write_manifest(config, &mut out)?;
    Ok(out)
}

fn input_path(config: &RunConfig) -> Result<&Path, CliError> {
    let path = config
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage("--input is required"))?;
    if !path.is_file() {
        return Err(CliError::usage(format!("input file {} not found", path.display())));
    }
    Ok(path)
}

pub fn load_series(config: &RunConfig) -> Result<PriceSeries, CliError> {
    let ingested = load_csv(input_path(config)?, &config.date_column, &config.value_column)?;
    if ingested.weekend_rows_dropped > 0 {
        eprintln!("dropped {} weekend rows", ingested.weekend_rows_dropped);
    }
    Ok(ingested.series)
}

fn load_overrides(config: &RunConfig) -> Result<Vec<StartOverride>, CliError> {
    match &config.overrides {
        None => Ok(Vec::new()),
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| {
                CliError::usage(format!("override file {}: {e}", path.display()))
            })?;
            Ok(read_overrides(file)?)
        }
    }
}

/// Writes `stats.json`.
pub fn cmd_stats(config: &RunConfig, out: &mut Outputs) -> Result<StatsReport, CliError> {
    let series = load_series(config)?;
    let stats = descriptive_stats(&log_returns(&series)?)?;
    out.write_json("stats.json", &stats)?;
    Ok(stats)
}

/// One detected crash and the bubble window before it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleSummary {
    pub peak_date: NaiveDate,
    pub trough_date: Option<NaiveDate>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub observations: Option<usize>,
    pub override_applied: bool,
    /// Why the bubble is not fitted.
    pub skipped: Option<String>,
}

struct Bubble {
    summary: BubbleSummary,
    window: Option<BubbleWindow>,
}

fn summarize(peak_date: NaiveDate, trough: Option<NaiveDate>, window: Result<BubbleWindow, CliError>) -> Bubble {
    match window {
        Ok(w) => Bubble {
            summary: BubbleSummary {
                peak_date,
                trough_date: trough,
                start_date: Some(w.start_date),
                end_date: Some(w.end_date),
                observations: Some(w.len()),
                override_applied: w.override_applied,
                skipped: None,
            },
            window: Some(w),
        },
        Err(e) => Bubble {
            summary: BubbleSummary {
                peak_date,
                trough_date: trough,
                start_date: None,
                end_date: None,
                observations: None,
                override_applied: false,
                skipped: Some(e.to_string()),
            },
            window: None,
        },
    }
}

fn detect(config: &RunConfig, series: &PriceSeries) -> Result<(Vec<CrashEvent>, Vec<Bubble>), CliError> {
    let events = find_crash_peaks(series, &config.crash)?;
    let overrides = load_overrides(config)?;
    let bubbles = plan_bubbles(series, &events, &config.crash, &overrides)?
        .into_iter()
        .map(|p| summarize(p.event.peak_date, Some(p.trough), p.window.map_err(CliError::from)))
        .collect();
    Ok((events, bubbles))
}

/// Writes `crashes.json` and `bubbles.json`.
pub fn cmd_detect(
    config: &RunConfig,
    out: &mut Outputs,
) -> Result<(Vec<CrashEvent>, Vec<BubbleSummary>), CliError> {
    let series = load_series(config)?;
    let (events, bubbles) = detect(config, &series)?;
    let summaries: Vec<BubbleSummary> = bubbles.into_iter().map(|b| b.summary).collect();
    out.write_json("crashes.json", &events)?;
    out.write_json("bubbles.json", &summaries)?;
    Ok((events, summaries))
}

fn bubbles_to_fit(config: &RunConfig, series: &PriceSeries) -> Result<Vec<Bubble>, CliError> {
    match config.window {
        Some((start, end)) => {
            let window = make_bubble_window(series, start, end, &config.crash, None)?;
            Ok(vec![summarize(window.end_date, None, Ok(window))])
        }
        None => Ok(detect(config, series)?.1),
    }
}

/// A bubble and, when it could be fitted, its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    #[serde(flatten)]
    pub bubble: BubbleSummary,
    /// Report file name.
    pub report: Option<String>,
    #[serde(skip)]
    pub fit: Option<BubbleFitReport>,
    #[serde(skip)]
    pub window: Option<BubbleWindow>,
}

fn fit_all(config: &RunConfig, out: &mut Outputs) -> Result<Vec<FitOutcome>, CliError> {
    let series = load_series(config)?;
    let options = config.fit_options();
    let mut outcomes = Vec::new();
    for bubble in bubbles_to_fit(config, &series)? {
        let mut summary = bubble.summary;
        let Some(window) = bubble.window else {
            eprintln!("{}: skipped: {}", summary.peak_date, summary.skipped.as_deref().unwrap_or(""));
            outcomes.push(FitOutcome { bubble: summary, report: None, fit: None, window: None });
            continue;
        };
        let tag = window.end_date.format("%Y-%m-%d").to_string();
        match fit_bubble(&window, &config.bounds, config.scale, &options) {
            Ok(report) => {
                let name = format!("fit_{tag}.json");
                out.write_json(&name, &report)?;
                if let Some(best) = report.best() {
                    let fitted = match report.scale_used {
                        Scale::Raw => window.clone(),
                        Scale::Log => window.to_log()?,
                    };
                    let points = curve(&best.fit.params, &fitted)?;
                    out.write_with(&format!("curve_{tag}.csv"), |w| write_curve_csv(&points, w))?;
                }
                outcomes.push(FitOutcome {
                    bubble: summary,
                    report: Some(name),
                    fit: Some(report),
                    window: Some(window),
                });
            }
            Err(e) => {
                // A bubble the model cannot be fitted to is reported, not fatal.
                let e = CliError::from(e);
                if e.exit_code() != 2 {
                    return Err(e);
                }
                eprintln!("{tag}: not fitted: {e}");
                summary.skipped = Some(e.to_string());
                outcomes.push(FitOutcome { bubble: summary, report: None, fit: None, window: Some(window) });
            }
        }
    }
    Ok(outcomes)
}

/// Writes `fit_<end>.json` and `curve_<end>.csv` per fitted bubble and
/// `fits.json` listing every bubble, fitted or skipped.
pub fn cmd_fit(config: &RunConfig, out: &mut Outputs) -> Result<Vec<FitOutcome>, CliError> {
    let outcomes = fit_all(config, out)?;
    out.write_json("fits.json", &outcomes)?;
    Ok(outcomes)
}

/// Fits as [`cmd_fit`], then writes `scan_<end>_<param>.csv` around each
/// best fit.
pub fn cmd_scan(config: &RunConfig, out: &mut Outputs) -> Result<Vec<FitOutcome>, CliError> {
    let outcomes = cmd_fit(config, out)?;
    for outcome in &outcomes {
        let (Some(report), Some(window)) = (&outcome.fit, &outcome.window) else { continue };
        let Some(best) = report.best() else { continue };
        let tag = window.end_date.format("%Y-%m-%d");
        for &param in &config.scan_params {
            let spec = ScanSpec { steps: config.scan_steps, ..ScanSpec::around(&best.fit, param) };
            let points = if config.reoptimize {
                scan_parameter_reoptimized(&best.fit, window, &spec, &NelderMeadOptions::default())?
            } else {
                scan_parameter(&best.fit, window, &spec)?
            };
            out.write_with(&format!("scan_{tag}_{}.csv", param.name()), |w| {
                write_scan_csv(param, &points, w)
            })?;
        }
    }
    Ok(outcomes)
}

/// Reads a generator spec (JSON) from `--input` and writes `synthetic.csv`.
pub fn cmd_generate(config: &RunConfig, out: &mut Outputs) -> Result<PriceSeries, CliError> {
    let path = input_path(config)?;
    let text = fs::read_to_string(path)?;
    let mut spec: GeneratorSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("generator spec {}: {e}", path.display())))?;
    if let Some(seed) = config.rng_seed {
        spec.rng_seed = seed;
    }
    let series = generate(&spec)?;
    out.write_with("synthetic.csv", |w| series.write_csv(w))?;
    Ok(series)
}
