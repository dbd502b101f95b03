//! Crash-initiating peaks, troughs and the bubble windows between them.
//!
//! All distances are counted in observations (weekdays present in the
//! series), never in calendar days.

use std::collections::VecDeque;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{parse_date, PriceSeries, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashConfig {
    pub lookback_weekdays: usize,
    pub drop_to_fraction: f64,
    pub drop_window_weekdays: usize,
    pub min_bubble_weekdays: usize,
}

impl Default for CrashConfig {
    fn default() -> Self {
        Self {
            lookback_weekdays: 262,
            drop_to_fraction: 0.75,
            drop_window_weekdays: 60,
            min_bubble_weekdays: 131,
        }
    }
}

impl CrashConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_to_fraction > 0.0 && self.drop_to_fraction < 1.0) {
            return Err(Error::Config(format!(
                "drop-to fraction must lie in (0, 1), got {}",
                self.drop_to_fraction
            )));
        }
        if self.lookback_weekdays == 0
            || self.drop_window_weekdays == 0
            || self.min_bubble_weekdays == 0
        {
            return Err(Error::Config("weekday counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashEvent {
    pub peak_date: NaiveDate,
    pub peak_value: f64,
    pub qualifying_drop_date: NaiveDate,
    /// Value on the drop date divided by the peak value.
    pub drop_ratio: f64,
}

/// Flags every index whose value is not exceeded by any of the preceding
/// `lookback` values. Indices with fewer than `lookback` predecessors are
/// never flagged.
fn lookback_maxima(values: &[f64], lookback: usize) -> Vec<bool> {
    let mut flags = vec![false; values.len()];
    // Indices of the preceding window, values decreasing front to back.
    let mut window: VecDeque<usize> = VecDeque::new();
    for t in 0..values.len() {
        if t >= lookback {
            while window.front().is_some_and(|&i| i + lookback < t) {
                window.pop_front();
            }
            let prior_max = window.front().map_or(f64::NEG_INFINITY, |&i| values[i]);
            flags[t] = values[t] >= prior_max;
        }
        while window.back().is_some_and(|&i| values[i] <= values[t]) {
            window.pop_back();
        }
        window.push_back(t);
    }
    flags
}

fn first_drop(values: &[f64], peak: usize, config: &CrashConfig) -> Option<usize> {
    let threshold = config.drop_to_fraction * values[peak];
    let end = (peak + config.drop_window_weekdays).min(values.len() - 1);
    (peak + 1..=end).find(|&j| values[j] <= threshold)
}

/// Detects crash-initiating peaks.
///
/// A weekday qualifies when none of the preceding `lookback_weekdays` values
/// exceeds it and the series falls to `drop_to_fraction` of it within
/// `drop_window_weekdays`. Within one episode the highest qualifying value
/// (earliest on ties) up to the first qualifying drop is reported, and
/// scanning resumes after that peak's drop date.
pub fn find_crash_peaks(series: &PriceSeries, config: &CrashConfig) -> Result<Vec<CrashEvent>> {
    config.validate()?;
    if series.scale() != Scale::Raw {
        return Err(Error::Usage("crash detection needs a raw-scale series".into()));
    }
    if series.len() <= config.lookback_weekdays {
        return Err(Error::Usage(format!(
            "series has {} observations, more than the {}-weekday lookback required",
            series.len(),
            config.lookback_weekdays
        )));
    }
    let values: Vec<f64> = series.values().collect();
    let maxima = lookback_maxima(&values, config.lookback_weekdays);
    let obs = series.observations();

    let mut events = Vec::new();
    let mut t = config.lookback_weekdays;
    while t < values.len() {
        let Some(drop) = maxima[t].then(|| first_drop(&values, t, config)).flatten() else {
            t += 1;
            continue;
        };
        let mut peak = t;
        for i in t + 1..drop {
            if values[i] > values[peak] {
                peak = i;
            }
        }
        // A higher peak inside the same fall also qualifies, with a drop no later.
        let drop = first_drop(&values, peak, config).unwrap_or(drop);
        events.push(CrashEvent {
            peak_date: obs[peak].date,
            peak_value: values[peak],
            qualifying_drop_date: obs[drop].date,
            drop_ratio: values[drop] / values[peak],
        });
        t = drop + 1;
    }
    Ok(events)
}

/// Date of the lowest value strictly after `previous_peak` (or from the
/// start of the series) and strictly before `next_peak`. Ties go to the
/// earliest date.
pub fn find_trough(
    series: &PriceSeries,
    previous_peak: Option<NaiveDate>,
    next_peak: NaiveDate,
) -> Result<NaiveDate> {
    let end = series
        .index_of(next_peak)
        .ok_or_else(|| Error::Usage(format!("peak {next_peak} is not in the series")))?;
    let start = match previous_peak {
        None => 0,
        Some(prev) => {
            let i = series
                .index_of(prev)
                .ok_or_else(|| Error::Usage(format!("peak {prev} is not in the series")))?;
            i + 1
        }
    };
    if start >= end {
        return Err(Error::Usage(format!(
            "no observations between {} and {next_peak}",
            previous_peak.map_or("series start".to_string(), |d| d.to_string())
        )));
    }
    let obs = &series.observations()[start..end];
    let mut best = &obs[0];
    for o in &obs[1..] {
        if o.value < best.value {
            best = o;
        }
    }
    Ok(best.date)
}

/// A contiguous slice of a series, from a trough (or an explicit start) to
/// a crash-initiating peak, selected for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleWindow {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub series_slice: PriceSeries,
    pub override_applied: bool,
}

impl BubbleWindow {
    pub fn len(&self) -> usize {
        self.series_slice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series_slice.is_empty()
    }

    pub fn scale(&self) -> Scale {
        self.series_slice.scale()
    }

    /// Wraps a whole series as a window ending on its last observation.
    pub fn whole(series: &PriceSeries) -> Result<Self> {
        let (Some(first), Some(last)) = (series.first(), series.last()) else {
            return Err(Error::Usage("empty series".into()));
        };
        if first.date >= last.date {
            return Err(Error::Usage("window needs at least two observations".into()));
        }
        Ok(Self {
            start_date: first.date,
            end_date: last.date,
            series_slice: series.clone(),
            override_applied: false,
        })
    }

    /// The same window on the log scale.
    pub fn to_log(&self) -> Result<Self> {
        Ok(Self {
            series_slice: self.series_slice.to_log()?,
            ..self.clone()
        })
    }
}

/// Cuts the window `[override or start, peak]` out of `series`.
///
/// The start snaps forward to the first observation on or after it and the
/// peak back to the last observation on or before it. Windows shorter than
/// `min_bubble_weekdays` are rejected with their observation count.
pub fn make_bubble_window(
    series: &PriceSeries,
    start: NaiveDate,
    peak: NaiveDate,
    config: &CrashConfig,
    start_override: Option<NaiveDate>,
) -> Result<BubbleWindow> {
    if start >= peak {
        return Err(Error::Usage(format!("bubble start {start} is not before peak {peak}")));
    }
    if let Some(o) = start_override {
        if o < start || o >= peak {
            return Err(Error::Usage(format!(
                "override {o} must lie in [{start}, {peak})"
            )));
        }
    }
    let from = start_override.unwrap_or(start);
    let obs = series.observations();
    let lo = obs.partition_point(|o| o.date < from);
    let hi = obs.partition_point(|o| o.date <= peak);
    if lo >= hi {
        return Err(Error::WindowTooShort {
            observations: 0,
            required: config.min_bubble_weekdays,
        });
    }
    let count = hi - lo;
    if count < config.min_bubble_weekdays {
        return Err(Error::WindowTooShort {
            observations: count,
            required: config.min_bubble_weekdays,
        });
    }
    if obs[lo].date >= obs[hi - 1].date {
        return Err(Error::Usage("window needs at least two observations".into()));
    }
    Ok(BubbleWindow {
        start_date: obs[lo].date,
        end_date: obs[hi - 1].date,
        series_slice: series.slice(lo..hi),
        override_applied: start_override.is_some(),
    })
}

/// A manual bubble start for the crash whose peak is `peak_date`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartOverride {
    pub peak_date: NaiveDate,
    pub bubble_start_date: NaiveDate,
}

/// Reads `peak_date,bubble_start_date` rows (header required).
pub fn read_overrides<R: Read>(reader: R) -> Result<Vec<StartOverride>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| {
            let text = record.get(i).unwrap_or("");
            parse_date(text).ok_or_else(|| {
                Error::Config(format!("override row {}: unparseable date `{text}`", row + 1))
            })
        };
        out.push(StartOverride {
            peak_date: field(0)?,
            bubble_start_date: field(1)?,
        });
    }
    Ok(out)
}

/// What happened when building the window for one detected crash.
#[derive(Debug)]
pub struct BubblePlan {
    pub event: CrashEvent,
    pub trough: NaiveDate,
    pub window: Result<BubbleWindow>,
}

/// Troughs and windows for every event, each trough taken after the
/// previous event's peak.
pub fn plan_bubbles(
    series: &PriceSeries,
    events: &[CrashEvent],
    config: &CrashConfig,
    overrides: &[StartOverride],
) -> Result<Vec<BubblePlan>> {
    let mut plans = Vec::with_capacity(events.len());
    let mut previous = None;
    for event in events {
        let trough = find_trough(series, previous, event.peak_date)?;
        let start_override = overrides
            .iter()
            .find(|o| o.peak_date == event.peak_date)
            .map(|o| o.bubble_start_date);
        let window = make_bubble_window(series, trough, event.peak_date, config, start_override);
        plans.push(BubblePlan {
            event: *event,
            trough,
            window,
        });
        previous = Some(event.peak_date);
    }
    Ok(plans)
}
