#![allow(dead_code)]

use chrono::NaiveDate;
use lppl_core::{generate, BubbleWindow, GeneratorSpec, LpplParams, PriceSeries, Scale};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// A precursor-like bubble with a visible oscillation.
pub fn bubble_params() -> LpplParams {
    LpplParams {
        a: 1000.0,
        b: -100.0,
        c: 0.15,
        beta: 0.33,
        omega: 6.36,
        t2c: 30.0,
        phi: 1.0,
        anchor_date: date(2007, 10, 30),
        scale: Scale::Raw,
    }
}

pub fn synthetic(params: LpplParams, n: usize, sigma: f64, seed: u64) -> PriceSeries {
    generate(&GeneratorSpec {
        params,
        n_weekdays: n,
        noise_sigma: sigma,
        rng_seed: seed,
    })
    .unwrap()
}

pub fn window(series: &PriceSeries) -> BubbleWindow {
    BubbleWindow::whole(series).unwrap()
}

/// Consecutive weekdays starting on `start`.
pub fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| lppl_core::series::is_weekday(*d))
        .take(n)
        .collect()
}

pub fn series_of(values: &[f64]) -> PriceSeries {
    let dates = weekdays_from(date(1990, 1, 1), values.len());
    PriceSeries::from_pairs("test", Scale::Raw, &dates, values).unwrap()
}
