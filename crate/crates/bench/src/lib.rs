//! Fixtures shared by the benchmarks.

use chrono::NaiveDate;
use lppl_core::{generate, BubbleWindow, GeneratorSpec, LpplParams, PriceSeries, Scale};

pub fn bubble_params() -> LpplParams {
    LpplParams {
        a: 2000.0,
        b: -100.0,
        c: 0.15,
        beta: 0.33,
        omega: 6.36,
        t2c: 30.0,
        phi: 1.0,
        anchor_date: NaiveDate::from_ymd_opt(2007, 10, 30).expect("valid date"),
        scale: Scale::Raw,
    }
}

/// A noisy LPPL window of `n` weekdays.
pub fn bubble_window(n: usize) -> BubbleWindow {
    let series = generate(&GeneratorSpec {
        params: bubble_params(),
        n_weekdays: n,
        noise_sigma: 10.0,
        rng_seed: 42,
    })
    .expect("fixture parameters keep the series positive");
    BubbleWindow::whole(&series).expect("fixture window is non-empty")
}

/// Forty years of a sawtooth index: slow rallies ended by 30% falls.
pub fn long_index() -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
    let dates: Vec<NaiveDate> = start
        .iter_days()
        .filter(|d| lppl_core::series::is_weekday(*d))
        .take(10_400)
        .collect();
    let values: Vec<f64> = (0..dates.len())
        .map(|i| {
            let phase = i % 900;
            let level = 100.0 * (1.0 + i as f64 / 2000.0);
            if phase < 850 {
                level * (1.0 + phase as f64 / 850.0)
            } else {
                level * 1.4
            }
        })
        .collect();
    PriceSeries::from_pairs("sawtooth", Scale::Raw, &dates, &values).expect("valid fixture")
}
