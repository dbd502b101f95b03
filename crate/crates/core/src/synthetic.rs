//! LPPL price paths with known parameters.
//!
//! Noise is additive and Gaussian, drawn in date order from a ChaCha8
//! stream seeded with `rng_seed` (`rand_chacha::ChaCha8Rng::seed_from_u64`,
//! `rand_distr::Normal`), so a seed reproduces a series exactly.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lppl::LpplParams;
use crate::series::{is_weekday, Observation, PriceSeries, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// The series ends on `params.anchor_date`.
    pub params: LpplParams,
    pub n_weekdays: usize,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

/// The `n` weekdays ending on `end`, oldest first.
pub fn weekdays_ending(end: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut day = end;
    while dates.len() < n {
        if is_weekday(day) {
            dates.push(day);
        }
        match day.pred_opt() {
            Some(d) => day = d,
            None => break,
        }
    }
    dates.reverse();
    dates
}

pub fn generate(spec: &GeneratorSpec) -> Result<PriceSeries> {
    let p = &spec.params;
    if spec.n_weekdays < 10 {
        return Err(Error::Usage(format!(
            "generator needs at least 10 weekdays, got {}",
            spec.n_weekdays
        )));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::Usage(format!("noise sigma {} must be >= 0", spec.noise_sigma)));
    }
    if !is_weekday(p.anchor_date) {
        return Err(Error::Usage(format!("anchor date {} is not a weekday", p.anchor_date)));
    }
    if !(p.t2c >= 1.0) || !(p.beta > 0.0) || !(p.omega >= 0.0) {
        return Err(Error::Usage(
            "generator parameters need t2c >= 1, beta > 0 and omega >= 0".into(),
        ));
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::Usage(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut observations = Vec::with_capacity(spec.n_weekdays);
    for date in weekdays_ending(p.anchor_date, spec.n_weekdays) {
        let value = p.value_at(p.days_to_critical(date)) + noise.sample(&mut rng);
        if p.scale == Scale::Raw && !(value > 0.0) {
            return Err(Error::Generation { date, value });
        }
        observations.push(Observation { date, value });
    }
    PriceSeries::new("synthetic", p.scale, observations)
}
