mod common;

use common::{date, series_of};
use lppl_core::{find_crash_peaks, find_trough, plan_bubbles, CrashConfig, CrashEvent, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct restatement of the detection rule with an O(n * lookback) scan.
fn brute_force(values: &[f64], c: &CrashConfig) -> Vec<(usize, usize)> {
    let qualifies = |t: usize| -> Option<usize> {
        if t < c.lookback_weekdays {
            return None;
        }
        if values[t - c.lookback_weekdays..t].iter().any(|&v| v > values[t]) {
            return None;
        }
        let last = (t + c.drop_window_weekdays).min(values.len() - 1);
        (t + 1..=last).find(|&j| values[j] <= c.drop_to_fraction * values[t])
    };
    let mut out = Vec::new();
    let mut t = 0;
    while t < values.len() {
        match qualifies(t) {
            None => t += 1,
            Some(drop) => {
                let mut peak = t;
                for i in t + 1..drop {
                    if values[i] > values[peak] {
                        peak = i;
                    }
                }
                let drop = qualifies(peak).unwrap_or(drop);
                out.push((peak, drop));
                t = drop + 1;
            }
        }
    }
    out
}

fn random_walk(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = 100.0;
    (0..n)
        .map(|_| {
            // Occasional large falls so crashes actually occur.
            let step: f64 = if rng.gen_bool(0.01) { -0.08 } else { rng.gen_range(-0.02..0.022) };
            v *= step.exp();
            v
        })
        .collect()
}

fn small_config() -> CrashConfig {
    CrashConfig {
        lookback_weekdays: 40,
        drop_to_fraction: 0.8,
        drop_window_weekdays: 15,
        min_bubble_weekdays: 20,
    }
}

fn indices(events: &[CrashEvent], s: &lppl_core::PriceSeries) -> Vec<(usize, usize)> {
    events
        .iter()
        .map(|e| {
            (
                s.index_of(e.peak_date).unwrap(),
                s.index_of(e.qualifying_drop_date).unwrap(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detection_matches_brute_force(seed in any::<u64>()) {
        let values = random_walk(seed, 1500);
        let s = series_of(&values);
        let config = small_config();
        let events = find_crash_peaks(&s, &config).unwrap();
        prop_assert_eq!(indices(&events, &s), brute_force(&values, &config));
        for e in &events {
            prop_assert!(e.drop_ratio <= config.drop_to_fraction);
        }
    }

    #[test]
    fn deeper_threshold_never_finds_more(seed in any::<u64>(), lower in 0.5..0.8f64) {
        let s = series_of(&random_walk(seed, 1500));
        let config = small_config();
        let deeper = CrashConfig { drop_to_fraction: lower, ..config };
        let n = find_crash_peaks(&s, &config).unwrap().len();
        prop_assert!(find_crash_peaks(&s, &deeper).unwrap().len() <= n);
    }

    #[test]
    fn trough_is_the_interval_minimum(seed in any::<u64>(), a in 0usize..600, len in 2usize..600) {
        let values = random_walk(seed, 1300);
        let s = series_of(&values);
        let b = a + len;
        let obs = s.observations();
        let t = find_trough(&s, Some(obs[a].date), obs[b].date).unwrap();
        let ti = s.index_of(t).unwrap();
        prop_assert!(a < ti && ti < b);
        prop_assert!(values[a + 1..b].iter().all(|&v| v >= values[ti]));
        prop_assert!(values[a + 1..ti].iter().all(|&v| v > values[ti]));
    }
}

#[test]
fn spike_then_slide_is_one_event() {
    let mut values = vec![100.0; 300];
    values.push(200.0);
    for k in 1..=30 {
        values.push(200.0 - 60.0 * k as f64 / 30.0);
    }
    values.extend(std::iter::repeat_n(140.0, 40));
    let s = series_of(&values);
    let events = find_crash_peaks(&s, &CrashConfig::default()).unwrap();
    assert_eq!(events.len(), 1);
    let e = events[0];
    assert_eq!(s.index_of(e.peak_date), Some(300));
    assert_eq!(e.peak_value, 200.0);
    // 0.75 * 200 = 150 is first reached 25 observations later.
    assert_eq!(s.index_of(e.qualifying_drop_date), Some(325));
    assert!((e.drop_ratio - 0.75).abs() < 1e-12);
    let last = *values.last().unwrap();
    assert!((last / e.peak_value - 0.70).abs() < 1e-12);
}

#[test]
fn monotone_series_has_no_crash() {
    let values: Vec<f64> = (0..600).map(|i| 100.0 + i as f64).collect();
    let s = series_of(&values);
    assert!(find_crash_peaks(&s, &CrashConfig::default()).unwrap().is_empty());
}

#[test]
fn short_series_is_a_usage_error() {
    let s = series_of(&[100.0; 262]);
    assert!(matches!(
        find_crash_peaks(&s, &CrashConfig::default()),
        Err(Error::Usage(_))
    ));
}

#[test]
fn plans_report_short_windows() {
    // Rally, crash to a 20-day plateau, then a 80-day rally and a second
    // crash: the second bubble has only 100 observations.
    let mut values: Vec<f64> = (0..400).map(|i| 100.0 + i as f64).collect();
    values.extend([200.0; 20]);
    values.extend((0..80).map(|i| 520.0 + i as f64));
    values.extend([300.0; 20]);
    let s = series_of(&values);
    let config = CrashConfig {
        lookback_weekdays: 100,
        ..CrashConfig::default()
    };
    let events = find_crash_peaks(&s, &config).unwrap();
    assert_eq!(events.len(), 2);
    let plans = plan_bubbles(&s, &events, &config, &[]).unwrap();
    assert_eq!(plans[0].trough, date(1990, 1, 1));
    assert_eq!(plans[0].window.as_ref().unwrap().len(), 400);
    assert_eq!(s.index_of(plans[1].trough), Some(400));
    assert!(matches!(
        plans[1].window,
        Err(Error::WindowTooShort { observations: 100, required: 131 })
    ));
}
