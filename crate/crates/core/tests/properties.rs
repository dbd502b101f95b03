mod common;

use std::f64::consts::{PI, TAU};

use common::{date, series_of, weekdays_from};
use lppl_core::lppl::WindowData;
use lppl_core::{
    descriptive_stats, linear_solve, log_returns, read_csv, rmse, BubbleWindow, LpplParams,
    NonlinearParams, PriceSeries, Scale,
};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = LpplParams> {
    (
        -50.0..50.0f64,
        -20.0..20.0f64,
        -1.0..1.0f64,
        0.05..1.5f64,
        -15.0..15.0f64,
        1.0..200.0f64,
        -10.0..10.0f64,
    )
        .prop_map(|(a, b, c, beta, omega, t2c, phi)| LpplParams {
            a,
            b,
            c,
            beta,
            omega,
            t2c,
            phi,
            anchor_date: date(2000, 6, 30),
            scale: Scale::Log,
        })
}

fn curve_at(p: &LpplParams) -> Vec<f64> {
    (0..300).map(|k| p.value_at(p.t2c + k as f64 * 1.7)).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn noisy_window(seed: u64, n: usize) -> BubbleWindow {
    common::window(&common::synthetic(common::bubble_params(), n, 5.0, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_is_idempotent_and_keeps_the_curve(p in params_strategy()) {
        let c = p.canonical();
        prop_assert!(c.omega >= 0.0);
        prop_assert!((0.0..PI).contains(&c.phi));
        prop_assert_eq!(c.canonical(), c);
        prop_assert!(close(&curve_at(&p), &curve_at(&c), 1e-9));
    }

    #[test]
    fn phase_is_two_pi_periodic(p in params_strategy(), k in -3i32..=3) {
        let shifted = LpplParams { phi: p.phi + TAU * k as f64, ..p };
        prop_assert!(close(&curve_at(&p), &curve_at(&shifted), 1e-9));
    }

    #[test]
    fn log_round_trip(values in prop::collection::vec(1e-3..1e6f64, 2..200)) {
        let s = series_of(&values);
        let back = s.to_log().unwrap().to_raw().unwrap();
        for (a, b) in s.values().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn return_moments_ignore_a_price_rescaling(
        values in prop::collection::vec(50.0..150.0f64, 10..200),
        factor in 0.01..100.0f64,
    ) {
        let s = series_of(&values);
        let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
        let a = descriptive_stats(&log_returns(&s).unwrap());
        let b = descriptive_stats(&log_returns(&series_of(&scaled)).unwrap());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.skewness - b.skewness).abs() < 1e-6);
            prop_assert!((a.excess_kurtosis - b.excess_kurtosis).abs() < 1e-6);
        }
    }

    #[test]
    fn ingestion_ignores_row_order(
        values in prop::collection::vec(1.0..1e4f64, 2..60),
        seed in any::<u64>(),
    ) {
        let dates = weekdays_from(date(2001, 3, 5), values.len());
        let mut rows: Vec<String> = dates
            .iter()
            .zip(&values)
            .map(|(d, v)| format!("{d},{v}"))
            .collect();
        // Deterministic shuffle.
        let mut state = seed | 1;
        for i in (1..rows.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            rows.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let csv = format!("date,value\n{}\n", rows.join("\n"));
        let got = read_csv(csv.as_bytes(), "x", "date", "value").unwrap().series;
        let want = PriceSeries::from_pairs("x", Scale::Raw, &dates, &values).unwrap();
        prop_assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_solve_is_shift_and_scale_equivariant(
        seed in 0u64..1000,
        shift in -500.0..500.0f64,
        factor in 0.1..10.0f64,
        beta in 0.1..0.9f64,
        omega in 3.0..12.0f64,
        t2c in 5.0..100.0f64,
        phi in 0.0..PI,
    ) {
        let w = noisy_window(seed, 200);
        let nl = NonlinearParams::new(beta, omega, t2c, phi);
        let base = linear_solve(nl, &w).unwrap();
        let obs: Vec<f64> = w.series_slice.values().map(|v| factor * v + shift).collect();
        let dates: Vec<_> = w.series_slice.dates().collect();
        let moved = BubbleWindow::whole(
            &PriceSeries::from_pairs("m", Scale::Log, &dates, &obs).unwrap(),
        )
        .unwrap();
        let got = linear_solve(nl, &moved).unwrap();
        let scale = base.a.abs().max(base.b.abs()) * factor + shift.abs();
        prop_assert!((got.a - (factor * base.a + shift)).abs() <= 1e-8 * scale);
        prop_assert!((got.b - factor * base.b).abs() <= 1e-8 * scale);
        prop_assert!((got.c - base.c).abs() <= 1e-7 * (1.0 + base.c.abs()));

        let p0 = WindowData::new(&w).unwrap().params(&base, nl);
        let p1 = WindowData::new(&moved).unwrap().params(&got, nl);
        let r0 = rmse(&p0, &w).unwrap();
        let r1 = rmse(&p1, &moved).unwrap();
        prop_assert!((r1 - factor * r0).abs() <= 1e-7 * (1.0 + factor * r0));
    }

    #[test]
    fn sub_solve_beats_perturbed_coefficients(
        seed in 0u64..1000,
        beta in 0.1..0.9f64,
        omega in 3.0..12.0f64,
        da in -1.0..1.0f64,
        db in -1.0..1.0f64,
        dc in -0.05..0.05f64,
    ) {
        let w = noisy_window(seed, 150);
        let data = WindowData::new(&w).unwrap();
        let nl = NonlinearParams::new(beta, omega, 20.0, 0.5);
        let best = data.params(&linear_solve(nl, &w).unwrap(), nl);
        let worse = LpplParams { a: best.a + da, b: best.b + db, c: best.c + dc, ..best };
        prop_assert!(data.rmse(&best).unwrap() <= data.rmse(&worse).unwrap() + 1e-9);
    }
}
