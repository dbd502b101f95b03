mod common;

use common::{bubble_params, series_of, synthetic, window};
use lppl_core::sensitivity::scan_parameter_reoptimized;
use lppl_core::{
    scan_parameter, FitDiagnostics, FitResult, LpplParams, NelderMeadOptions, ScanParam, ScanSpec,
};

fn fit_from(params: LpplParams, rmse: f64) -> FitResult {
    FitResult {
        params,
        diagnostics: FitDiagnostics {
            rmse,
            is_precursor: true,
            monotone_increasing: true,
            violation_dates: Vec::new(),
            validity_ratio: 1.0,
            raw_fit_valid: true,
        },
        seed_used: [0.0; 4],
        function_evaluations: 0,
        converged: true,
        linear_degenerate: false,
    }
}

#[test]
fn center_sample_reproduces_the_fit() {
    let p = bubble_params();
    let w = window(&synthetic(p, 300, 5.0, 1));
    let r = lppl_core::rmse(&p, &w).unwrap();
    for param in ScanParam::ALL {
        let spec = ScanSpec::around(&fit_from(p, r), param);
        let points = scan_parameter(&fit_from(p, r), &w, &spec).unwrap();
        let center = points[spec.steps / 2];
        assert_eq!(center.value, spec.center);
        // The scan re-solves (A, B, C), which can only improve on the true ones.
        assert!(center.rmse.unwrap() <= r + 1e-9, "{param:?}");
    }
}

#[test]
fn center_sample_equals_a_searched_fit_exactly() {
    let p = LpplParams { t2c: 12.0, ..bubble_params() };
    let w = window(&synthetic(p, 150, 4.0, 8));
    let mut bounds = lppl_core::SearchBounds::default();
    bounds.beta.min_width = Some(2.0);
    bounds.omega.min_width = Some(20.0);
    let report = lppl_core::fit_bubble(
        &w,
        &bounds,
        lppl_core::ScaleChoice::Raw,
        &lppl_core::FitOptions::default(),
    )
    .unwrap();
    let fit = &report.fits[0].fit;
    for param in ScanParam::ALL {
        let spec = ScanSpec { steps: 11, ..ScanSpec::around(fit, param) };
        let points = scan_parameter(fit, &w, &spec).unwrap();
        assert_eq!(points[5].rmse, Some(fit.diagnostics.rmse), "{param:?}");
    }
}

#[test]
fn refining_the_grid_keeps_the_coarse_samples() {
    let p = bubble_params();
    let w = window(&synthetic(p, 200, 5.0, 2));
    let fit = fit_from(p, 0.0);
    let coarse = ScanSpec { parameter: ScanParam::Omega, center: 6.36, half_width: 2.0, steps: 21 };
    let fine = ScanSpec { steps: 41, ..coarse };
    let a = scan_parameter(&fit, &w, &coarse).unwrap();
    let b = scan_parameter(&fit, &w, &fine).unwrap();
    for (i, pa) in a.iter().enumerate() {
        let pb = b[2 * i];
        assert_eq!(pa, &pb);
    }
}

#[test]
fn flat_data_gives_a_flat_profile() {
    let s = series_of(&[250.0; 150]);
    let w = window(&s);
    let p = LpplParams { anchor_date: s.last().unwrap().date, ..bubble_params() };
    let spec = ScanSpec { parameter: ScanParam::Beta, center: 0.4, half_width: 0.3, steps: 31 };
    for pt in scan_parameter(&fit_from(p, 0.0), &w, &spec).unwrap() {
        assert!(pt.rmse.unwrap() < 1e-9);
    }
}

#[test]
fn noise_free_profile_bottoms_out_at_the_truth() {
    let p = bubble_params();
    let w = window(&synthetic(p, 300, 0.0, 0));
    for param in ScanParam::ALL {
        let spec = ScanSpec::around(&fit_from(p, 0.0), param);
        let points = scan_parameter(&fit_from(p, 0.0), &w, &spec).unwrap();
        let best = points
            .iter()
            .filter_map(|pt| pt.rmse.map(|r| (pt.value, r)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        assert_eq!(best.0, spec.center, "{param:?}");
    }
}

#[test]
fn critical_time_inside_the_window_is_undefined() {
    let p = LpplParams { t2c: 10.0, ..bubble_params() };
    let w = window(&synthetic(p, 200, 1.0, 4));
    let spec = ScanSpec { parameter: ScanParam::T2c, center: 10.0, half_width: 20.0, steps: 41 };
    let points = scan_parameter(&fit_from(p, 0.0), &w, &spec).unwrap();
    for pt in points {
        assert_eq!(pt.rmse.is_none(), pt.value < 1.0, "t2c = {}", pt.value);
    }
}

#[test]
fn reoptimised_profile_never_exceeds_the_fixed_one() {
    let p = bubble_params();
    let w = window(&synthetic(p, 200, 5.0, 6));
    let spec = ScanSpec { parameter: ScanParam::Beta, center: 0.33, half_width: 0.1, steps: 5 };
    let fit = fit_from(p, 0.0);
    let fixed = scan_parameter(&fit, &w, &spec).unwrap();
    let free = scan_parameter_reoptimized(&fit, &w, &spec, &NelderMeadOptions::default()).unwrap();
    for (a, b) in fixed.iter().zip(&free) {
        assert!(b.rmse.unwrap() <= a.rmse.unwrap() + 1e-9);
    }
}
