mod common;

use common::{bubble_params, synthetic, window};
use lppl_core::fitter::{explore_seeds, Objective, PAPER_BETA_FLOOR};
use lppl_core::lppl::WindowData;
use lppl_core::{
    fit_bubble, recursive_seed_search, rmse, Classification, Error, FitOptions, LpplParams,
    NelderMeadOptions, ParamBounds, ScaleChoice, SearchBounds,
};

fn short_bubble() -> LpplParams {
    LpplParams { t2c: 12.0, ..bubble_params() }
}

#[test]
fn noise_free_recovery() {
    let p = bubble_params();
    let w = window(&synthetic(p, 400, 0.0, 0));
    let report = fit_bubble(&w, &SearchBounds::default(), ScaleChoice::Raw, &FitOptions::default()).unwrap();
    let best = report.best().unwrap();
    let got = best.fit.params;
    assert!((got.beta - p.beta).abs() <= 1e-3, "beta {}", got.beta);
    assert!((got.omega - p.omega).abs() <= 1e-2, "omega {}", got.omega);
    assert!((got.t2c - p.t2c).abs() <= 0.5, "t2c {}", got.t2c);
    assert!((got.phi - p.phi).abs() <= 1e-2, "phi {}", got.phi);
    assert_eq!(best.classification, Classification::Precursor);
    assert!(best.fit.diagnostics.is_precursor);
    assert_eq!(report.scale_used, lppl_core::Scale::Raw);
    assert!(report.best_precursor.is_none());
}

#[test]
fn search_invariants_on_a_noisy_window() {
    let w = window(&synthetic(short_bubble(), 160, 6.0, 11));
    let bounds = SearchBounds::default();
    let fits = recursive_seed_search(&w, &bounds, &FitOptions::default()).unwrap();
    assert!(!fits.is_empty());

    // Ranked, and every stored RMSE is reproducible from the stored parameters.
    for pair in fits.windows(2) {
        assert!(pair[0].diagnostics.rmse <= pair[1].diagnostics.rmse);
    }
    for f in &fits {
        let again = rmse(&f.params, &w).unwrap();
        assert!((again - f.diagnostics.rmse).abs() <= 1e-9 * again.max(1.0));
        assert!(f.params.omega >= 0.0 && (0.0..std::f64::consts::PI).contains(&f.params.phi));
    }

    // The best solution is no worse than any seed or any simplex end point.
    let data = WindowData::new(&w).unwrap();
    let objective = Objective::new(&data, &bounds, None);
    let explored = explore_seeds(&objective, &bounds, &NelderMeadOptions::default());
    let best = fits[0].diagnostics.rmse;
    for e in &explored {
        assert!(best <= e.seed_rmse + 1e-9);
        assert!(best <= e.rmse + 1e-6 * best);
    }

    // Same input, same output.
    let again = recursive_seed_search(&w, &bounds, &FitOptions::default()).unwrap();
    assert_eq!(fits, again);
}

#[test]
fn full_width_minimums_mean_a_single_seed() {
    let w = window(&synthetic(short_bubble(), 140, 3.0, 5));
    let mut bounds = SearchBounds::default();
    bounds.beta.min_width = Some(2.0);
    bounds.omega.min_width = Some(20.0);
    let report = fit_bubble(&w, &bounds, ScaleChoice::Raw, &FitOptions::default()).unwrap();
    assert_eq!(report.seeds_explored, 1);
    assert_eq!(report.fits.len(), 1);
    assert_eq!(report.fits[0].fit.seed_used, [1.0, 10.0, 130.5, std::f64::consts::FRAC_PI_2]);
}

#[test]
fn too_few_observations() {
    let w = window(&common::series_of(&[100.0, 101.0, 103.0, 102.0, 104.0, 107.0, 106.0, 108.0, 110.0]));
    let err = recursive_seed_search(&w, &SearchBounds::default(), &FitOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "{err:?}");
}

#[test]
fn invalid_bounds_are_rejected() {
    let w = window(&synthetic(short_bubble(), 140, 0.0, 0));
    let bounds = SearchBounds {
        t2c: ParamBounds { lower: 0.5, upper: 260.0, min_width: None },
        ..SearchBounds::default()
    };
    assert!(recursive_seed_search(&w, &bounds, &FitOptions::default()).is_err());
}

#[test]
fn auto_scale_switches_to_log_for_large_rises() {
    // The raw level quadruples across the window.
    let p = LpplParams { a: 1000.0, b: -140.0, c: 0.02, t2c: 12.0, ..bubble_params() };
    let s = synthetic(p, 140, 0.0, 0);
    let w = window(&s);
    let mut bounds = SearchBounds::default();
    bounds.beta.min_width = Some(2.0);
    bounds.omega.min_width = Some(20.0);
    let report = fit_bubble(&w, &bounds, ScaleChoice::Auto, &FitOptions::default()).unwrap();
    assert!(report.validity_ratio > 2.0 && !report.raw_fit_valid);
    assert_eq!(report.scale_used, lppl_core::Scale::Log);
    assert_eq!(report.fits[0].fit.params.scale, lppl_core::Scale::Log);
}

#[test]
fn beta_floor_is_respected() {
    let w = window(&synthetic(short_bubble(), 140, 6.0, 2));
    let options = FitOptions { beta_floor: Some(PAPER_BETA_FLOOR), ..FitOptions::default() };
    let report = fit_bubble(&w, &SearchBounds::default(), ScaleChoice::Raw, &options).unwrap();
    assert!(report.fits.iter().all(|f| f.fit.params.beta >= PAPER_BETA_FLOOR));
    assert!(report.constrained_best.is_none());
}
