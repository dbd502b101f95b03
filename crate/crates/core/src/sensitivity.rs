//! RMSE as a function of one non-linear parameter around a fit.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crashes::BubbleWindow;
use crate::error::{Error, Result};
use crate::fitter::{nelder_mead, FitResult, NelderMeadOptions};
use crate::lppl::{solve_linear, NonlinearParams, WindowData};
use crate::series::Scale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanParam {
    Beta,
    Omega,
    T2c,
    Phi,
}

impl ScanParam {
    pub const ALL: [ScanParam; 4] = [ScanParam::Beta, ScanParam::Omega, ScanParam::T2c, ScanParam::Phi];

    pub fn index(self) -> usize {
        match self {
            ScanParam::Beta => 0,
            ScanParam::Omega => 1,
            ScanParam::T2c => 2,
            ScanParam::Phi => 3,
        }
    }

    pub fn name(self) -> &'static str {
        crate::fitter::PARAM_NAMES[self.index()]
    }

    /// Default half-width of a scan around a fit.
    pub fn default_half_width(self) -> f64 {
        match self {
            ScanParam::Beta => 0.25,
            ScanParam::Omega => 2.0,
            ScanParam::T2c => 30.0,
            ScanParam::Phi => std::f64::consts::FRAC_PI_2,
        }
    }
}

impl std::str::FromStr for ScanParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScanParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scan parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub parameter: ScanParam,
    pub center: f64,
    pub half_width: f64,
    /// Odd, so the center is one of the samples.
    pub steps: usize,
}

pub const DEFAULT_SCAN_STEPS: usize = 201;

impl ScanSpec {
    /// A scan centred on the fitted value of `parameter`.
    pub fn around(fit: &FitResult, parameter: ScanParam) -> Self {
        Self {
            parameter,
            center: fit.params.nonlinear().to_array()[parameter.index()],
            half_width: parameter.default_half_width(),
            steps: DEFAULT_SCAN_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 3 || self.steps.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "scan steps must be odd and at least 3, got {}",
                self.steps
            )));
        }
        if !(self.half_width > 0.0) || !self.center.is_finite() {
            return Err(Error::Config("scan half-width must be positive".into()));
        }
        Ok(())
    }

    /// Evenly spaced abscissae; sample `(steps - 1) / 2` is exactly `center`.
    pub fn abscissae(&self) -> Vec<f64> {
        let intervals = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.center + self.half_width * ((2 * i) as f64 / intervals - 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub value: f64,
    /// `None` where the model is undefined (e.g. `t2c < 1`).
    pub rmse: Option<f64>,
}

fn fit_data(fit: &FitResult, window: &BubbleWindow) -> Result<WindowData> {
    let window = match (fit.params.scale, window.scale()) {
        (Scale::Log, Scale::Raw) => window.to_log()?,
        (a, b) if a == b => window.clone(),
        _ => {
            return Err(Error::Usage(
                "a raw-scale fit cannot be scanned on a log-scale window".into(),
            ))
        }
    };
    let data = WindowData::new(&window)?;
    if data.anchor_date != fit.params.anchor_date {
        return Err(Error::Usage(format!(
            "fit is anchored on {} but the window ends on {}",
            fit.params.anchor_date, data.anchor_date
        )));
    }
    Ok(data)
}

fn rmse_at(data: &WindowData, nl: NonlinearParams) -> Option<f64> {
    if !(nl.t2c >= 1.0) {
        return None;
    }
    let linear = solve_linear(data, nl).ok()?;
    data.rmse(&data.params(&linear, nl)).ok()
}

/// Holds the other three non-linear parameters at their fitted values and
/// re-solves only `(A, B, C)` at each sample.
pub fn scan_parameter(fit: &FitResult, window: &BubbleWindow, spec: &ScanSpec) -> Result<Vec<ScanPoint>> {
    spec.validate()?;
    let data = fit_data(fit, window)?;
    let base = fit.params.nonlinear().to_array();
    let k = spec.parameter.index();
    Ok(spec
        .abscissae()
        .into_par_iter()
        .map(|value| {
            let mut x = base;
            x[k] = value;
            ScanPoint {
                value,
                rmse: rmse_at(&data, NonlinearParams::from_array(x)),
            }
        })
        .collect())
}

/// Like [`scan_parameter`] but re-optimises the other three non-linear
/// parameters by simplex at every sample, starting from the fit.
pub fn scan_parameter_reoptimized(
    fit: &FitResult,
    window: &BubbleWindow,
    spec: &ScanSpec,
    options: &NelderMeadOptions,
) -> Result<Vec<ScanPoint>> {
    spec.validate()?;
    let data = fit_data(fit, window)?;
    let base = fit.params.nonlinear().to_array();
    let k = spec.parameter.index();
    let free: Vec<usize> = (0..4).filter(|&i| i != k).collect();
    let seed: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    Ok(spec
        .abscissae()
        .into_par_iter()
        .map(|value| {
            let assemble = |y: &[f64]| {
                let mut x = base;
                x[k] = value;
                for (&i, &v) in free.iter().zip(y) {
                    x[i] = v;
                }
                NonlinearParams::from_array(x)
            };
            let objective = |y: &[f64]| {
                let nl = assemble(y);
                if !(nl.beta > 0.0) {
                    return f64::INFINITY;
                }
                rmse_at(&data, nl).unwrap_or(f64::INFINITY)
            };
            let rmse = nelder_mead(objective, &seed, options)
                .ok()
                .map(|r| r.value)
                .filter(|v| v.is_finite());
            ScanPoint { value, rmse }
        })
        .collect())
}

/// Writes `param,value,rmse`; undefined samples leave `rmse` empty.
pub fn write_scan_csv<W: Write>(parameter: ScanParam, points: &[ScanPoint], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["param", "value", "rmse"])?;
    for p in points {
        out.write_record([
            parameter.name().to_string(),
            format!("{}", p.value),
            p.rmse.map(|r| format!("{r}")).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abscissae_hit_center() {
        let spec = ScanSpec {
            parameter: ScanParam::Omega,
            center: 6.36,
            half_width: 1.3,
            steps: 7,
        };
        let xs = spec.abscissae();
        assert_eq!(xs.len(), 7);
        assert_eq!(xs[3], 6.36);
        assert!((xs[0] - 5.06).abs() < 1e-12 && (xs[6] - 7.66).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ScanSpec {
            parameter: ScanParam::Beta,
            center: 0.3,
            half_width: 0.1,
            steps: 4,
        };
        assert!(spec.validate().is_err());
        spec.steps = 1;
        assert!(spec.validate().is_err());
        spec.steps = 5;
        spec.half_width = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in ScanParam::ALL {
            assert_eq!(p.name().parse::<ScanParam>().unwrap(), p);
        }
        assert!("gamma".parse::<ScanParam>().is_err());
    }

    #[test]
    fn csv_leaves_undefined_empty() {
        let mut buf = Vec::new();
        let pts = [
            ScanPoint { value: 0.5, rmse: None },
            ScanPoint { value: 1.5, rmse: Some(2.0) },
        ];
        write_scan_csv(ScanParam::T2c, &pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "param,value,rmse\nt2c,0.5,\nt2c,1.5,2\n");
    }
}
