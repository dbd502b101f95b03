//! The Log Periodic Power Law
//!
//! ```text
//! y(t) = A + B (tc - t)^beta [1 + C cos(omega ln(tc - t) + phi)]
//! ```
//!
//! with time measured in calendar days. A window is sampled only on its
//! weekday observations, so weekends and holidays widen `tc - t` without
//! adding residuals. The critical time is stored relative to the last day of
//! the fitted window: `tc = anchor_date + t2c`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::crashes::BubbleWindow;
use crate::error::{Error, Result};
use crate::series::Scale;

/// The four parameters that enter the model non-linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearParams {
    pub beta: f64,
    pub omega: f64,
    pub t2c: f64,
    pub phi: f64,
}

impl NonlinearParams {
    pub fn new(beta: f64, omega: f64, t2c: f64, phi: f64) -> Self {
        Self {
            beta,
            omega,
            t2c,
            phi,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.beta, self.omega, self.t2c, self.phi]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub beta: f64,
    pub omega: f64,
    pub t2c: f64,
    pub phi: f64,
    pub anchor_date: NaiveDate,
    pub scale: Scale,
}

impl LpplParams {
    pub fn nonlinear(&self) -> NonlinearParams {
        NonlinearParams::new(self.beta, self.omega, self.t2c, self.phi)
    }

    /// `tc - t` in days.
    pub fn days_to_critical(&self, t: NaiveDate) -> f64 {
        (self.anchor_date - t).num_days() as f64 + self.t2c
    }

    /// The critical date, rounded to the nearest calendar day.
    pub fn critical_date(&self) -> NaiveDate {
        self.anchor_date + Duration::days(self.t2c.round() as i64)
    }

    /// Model value at `days_to_critical = tc - t`, with no domain check.
    #[inline]
    pub fn value_at(&self, days_to_critical: f64) -> f64 {
        let log_u = days_to_critical.ln();
        let power = (self.beta * log_u).exp();
        self.a + self.b * power * (1.0 + self.c * (self.omega * log_u + self.phi).cos())
    }

    /// Maps `(C, phi)` onto the representative with `omega >= 0` and
    /// `phi` in `[0, pi)`, using `cos(x + pi) = -cos(x)` and the evenness
    /// of the cosine. The curve is unchanged.
    pub fn canonical(mut self) -> Self {
        if self.omega < 0.0 {
            self.omega = -self.omega;
            self.phi = -self.phi;
        }
        let mut phi = self.phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        if phi >= PI {
            phi -= PI;
            self.c = -self.c;
        }
        self.phi = phi;
        self
    }
}

pub fn lppl_value(params: &LpplParams, t: NaiveDate) -> Result<f64> {
    let u = params.days_to_critical(t);
    if u <= 0.0 {
        return Err(Error::Domain(format!(
            "{t} is not before the critical time ({} days past it)",
            -u
        )));
    }
    Ok(params.value_at(u))
}

/// A window flattened into the arrays the objective works on.
#[derive(Debug, Clone)]
pub struct WindowData {
    pub dates: Vec<NaiveDate>,
    /// Calendar days from each observation to the last one.
    pub days_before_end: Vec<f64>,
    pub y: Vec<f64>,
    pub anchor_date: NaiveDate,
    pub scale: Scale,
}

impl WindowData {
    pub fn new(window: &BubbleWindow) -> Result<Self> {
        let series = &window.series_slice;
        let anchor_date = series
            .last()
            .ok_or_else(|| Error::Usage("empty window".into()))?
            .date;
        let dates: Vec<NaiveDate> = series.dates().collect();
        let days_before_end = dates
            .iter()
            .map(|&d| (anchor_date - d).num_days() as f64)
            .collect();
        Ok(Self {
            dates,
            days_before_end,
            y: series.values().collect(),
            anchor_date,
            scale: series.scale(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn max_abs_y(&self) -> f64 {
        self.y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Population standard deviation of the observations.
    pub fn y_spread(&self) -> f64 {
        let n = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        (self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn params(&self, linear: &LinearSolution, nl: NonlinearParams) -> LpplParams {
        LpplParams {
            a: linear.a,
            b: linear.b,
            c: linear.c,
            beta: nl.beta,
            omega: nl.omega,
            t2c: nl.t2c,
            phi: nl.phi,
            anchor_date: self.anchor_date,
            scale: self.scale,
        }
    }

    /// Root mean squared error with an `n` denominator.
    pub fn rmse(&self, params: &LpplParams) -> Result<f64> {
        let shift = (params.anchor_date - self.anchor_date).num_days() as f64 + params.t2c;
        let mut sse = 0.0;
        for (&d, &y) in self.days_before_end.iter().zip(&self.y) {
            let u = d + shift;
            if u <= 0.0 {
                return Err(Error::Domain(format!(
                    "window reaches {} days past the critical time",
                    -u
                )));
            }
            let r = y - params.value_at(u);
            sse += r * r;
        }
        Ok((sse / self.y.len() as f64).sqrt())
    }
}

/// Least-squares `(A, B, C)` for fixed non-linear parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `B` vanished, so `C = D / B` is undefined and reported as zero.
    pub degenerate: bool,
}

const BASIS: [&str; 3] = ["constant", "power", "oscillation"];
const RANK_TOL: f64 = 1e-10;

/// Solves for `(A, B, D)` in `y ~ A + B f + D g` with
/// `f = (tc - t)^beta` and `g = f cos(omega ln(tc - t) + phi)`, then sets
/// `C = D / B`.
///
/// The three columns are orthogonalised with twice-iterated modified
/// Gram-Schmidt; a column whose remainder falls below `1e-10` of its norm
/// is reported as collinear with the earlier column it is most aligned with.
pub fn solve_linear(data: &WindowData, nl: NonlinearParams) -> Result<LinearSolution> {
    let mut ws = Workspace::default();
    solve_into(data, nl, &mut ws)
}

/// Basis columns and scratch space reused across objective evaluations.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    cols: [Vec<f64>; 3],
    q: [Vec<f64>; 3],
    v: Vec<f64>,
}

/// [`solve_linear`] followed by the RMSE of the resulting curve.
///
/// This is the objective's hot path: basis values and their cross
/// products are accumulated in one pass and the 3x3 normal equations,
/// scaled to unit diagonal, are solved by Cholesky. Near-singular systems
/// fall back to [`solve_linear`], which also names the collinear pair.
pub fn solve_with_rmse(
    data: &WindowData,
    nl: NonlinearParams,
    ws: &mut Workspace,
) -> Result<(LinearSolution, f64)> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Usage("empty window".into()));
    }
    if !(nl.t2c >= 1.0) {
        return Err(Error::Domain(format!("t2c = {} is below one day", nl.t2c)));
    }
    for col in &mut ws.cols[1..] {
        col.resize(n, 0.0);
    }
    // Gram matrix of [1, f, g] and the right-hand side.
    let (mut sf, mut sg, mut sff, mut sfg, mut sgg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sfy, mut sgy) = (0.0, 0.0, 0.0);
    let mut max_f = 0.0f64;
    {
        let [_, fs, gs] = &mut ws.cols;
        for (((&d, &y), fi), gi) in data
            .days_before_end
            .iter()
            .zip(&data.y)
            .zip(fs.iter_mut())
            .zip(gs.iter_mut())
        {
            let log_u = (d + nl.t2c).ln();
            let f = (nl.beta * log_u).exp();
            let g = f * (nl.omega * log_u + nl.phi).cos();
            *fi = f;
            *gi = g;
            max_f = max_f.max(f.abs());
            sf += f;
            sg += g;
            sff += f * f;
            sfg += f * g;
            sgg += g * g;
            sy += y;
            sfy += f * y;
            sgy += g * y;
        }
    }
    let nf = n as f64;
    let gram = [[nf, sf, sg], [sf, sff, sfg], [sg, sfg, sgg]];
    let rhs = [sy, sfy, sgy];
    let Some([a, b, d]) = scaled_cholesky_solve(gram, rhs) else {
        let sol = solve_linear(data, nl)?;
        let params = data.params(&sol, nl);
        return Ok((sol, data.rmse(&params)?));
    };
    let degenerate = b.abs() * max_f < 1e-12 * data.max_abs_y();
    let sol = LinearSolution {
        a,
        b,
        c: if degenerate { 0.0 } else { d / b },
        degenerate,
    };
    // The curve is A + B f + (B C) g, which drops the g term when B vanished.
    let d = sol.b * sol.c;
    let [_, f, g] = &ws.cols;
    let sse: f64 = data
        .y
        .iter()
        .zip(f.iter().zip(g))
        .map(|(y, (f, g))| {
            let r = y - (sol.a + sol.b * f + d * g);
            r * r
        })
        .sum();
    Ok((sol, (sse / nf).sqrt()))
}

/// Solves `G x = r` for symmetric positive definite `G` after scaling it to
/// unit diagonal. `None` when a pivot falls below the resolution of the
/// normal equations.
fn scaled_cholesky_solve(g: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let s = [0, 1, 2].map(|i| g[i][i].sqrt());
    if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = g[i][j] / (s[i] * s[j]);
        }
    }
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let pivot = m[i][i] - dot;
                // Pivot = squared remainder of a unit column; below this the
                // normal equations cannot resolve it.
                if !(pivot > 1e-12) {
                    return None;
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (m[i][j] - dot) / l[j][j];
            }
        }
    }
    let rs = [0, 1, 2].map(|i| r[i] / s[i]);
    let mut z = [0.0; 3];
    for i in 0..3 {
        let dot: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (rs[i] - dot) / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let dot: f64 = (i + 1..3).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - dot) / l[i][i];
    }
    Some([0, 1, 2].map(|i| x[i] / s[i]))
}

fn solve_into(data: &WindowData, nl: NonlinearParams, ws: &mut Workspace) -> Result<LinearSolution> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Usage("empty window".into()));
    }
    if !(nl.t2c >= 1.0) {
        return Err(Error::Domain(format!("t2c = {} is below one day", nl.t2c)));
    }
    for col in ws.cols.iter_mut().chain(ws.q.iter_mut()) {
        col.resize(n, 0.0);
    }
    ws.cols[0].fill(1.0);
    {
        let [_, f, g] = &mut ws.cols;
        for ((&d, fi), gi) in data.days_before_end.iter().zip(f.iter_mut()).zip(g.iter_mut()) {
            let log_u = (d + nl.t2c).ln();
            let power = (nl.beta * log_u).exp();
            *fi = power;
            *gi = power * (nl.omega * log_u + nl.phi).cos();
        }
    }
    let cols = &ws.cols;
    let max_f = cols[1].iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut r = [[0.0f64; 3]; 3];
    for k in 0..3 {
        let col_norm = norm(&cols[k]);
        ws.v.clear();
        ws.v.extend_from_slice(&cols[k]);
        for _pass in 0..2 {
            for j in 0..k {
                let proj = dot(&ws.q[j], &ws.v);
                r[j][k] += proj;
                for (vi, qi) in ws.v.iter_mut().zip(&ws.q[j]) {
                    *vi -= proj * qi;
                }
            }
        }
        let remainder = norm(&ws.v);
        if !(remainder > RANK_TOL * col_norm) {
            let partner = (0..k)
                .max_by(|&i, &j| {
                    cosine(&cols[i], &cols[k]).total_cmp(&cosine(&cols[j], &cols[k]))
                })
                .unwrap_or(0);
            return Err(Error::Collinear {
                first: BASIS[partner],
                second: BASIS[k],
            });
        }
        r[k][k] = remainder;
        for (qi, vi) in ws.q[k].iter_mut().zip(&ws.v) {
            *qi = vi / remainder;
        }
    }

    let z = [0, 1, 2].map(|k| dot(&ws.q[k], &data.y));
    let mut coef = [0.0; 3];
    for k in (0..3).rev() {
        let tail: f64 = (k + 1..3).map(|j| r[k][j] * coef[j]).sum();
        coef[k] = (z[k] - tail) / r[k][k];
    }
    let [a, b, d] = coef;
    let degenerate = b.abs() * max_f < 1e-12 * data.max_abs_y();
    Ok(LinearSolution {
        a,
        b,
        c: if degenerate { 0.0 } else { d / b },
        degenerate,
    })
}

/// [`solve_linear`] for a window.
pub fn linear_solve(nl: NonlinearParams, window: &BubbleWindow) -> Result<LinearSolution> {
    solve_linear(&WindowData::new(window)?, nl)
}

pub fn rmse(params: &LpplParams, window: &BubbleWindow) -> Result<f64> {
    WindowData::new(window)?.rmse(params)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).abs()
}

/// Parameters of the log-periodic hazard rate
/// `h(t) = B' (tc - t)^-alpha [1 + C' cos(omega ln(tc - t) + phi')]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    /// Fraction by which the price drops if the crash happens.
    pub kappa: f64,
    pub b_prime: f64,
    pub c_prime: f64,
    pub alpha: f64,
}

impl HazardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Usage(format!("kappa = {} outside (0, 1]", self.kappa)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Usage(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }

    /// The power-law exponent of the implied price path, `1 - alpha`.
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    /// `(A, B)` of the pure power law `log p(t) = A + B (tc - t)^beta`
    /// reached by integrating a hazard with `C' = 0` from `t0`, taking
    /// `log p(t0) = 0`.
    pub fn power_law_coefficients(&self, t_c: f64, t0: f64) -> (f64, f64) {
        let beta = self.beta();
        let b = -self.kappa * self.b_prime / beta;
        (-b * (t_c - t0).powf(beta), b)
    }
}

/// Instantaneous hazard rate; negative values are returned as-is.
pub fn hazard_rate(h: &HazardParams, omega: f64, phi_prime: f64, t_c: f64, t: f64) -> Result<f64> {
    h.validate()?;
    let u = t_c - t;
    if u <= 0.0 {
        return Err(Error::Domain(format!("t = {t} is not before t_c = {t_c}")));
    }
    let log_u = u.ln();
    Ok(h.b_prime * (-h.alpha * log_u).exp() * (1.0 + h.c_prime * (omega * log_u + phi_prime).cos()))
}

/// `kappa * integral_{t0}^{t} h(s) ds` in closed form.
pub fn integrated_hazard(
    h: &HazardParams,
    omega: f64,
    phi_prime: f64,
    t_c: f64,
    t0: f64,
    t: f64,
) -> Result<f64> {
    h.validate()?;
    if t0 >= t_c || t >= t_c {
        return Err(Error::Domain(format!(
            "integration limits {t0}..{t} must precede t_c = {t_c}"
        )));
    }
    let beta = h.beta();
    let antiderivative = |s: f64| {
        let u = t_c - s;
        let power = u.powf(beta);
        let psi = omega * u.ln() + phi_prime;
        -power / beta
            - h.c_prime * power * (omega * psi.sin() + beta * psi.cos()) / (omega * omega + beta * beta)
    };
    Ok(h.kappa * h.b_prime * (antiderivative(t) - antiderivative(t0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub monotone_increasing: bool,
    /// Dates whose fitted value is below the previous date's.
    pub violation_dates: Vec<NaiveDate>,
}

/// Evaluates the fitted curve on every observation date of the window (and
/// the anchor date when it is not already the last one) and lists each
/// date where it falls.
pub fn monotonicity_check(params: &LpplParams, window: &BubbleWindow) -> Result<Monotonicity> {
    let mut dates: Vec<NaiveDate> = window.series_slice.dates().collect();
    if dates.last() != Some(&params.anchor_date) && dates.last() < Some(&params.anchor_date) {
        dates.push(params.anchor_date);
    }
    let fitted = dates
        .iter()
        .map(|&d| lppl_value(params, d))
        .collect::<Result<Vec<f64>>>()?;
    let violation_dates: Vec<NaiveDate> = fitted
        .windows(2)
        .zip(&dates[1..])
        .filter(|(w, _)| w[1] < w[0])
        .map(|(_, &d)| d)
        .collect();
    Ok(Monotonicity {
        monotone_increasing: violation_dates.is_empty(),
        violation_dates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    /// Last value of the window divided by its first.
    pub ratio: f64,
    /// `ratio <= 2`: with a non-negative fundamental price, a larger rise
    /// rules out fitting the raw index.
    pub raw_fit_valid: bool,
}

pub const MAX_RAW_RATIO: f64 = 2.0;

pub fn raw_index_validity(window: &BubbleWindow) -> Result<Validity> {
    if window.scale() != Scale::Raw {
        return Err(Error::Usage("validity ratio needs a raw-scale window".into()));
    }
    let (Some(first), Some(last)) = (window.series_slice.first(), window.series_slice.last()) else {
        return Err(Error::Usage("empty window".into()));
    };
    let ratio = last.value / first.value;
    Ok(Validity {
        ratio,
        raw_fit_valid: ratio <= MAX_RAW_RATIO,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rmse: f64,
    pub is_precursor: bool,
    pub monotone_increasing: bool,
    pub violation_dates: Vec<NaiveDate>,
    pub validity_ratio: f64,
    pub raw_fit_valid: bool,
}

/// One row of a fitted-curve export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub date: NaiveDate,
    pub observed: f64,
    pub fitted: f64,
}

pub fn curve(params: &LpplParams, window: &BubbleWindow) -> Result<Vec<CurvePoint>> {
    window
        .series_slice
        .observations()
        .iter()
        .map(|o| {
            Ok(CurvePoint {
                date: o.date,
                observed: o.value,
                fitted: lppl_value(params, o.date)?,
            })
        })
        .collect()
}

/// Writes `date,observed,fitted` rows.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["date", "observed", "fitted"])?;
    for p in points {
        out.write_record([
            p.date.to_string(),
            format!("{}", p.observed),
            format!("{}", p.fitted),
        ])?;
    }
    out.flush()?;
    Ok(())
}
