use rayon::prelude::*;

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::SearchBounds;
use crate::error::Result;
use crate::lppl::{solve_linear, solve_with_rmse, LinearSolution, LpplParams, NonlinearParams, WindowData, Workspace};

/// RMSE of the best linear completion as a function of the non-linear
/// parameters. Infeasible points (`t2c < 1`, `beta` at or below its floor,
/// rank-deficient sub-problems) evaluate to `+inf`.
///
/// The simplex works on parameters divided by the width of their seed
/// range, so one tolerance fits all four.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    data: &'a WindowData,
    widths: [f64; 4],
    beta_floor: Option<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a WindowData, bounds: &SearchBounds, beta_floor: Option<f64>) -> Self {
        let (lo, hi) = (bounds.lower(), bounds.upper());
        Self {
            data,
            widths: [0, 1, 2, 3].map(|i| hi[i] - lo[i]),
            beta_floor,
        }
    }

    pub fn data(&self) -> &WindowData {
        self.data
    }

    fn feasible(&self, nl: &NonlinearParams) -> bool {
        let beta_ok = match self.beta_floor {
            Some(floor) => nl.beta >= floor,
            None => nl.beta > 0.0,
        };
        beta_ok && nl.t2c >= 1.0 && nl.to_array().iter().all(|v| v.is_finite())
    }

    pub fn solve(&self, nl: NonlinearParams) -> Result<(LpplParams, LinearSolution)> {
        let linear = solve_linear(self.data, nl)?;
        Ok((self.data.params(&linear, nl), linear))
    }

    pub fn rmse(&self, nl: NonlinearParams) -> f64 {
        self.rmse_with(nl, &mut Workspace::default())
    }

    fn rmse_with(&self, nl: NonlinearParams, ws: &mut Workspace) -> f64 {
        if !self.feasible(&nl) {
            return f64::INFINITY;
        }
        solve_with_rmse(self.data, nl, ws).map_or(f64::INFINITY, |(_, rmse)| rmse)
    }

    fn scaled(&self, nl: NonlinearParams) -> [f64; 4] {
        let x = nl.to_array();
        [0, 1, 2, 3].map(|i| x[i] / self.widths[i])
    }

    fn unscaled(&self, x: &[f64]) -> NonlinearParams {
        NonlinearParams::new(
            x[0] * self.widths[0],
            x[1] * self.widths[1],
            x[2] * self.widths[2],
            x[3] * self.widths[3],
        )
    }

    /// One unbounded simplex run from `seed`.
    pub fn run_simplex(
        &self,
        seed: NonlinearParams,
        options: &NelderMeadOptions,
    ) -> Result<ExploredSeed> {
        let mut ws = Workspace::default();
        let seed_rmse = self.rmse_with(seed, &mut ws);
        let result = nelder_mead(
            |x| self.rmse_with(self.unscaled(x), &mut ws),
            &self.scaled(seed),
            options,
        )?;
        Ok(ExploredSeed {
            seed,
            seed_rmse,
            solution: self.unscaled(&result.x),
            rmse: result.value,
            evaluations: result.evaluations,
            converged: result.converged,
        })
    }
}

/// A simplex run and where it started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploredSeed {
    pub seed: NonlinearParams,
    pub seed_rmse: f64,
    pub solution: NonlinearParams,
    pub rmse: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Recursive seed search over `bounds`.
///
/// Each call seeds a simplex at the middle of its box. The seed and the
/// solution span a hypercube over the parameters that have a minimum
/// width; for each such parameter the part of the box below the hypercube
/// and the part above it are searched recursively when they are at least
/// that wide. Output is in depth-first order whatever the scheduling.
pub fn explore_seeds(
    objective: &Objective,
    bounds: &SearchBounds,
    options: &NelderMeadOptions,
) -> Vec<ExploredSeed> {
    explore(
        objective,
        bounds.lower(),
        bounds.upper(),
        bounds.min_widths(),
        options,
    )
}

fn explore(
    objective: &Objective,
    lower: [f64; 4],
    upper: [f64; 4],
    min_widths: [Option<f64>; 4],
    options: &NelderMeadOptions,
) -> Vec<ExploredSeed> {
    let seed = [0, 1, 2, 3].map(|i| 0.5 * (lower[i] + upper[i]));
    let run = objective
        .run_simplex(NonlinearParams::from_array(seed), options)
        .ok();
    let solution = run.map_or(seed, |r| r.solution.to_array());

    let mut boxes = Vec::new();
    for p in 0..4 {
        let Some(width) = min_widths[p] else { continue };
        let bottom = seed[p].min(solution[p]);
        let top = seed[p].max(solution[p]);
        if bottom - lower[p] >= width {
            let mut u = upper;
            u[p] = bottom;
            boxes.push((lower, u));
        }
        if upper[p] - top >= width {
            let mut l = lower;
            l[p] = top;
            boxes.push((l, upper));
        }
    }

    let children: Vec<Vec<ExploredSeed>> = boxes
        .par_iter()
        .map(|(l, u)| explore(objective, *l, *u, min_widths, options))
        .collect();
    run.into_iter().chain(children.into_iter().flatten()).collect()
}
