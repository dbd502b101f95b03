//! Unbounded Nelder-Mead simplex search with the standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2) and the
//! usual starting simplex: each coordinate of the seed perturbed by 5%, or
//! by 0.00025 when it is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Largest allowed distance (max-norm) from the best vertex.
    pub x_tol: f64,
    /// Largest allowed gap between the best and worst vertex values.
    pub f_tol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
    pub zero_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-6,
            f_tol: 1e-8,
            max_evals: 20_000,
            initial_step: 0.05,
            zero_step: 0.00025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// False when `max_evals` ran out before both tolerances were met.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `objective` from `seed`. Non-finite objective values are
/// treated as `+inf`, which lets callers reject infeasible points.
pub fn nelder_mead<F>(
    mut objective: F,
    seed: &[f64],
    options: &NelderMeadOptions,
) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = seed.len();
    if dim == 0 {
        return Err(Error::Usage("Nelder-Mead needs at least one dimension".into()));
    }
    let evaluations = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let seed_value = eval(seed);
    if !seed_value.is_finite() {
        return Err(Error::Usage(format!(
            "objective is not finite at the seed {seed:?}"
        )));
    }

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
    vertices.push(seed.to_vec());
    values.push(seed_value);
    for i in 0..dim {
        let mut v = seed.to_vec();
        v[i] = if v[i] != 0.0 {
            v[i] * (1.0 + options.initial_step)
        } else {
            options.zero_step
        };
        values.push(eval(&v));
        vertices.push(v);
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    let mut converged = false;

    loop {
        // Stable sort: ties keep vertex index order.
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = order[1..]
            .iter()
            .map(|&i| (values[i] - values[best]).abs())
            .fold(0.0f64, f64::max);
        let diameter = order[1..]
            .iter()
            .flat_map(|&i| vertices[i].iter().zip(&vertices[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter <= options.x_tol && spread <= options.f_tol {
            converged = true;
            break;
        }
        if evaluations.get() >= options.max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&vertices[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let along = |out: &mut Vec<f64>, coef: f64, from: &[f64]| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(from) {
                *o = c + coef * (c - w);
            }
        };

        along(&mut trial, REFLECT, &vertices[worst]);
        let reflected = eval(&trial);

        if reflected < values[best] {
            along(&mut trial2, REFLECT * EXPAND, &vertices[worst]);
            let expanded = eval(&trial2);
            if expanded < reflected {
                vertices[worst].copy_from_slice(&trial2);
                values[worst] = expanded;
            } else {
                vertices[worst].copy_from_slice(&trial);
                values[worst] = reflected;
            }
            continue;
        }
        if reflected < values[second_worst] {
            vertices[worst].copy_from_slice(&trial);
            values[worst] = reflected;
            continue;
        }
        if reflected < values[worst] {
            along(&mut trial2, REFLECT * CONTRACT, &vertices[worst]);
            let contracted = eval(&trial2);
            if contracted <= reflected {
                vertices[worst].copy_from_slice(&trial2);
                values[worst] = contracted;
                continue;
            }
        } else {
            along(&mut trial2, -CONTRACT, &vertices[worst]);
            let contracted = eval(&trial2);
            if contracted < values[worst] {
                vertices[worst].copy_from_slice(&trial2);
                values[worst] = contracted;
                continue;
            }
        }

        let anchor = vertices[best].clone();
        for &i in &order[1..] {
            for (x, a) in vertices[i].iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            values[i] = eval(&vertices[i]);
        }
    }

    let best = (0..=dim)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)))
        .unwrap_or(0);
    Ok(NelderMeadResult {
        x: vertices[best].clone(),
        value: values[best],
        evaluations: evaluations.get(),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> NelderMeadOptions {
        NelderMeadOptions {
            x_tol: 1e-10,
            f_tol: 1e-16,
            max_evals: 100_000,
            ..NelderMeadOptions::default()
        }
    }

    #[test]
    fn convex_quadratic() {
        let target = [1.0, 2.0, 3.0, 4.0];
        let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &[0.0; 4], &tight()).unwrap();
        assert!(r.converged);
        for (x, t) in r.x.iter().zip(&target) {
            assert!((x - t).abs() < 1e-5, "{:?}", r.x);
        }
    }

    #[test]
    fn rosenbrock_4d() {
        let f = |x: &[f64]| {
            x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum::<f64>()
        };
        let r = nelder_mead(f, &[0.9, 0.85, 1.1, 1.05], &tight()).unwrap();
        for x in &r.x {
            assert!((x - 1.0).abs() < 1e-4, "{:?}", r.x);
        }
    }

    #[test]
    fn seed_at_strict_minimum_is_kept() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>() + 3.0;
        let seed = [0.5, 0.5, 0.5, 0.5];
        let r = nelder_mead(f, &seed, &NelderMeadOptions::default()).unwrap();
        assert_eq!(r.x, seed);
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn infeasible_regions_are_avoided() {
        let f = |x: &[f64]| {
            if x[0] < 1.0 {
                f64::INFINITY
            } else {
                x[0] * x[0] + (x[1] - 2.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[3.0, 0.0], &tight()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn errors_and_budget() {
        let bad = nelder_mead(|_| f64::NAN, &[1.0, 1.0], &NelderMeadOptions::default());
        assert!(matches!(bad, Err(Error::Usage(_))));

        let opts = NelderMeadOptions {
            max_evals: 20,
            ..tight()
        };
        let r = nelder_mead(|x: &[f64]| x[0].powi(2) + x[1].powi(2), &[5.0, 5.0], &opts).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations >= 20);
    }
}
