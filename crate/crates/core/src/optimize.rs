//! Box-constrained Nelder–Mead maximization used to polish grid extrema.

use std::cell::Cell;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Simplex diameter (max-norm) below which the search may stop.
    pub x_tol: f64,
    /// Spread of objective values across the simplex, relative to `max(1, |f|)`.
    pub f_tol: f64,
    pub max_evaluations: usize,
    /// Edge length of the starting simplex.
    pub initial_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-12,
            max_evaluations: 100_000,
            initial_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RefineStatus {
    Converged,
    /// Objective was constant around the start; the start is returned.
    FlatObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refined {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub status: RefineStatus,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Maximizes `f` inside `bounds` starting from `start`. Points where `f` is
/// NaN are treated as worst possible.
pub fn maximize<F>(
    mut f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    tol: Tolerances,
) -> Result<Refined>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 || bounds.len() != n {
        return Err(Error::invalid(
            "start point and bounds must have the same nonzero length",
        ));
    }
    if bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid("each bound must satisfy lo <= hi"));
    }
    let evaluations = Cell::new(0usize);
    // minimize the negated objective
    let mut cost = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };

    let mut x0 = start.to_vec();
    clamp(&mut x0, bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = cost(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += tol.initial_step;
        clamp(&mut x, bounds);
        if x[i] == x0[i] {
            x[i] -= tol.initial_step;
            clamp(&mut x, bounds);
        }
        let fx = cost(&x);
        simplex.push((x, fx));
    }
    let flat = simplex
        .iter()
        .all(|(_, v)| (v - f0).abs() <= 1e-15 * f0.abs().max(1e-300) || *v == f0);
    if flat && f0.is_finite() {
        return Ok(Refined {
            point: x0,
            value: -f0,
            evaluations: evaluations.get(),
            status: RefineStatus::FlatObjective,
        });
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = (worst - best).abs();
        if diameter < tol.x_tol && spread <= tol.f_tol * best.abs().max(1.0) {
            return Ok(Refined {
                point: simplex[0].0.clone(),
                value: -best,
                evaluations: evaluations.get(),
                status: RefineStatus::Converged,
            });
        }
        if evaluations.get() >= tol.max_evaluations {
            return Err(Error::NoConvergence {
                evaluations: evaluations.get(),
                best_point: simplex[0].0.clone(),
                best_value: -best,
            });
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut x, bounds);
            x
        };

        let xr = along(alpha);
        let fr = cost(&xr);
        if fr < best {
            let xe = along(gamma);
            let fe = cost(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = along(rho);
            let fc = cost(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = cost(&xc);
            (xc, fc)
        };
        if fc < worst.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (v, a) in x.iter_mut().zip(&anchor) {
                *v = a + sigma * (*v - a);
            }
            clamp(x, bounds);
            *fx = cost(x);
        }
    }
}
