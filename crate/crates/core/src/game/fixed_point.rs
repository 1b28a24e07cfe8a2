//! Damped Picard iteration with step halving; oscillating residuals shrink
//! the damping to the secant estimate.

use serde::Serialize;

use crate::calculus::Field;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub min_damping: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 200, tol: 1e-8, min_damping: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardTrace {
    pub iterations: usize,
    /// `max |F(x_k) - x_k|` for each accepted iterate.
    pub residuals: Vec<f64>,
    pub final_damping: f64,
    pub rejected_steps: usize,
}

impl PicardTrace {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterate `x ← x + θ(F(x) − x)`. A step that increases the residual is
/// rejected and `θ` halved.
pub fn damped_picard(
    x0: Vec<f64>,
    mut map: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    opts: PicardOptions,
) -> Result<(Vec<f64>, PicardTrace)> {
    let mut x = x0;
    let mut fx = map(&x)?;
    let mut r = sup_dist(&fx, &x);
    let mut theta = opts.damping;
    let mut trace = PicardTrace { iterations: 0, residuals: vec![r], final_damping: theta, rejected_steps: 0 };
    while r > opts.tol {
        if trace.iterations >= opts.max_iter || theta < opts.min_damping || !r.is_finite() {
            return Err(Error::Convergence { iterations: trace.iterations, residual: r });
        }
        trace.iterations += 1;
        let cand: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + theta * (b - a)).collect();
        let fc = map(&cand)?;
        let rc = sup_dist(&fc, &cand);
        if rc > r {
            theta *= 0.5;
            trace.rejected_steps += 1;
            log::debug!("picard step rejected ({rc:e} > {r:e}); damping now {theta}");
            continue;
        }
        // oscillating residuals: r_new ≈ ρ r_old with ρ = 1 − θ(1 − λ), so
        // θ/(1 − ρ) removes the dominant mode
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..x.len() {
            let (old, new) = (fx[k] - x[k], fc[k] - cand[k]);
            num += old * new;
            den += old * old;
        }
        let rho = if den > 0.0 { num / den } else { 0.0 };
        if rho < -0.1 {
            theta = (theta / (1.0 - rho)).clamp(opts.min_damping, 1.0);
        }
        x = cand;
        fx = fc;
        r = rc;
        trace.residuals.push(r);
    }
    trace.final_damping = theta;
    Ok((x, trace))
}

/// Solve `L = −∂H/∂y(L)`. When `∂H/∂y` does not involve `L` the map is
/// evaluated once.
pub fn solve_l(
    dh_dy: impl Fn(&Field) -> Result<Field>,
    depends_on_l: bool,
    init: Field,
    opts: PicardOptions,
) -> Result<(Field, PicardTrace)> {
    let grid = *init.grid();
    if !depends_on_l {
        let l = dh_dy(&init)?.map(|v| -v);
        let trace = PicardTrace { iterations: 0, residuals: vec![0.0], final_damping: opts.damping, rejected_steps: 0 };
        return Ok((l.with_adapted(true), trace));
    }
    let adapted = init.is_adapted();
    let (v, trace) = damped_picard(
        init.into_values(),
        |x| {
            let l = Field::from_values(grid, x.to_vec(), adapted)?;
            Ok(dh_dy(&l)?.values().iter().map(|v| -v).collect())
        },
        opts,
    )?;
    Ok((Field::from_values(grid, v, adapted)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn contraction_converges() {
        let (x, t) = damped_picard(vec![0.0], |x| Ok(vec![0.5 * x[0] + 1.0]), PicardOptions::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-7);
        assert!(t.final_residual() <= 1e-8);
    }

    #[test]
    fn oscillating_map_needs_halving() {
        // F(x) = -4x + 1: plain iteration diverges, θ = 1/4 contracts
        let (x, t) = damped_picard(vec![0.0], |x| Ok(vec![-4.0 * x[0] + 1.0]), PicardOptions::default()).unwrap();
        assert!((x[0] - 0.2).abs() < 1e-8);
        assert!(t.rejected_steps >= 1);
    }

    #[test]
    fn strong_negative_slope_converges_quickly() {
        // θ = 0.5 alone contracts at 0.97 per step
        let (x, t) = damped_picard(vec![0.0], |x| Ok(vec![-2.94 * x[0] + 1.0]), PicardOptions::default()).unwrap();
        assert!((x[0] - 1.0 / 3.94).abs() < 1e-8);
        assert!(t.iterations < 20, "{}", t.iterations);
    }

    #[test]
    fn expanding_map_reports_convergence_error() {
        let r = damped_picard(vec![0.0], |x| Ok(vec![3.0 * x[0] + 1.0]), PicardOptions::default());
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn l_without_self_reference() {
        let g = GridSpec::unit(3);
        let y = Field::from_fn(g, |p| p.t + p.x);
        let (l, _) = solve_l(|_| Ok(y.clone()), false, Field::zeros(g), PicardOptions::default()).unwrap();
        assert!(l.max_abs_diff(&y.map(|v| -v)) == 0.0);
    }
}
