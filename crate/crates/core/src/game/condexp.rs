//! `E[· | F_z]` across an ensemble: exact for targets affine in the sheet,
//! least squares on `{1, B(z), B(z)², Y(z), Y(z)²}` otherwise.

use crate::error::{Error, Result};
use crate::grid::{GridPoint, SheetEnsemble};
use crate::stats::pairwise_sum;

pub enum Target<'a> {
    /// `c + Σ w_cell ΔB_cell`.
    Affine { constant: f64, weights: &'a [f64] },
    /// One value per path.
    Samples(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub values: Vec<f64>,
    /// Basis columns discarded as (near-)collinear.
    pub dropped: Vec<&'static str>,
}

impl Projection {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped.is_empty()
    }
}

const BASIS: [&str; 5] = ["1", "B", "B^2", "Y", "Y^2"];

/// Least-squares projection of `target` onto `columns` by modified
/// Gram–Schmidt; columns whose residual norm falls below `1e-10` of their
/// original norm are skipped.
pub fn least_squares_fit(target: &[f64], columns: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (k, col) in columns.iter().enumerate() {
        let norm0 = pairwise_sum(&col.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        let mut v = col.clone();
        for q in &basis {
            let d = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        // second pass for stability
        for q in &basis {
            let d = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            dropped.push(k);
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    let mut fit = vec![0.0; target.len()];
    for q in &basis {
        let d = dot(q, target);
        fit.iter_mut().zip(q).for_each(|(a, b)| *a += d * b);
    }
    (fit, dropped)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
}

/// Per-path estimate of `E[target | F_z]`. `y_at_z` supplies the state
/// regressor `Y(z)` when available.
pub fn conditional_expectation(
    target: &Target<'_>,
    z: GridPoint,
    ens: &SheetEnsemble,
    y_at_z: Option<&[f64]>,
) -> Result<Projection> {
    let g = *ens.grid();
    g.check(z)?;
    let n = ens.n_paths();
    match target {
        Target::Affine { constant, weights } => {
            if weights.len() != g.n_cells() {
                return Err(Error::Usage("affine target weights do not match grid cells".into()));
            }
            let mut kept = Vec::new();
            for i in 0..z.i {
                for j in 0..z.j {
                    let c = g.cell(i, j);
                    if weights[c] != 0.0 {
                        kept.push((c, weights[c]));
                    }
                }
            }
            let values = (0..n)
                .map(|p| {
                    let inc = ens.increments(p);
                    constant + kept.iter().map(|&(c, w)| w * inc[c]).sum::<f64>()
                })
                .collect();
            Ok(Projection { values, dropped: Vec::new() })
        }
        Target::Samples(t) => {
            if t.len() != n {
                return Err(Error::Usage(format!("target has {} samples, ensemble has {n} paths", t.len())));
            }
            let b: Vec<f64> = (0..n).map(|p| ens.value_unchecked(p, z)).collect();
            let mut cols = vec![vec![1.0; n], b.clone(), b.iter().map(|v| v * v).collect()];
            if let Some(y) = y_at_z {
                if y.len() != n {
                    return Err(Error::Usage("state regressor length differs from path count".into()));
                }
                cols.push(y.to_vec());
                cols.push(y.iter().map(|v| v * v).collect());
            }
            let (values, dropped) = least_squares_fit(t, &cols);
            let dropped: Vec<&'static str> = dropped.into_iter().map(|k| BASIS[k]).collect();
            if !dropped.is_empty() {
                log::debug!("regression at ({}, {}) dropped {:?}", z.i, z.j, dropped);
            }
            Ok(Projection { values, dropped })
        }
    }
}
