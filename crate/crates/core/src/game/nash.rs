//! Unilateral-deviation check of a control pair.

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{cell_gradient, path_cost, quadrant_adjoint, Scratch};
use super::model::{GameModel, Player};
use super::policy::{Controls, Direction};
use crate::error::Result;
use crate::grid::SheetEnsemble;
use crate::process::controlled_sweep;
use crate::stats::MeanStat;

#[derive(Debug, Clone, Serialize)]
pub struct NashOptions {
    /// Perturbation sizes, relative to `max(1, sup|E u_i|)`.
    pub magnitudes: Vec<f64>,
    pub k_sigma: f64,
    /// Absolute slack on cost increases, relative to `max(1, |J_i|)`.
    pub cost_tol: f64,
    /// Slack on the first-order condition, relative to `max(1, |J_i|)`.
    pub stationarity_tol: f64,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self { magnitudes: vec![0.1, 0.01, 0.001], k_sigma: 3.0, cost_tol: 1e-9, stationarity_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NashEntry {
    pub player: Player,
    pub direction: String,
    pub epsilon: f64,
    /// `J_i(u_i + εv, u_{-i}) − J_i(u)`.
    pub delta_j: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityEntry {
    pub player: Player,
    pub direction: String,
    /// `E[Σ ∂H_i/∂u_i · v Δ]`.
    pub derivative: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub costs: [MeanStat; 2],
    pub entries: Vec<NashEntry>,
    pub stationarity: Vec<StationarityEntry>,
    pub pass: bool,
}

impl NashReport {
    /// The most negative cost change relative to its allowance.
    pub fn worst(&self) -> Option<&NashEntry> {
        self.entries.iter().min_by(|a, b| a.delta_j.total_cmp(&b.delta_j))
    }
}

/// Perturb each player's control along each direction with both signs and
/// every magnitude, holding the other player fixed.
pub fn check_nash<M: GameModel + ?Sized>(
    model: &M,
    controls: &Controls,
    dirs: &[Direction],
    ens: &SheetEnsemble,
    opts: &NashOptions,
) -> Result<NashReport> {
    controls.validate(ens)?;
    let g = *ens.grid();
    let scales: Vec<f64> = Player::BOTH
        .iter()
        .map(|&p| controls.get(p).mean(ens).values().iter().fold(1.0f64, |m, v| m.max(v.abs())))
        .collect();
    // (player, dir, signed epsilon)
    let mut perts = Vec::new();
    for &p in &Player::BOTH {
        for (d, _) in dirs.iter().enumerate() {
            for &m in &opts.magnitudes {
                for s in [1.0, -1.0] {
                    perts.push((p, d, s * m * scales[p.index()]));
                }
            }
        }
    }
    let n_stat = 2 * dirs.len();
    let rows: Vec<(Vec<f64>, Vec<f64>, [f64; 2])> = (0..ens.n_paths())
        .into_par_iter()
        .map(|path| -> Result<_> {
            let inc = ens.increments(path);
            let mut s = Scratch::new(&g);
            s.load(controls, ens, path);
            controlled_sweep(model, &g, &s.u1, &s.u2, inc, &mut s.y)?;
            let base = [
                path_cost(model, Player::One, &g, &s.y, &s.u1, &s.u2),
                path_cost(model, Player::Two, &g, &s.y, &s.u1, &s.u2),
            ];
            let mut stat = Vec::with_capacity(n_stat);
            for &p in &Player::BOTH {
                let rho = quadrant_adjoint(model, p, &g, &s.y, &s.u1, &s.u2, inc);
                let grad = cell_gradient(model, p, &g, &s.y, &s.u1, &s.u2, inc, &rho);
                for d in dirs {
                    stat.push(grad.iter().zip(d.field.values()).map(|(a, b)| a * b).sum());
                }
            }
            let mut y2 = vec![0.0; g.n_nodes()];
            let mut deltas = Vec::with_capacity(perts.len());
            for &(p, d, eps) in &perts {
                let (mut a1, mut a2) = (s.u1.clone(), s.u2.clone());
                let (lo, hi) = model.control_set(p);
                let own = if p == Player::One { &mut a1 } else { &mut a2 };
                own.iter_mut().zip(dirs[d].field.values()).for_each(|(u, v)| *u = (*u + eps * v).clamp(lo, hi));
                controlled_sweep(model, &g, &a1, &a2, inc, &mut y2)?;
                deltas.push(path_cost(model, p, &g, &y2, &a1, &a2) - base[p.index()]);
            }
            Ok((deltas, stat, base))
        })
        .collect::<Result<_>>()?;

    let costs = [
        MeanStat::from_samples(&rows.iter().map(|r| r.2[0]).collect::<Vec<_>>()),
        MeanStat::from_samples(&rows.iter().map(|r| r.2[1]).collect::<Vec<_>>()),
    ];
    let column = |k: usize, stat: bool| -> MeanStat {
        let v: Vec<f64> = rows.iter().map(|r| if stat { r.1[k] } else { r.0[k] }).collect();
        MeanStat::from_samples(&v)
    };
    let mut entries = Vec::with_capacity(perts.len());
    for (k, &(p, d, eps)) in perts.iter().enumerate() {
        let m = column(k, false);
        let tol = opts.k_sigma * m.stderr + opts.cost_tol * costs[p.index()].mean.abs().max(1.0);
        entries.push(NashEntry {
            player: p,
            direction: dirs[d].id.clone(),
            epsilon: eps,
            delta_j: m.mean,
            stderr: m.stderr,
            pass: m.mean >= -tol,
        });
    }
    let mut stationarity = Vec::with_capacity(n_stat);
    for (k, (p, d)) in Player::BOTH.iter().flat_map(|&p| dirs.iter().map(move |d| (p, d))).enumerate() {
        let m = column(k, true);
        let tol = opts.k_sigma * m.stderr + opts.stationarity_tol * costs[p.index()].mean.abs().max(1.0);
        stationarity.push(StationarityEntry {
            player: p,
            direction: d.id.clone(),
            derivative: m.mean,
            stderr: m.stderr,
            pass: m.mean.abs() <= tol,
        });
    }
    let pass = entries.iter().all(|e| e.pass) && stationarity.iter().all(|e| e.pass);
    if !pass {
        if let Some(w) = entries.iter().filter(|e| !e.pass).min_by(|a, b| a.delta_j.total_cmp(&b.delta_j)) {
            log::info!("player {} improves by {:e} along {} (eps {})", w.player, -w.delta_j, w.direction, w.epsilon);
        }
    }
    Ok(NashReport { costs, entries, stationarity, pass })
}
