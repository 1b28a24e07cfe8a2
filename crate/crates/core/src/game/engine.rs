//! Costs, adjoints, derivative processes and Gâteaux derivatives for a
//! [`GameModel`] on a grid.
//!
//! The discrete adjoint `ρ` of a cell is the sensitivity of the path cost to
//! the increment added at that cell. An increment at cell `(i,j)` moves `Y` at
//! every node `(i',j')` with `i' > i` and `j' > j`, so
//!
//! `ρ(i,j) = g'(Y(Z)) + Σ_{i'>i, j'>j} [∂_y f Δ + ρ (∂_y α Δ + ∂_y β ΔB)](i',j')`.
//!
//! Its conditional expectations give `p = E[ρ | F_z]` and
//! `q = E[ρ ΔB / Δ | F_z]`.

use rayon::prelude::*;
use serde::Serialize;

use super::condexp::{conditional_expectation, Target};
use super::model::{GameModel, Player};
use super::policy::{Controls, Direction};
use crate::calculus::{star, Field};
use crate::error::{Error, Result};
use crate::grid::{GridPoint, GridSpec, Point, SheetEnsemble};
use crate::process::{controlled_sweep, StatePath};
use crate::stats::MeanStat;

/// Node buffers for one path.
pub(crate) struct Scratch {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub y: Vec<f64>,
}

impl Scratch {
    pub fn new(g: &GridSpec) -> Self {
        let n = g.n_nodes();
        Self { u1: vec![0.0; n], u2: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn load(&mut self, controls: &Controls, ens: &SheetEnsemble, path: usize) {
        controls.u1.fill(ens, path, &mut self.u1);
        controls.u2.fill(ens, path, &mut self.u2);
    }
}

/// `Σ_cells f_i Δ + g_i(Y(Z))` on one path.
pub fn path_cost<M: GameModel + ?Sized>(model: &M, p: Player, g: &GridSpec, y: &[f64], u1: &[f64], u2: &[f64]) -> f64 {
    let a = g.cell_area();
    let mut s = 0.0;
    for i in 0..g.nt {
        for j in 0..g.nx {
            let n = g.node(i, j);
            s += model.running_cost(p, Point::new(g.t(i), g.x(j)), y[n], u1[n], u2[n]);
        }
    }
    s * a + model.terminal_cost(p, y[g.node(g.nt, g.nx)])
}

/// Ensemble costs `(J₁, J₂)`.
pub fn evaluate_costs<M: GameModel + ?Sized>(model: &M, controls: &Controls, ens: &SheetEnsemble) -> Result<[MeanStat; 2]> {
    controls.validate(ens)?;
    let g = *ens.grid();
    let rows: Vec<[f64; 2]> = (0..ens.n_paths())
        .into_par_iter()
        .map(|p| -> Result<[f64; 2]> {
            let mut s = Scratch::new(&g);
            s.load(controls, ens, p);
            controlled_sweep(model, &g, &s.u1, &s.u2, ens.increments(p), &mut s.y)?;
            Ok([
                path_cost(model, Player::One, &g, &s.y, &s.u1, &s.u2),
                path_cost(model, Player::Two, &g, &s.y, &s.u1, &s.u2),
            ])
        })
        .collect::<Result<_>>()?;
    let c1: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let c2: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    Ok([MeanStat::from_samples(&c1), MeanStat::from_samples(&c2)])
}

/// `ρ` at every node (nodes on the top and right edges carry `g'(Y(Z))`).
pub fn quadrant_adjoint<M: GameModel + ?Sized>(
    model: &M,
    p: Player,
    g: &GridSpec,
    y: &[f64],
    u1: &[f64],
    u2: &[f64],
    inc: &[f64],
) -> Vec<f64> {
    let a = g.cell_area();
    let gy = model.terminal_dy(p, y[g.node(g.nt, g.nx)]);
    let mut rho = vec![gy; g.n_nodes()];
    // suffix sums of h over nodes (i', j') with i' >= i, j' >= j
    let mut suf = vec![0.0; g.n_nodes()];
    for i in (0..g.nt).rev() {
        for j in (0..g.nx).rev() {
            let n = g.node(i, j);
            let r = gy + suf[g.node(i + 1, j + 1)];
            rho[n] = r;
            let z = Point::new(g.t(i), g.x(j));
            let h = model.cost_dy(p, z, y[n], u1[n], u2[n]) * a
                + r * (model.drift_dy(z, y[n], u1[n], u2[n]) * a
                    + model.diffusion_dy(z, y[n], u1[n], u2[n]) * inc[g.cell(i, j)]);
            suf[n] = h + suf[g.node(i + 1, j)] + suf[g.node(i, j + 1)] - suf[g.node(i + 1, j + 1)];
        }
    }
    rho
}

/// `dJ_i/dv_cell` for every cell's lower-left node (zero on the top/right
/// edges, which own no cell).
#[allow(clippy::too_many_arguments)]
pub fn cell_gradient<M: GameModel + ?Sized>(
    model: &M,
    p: Player,
    g: &GridSpec,
    y: &[f64],
    u1: &[f64],
    u2: &[f64],
    inc: &[f64],
    rho: &[f64],
) -> Vec<f64> {
    let a = g.cell_area();
    let mut out = vec![0.0; g.n_nodes()];
    for i in 0..g.nt {
        for j in 0..g.nx {
            let n = g.node(i, j);
            let z = Point::new(g.t(i), g.x(j));
            out[n] = (model.cost_du(p, z, y[n], u1[n], u2[n]) + rho[n] * model.drift_du(p, z, y[n], u1[n], u2[n])) * a
                + rho[n] * model.diffusion_du(p, z, y[n], u1[n], u2[n]) * inc[g.cell(i, j)];
        }
    }
    out
}

/// Forward sweep of the linearized state for a perturbation `v` of player
/// `p`'s control.
#[allow(clippy::too_many_arguments)]
pub fn derivative_sweep<M: GameModel + ?Sized>(
    model: &M,
    p: Player,
    g: &GridSpec,
    y: &[f64],
    u1: &[f64],
    u2: &[f64],
    v: &[f64],
    inc: &[f64],
) -> Vec<f64> {
    let a = g.cell_area();
    let mut gv = vec![0.0; g.n_nodes()];
    for i in 0..g.nt {
        for j in 0..g.nx {
            let n = g.node(i, j);
            let z = Point::new(g.t(i), g.x(j));
            let (yy, a1, a2) = (y[n], u1[n], u2[n]);
            let d = (model.drift_dy(z, yy, a1, a2) * gv[n] + model.drift_du(p, z, yy, a1, a2) * v[n]) * a
                + (model.diffusion_dy(z, yy, a1, a2) * gv[n] + model.diffusion_du(p, z, yy, a1, a2) * v[n])
                    * inc[g.cell(i, j)];
            gv[g.node(i + 1, j + 1)] = gv[g.node(i + 1, j)] + gv[g.node(i, j + 1)] - gv[n] + d;
        }
    }
    gv
}

/// Derivative process `G` of the state along `v` on the path of `state`.
pub fn simulate_g<M: GameModel + ?Sized>(
    model: &M,
    p: Player,
    state: &StatePath,
    v: &Field,
    ens: &SheetEnsemble,
) -> Result<Field> {
    if !v.is_adapted() {
        return Err(Error::Contract("perturbation direction must be adapted".into()));
    }
    let (u1, u2) = state
        .controls
        .as_ref()
        .ok_or_else(|| Error::Usage("state path carries no controls".into()))?;
    let g = state.grid;
    let gv = derivative_sweep(model, p, &g, &state.y, u1, u2, v.values(), ens.increments(state.path));
    Field::from_values(g, gv, true)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GateauxOptions {
    /// Finite-difference step relative to `max(1, sup|u_i|)`.
    pub eps_rel: f64,
    pub rel_tol: f64,
    pub k_sigma: f64,
}

impl Default for GateauxOptions {
    fn default() -> Self {
        Self { eps_rel: 1e-5, rel_tol: 1e-4, k_sigma: 3.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GateauxReport {
    pub player: Player,
    pub direction: String,
    pub epsilon: f64,
    /// Central difference `(J(u+εv) − J(u−εv)) / 2ε`, common random numbers.
    pub finite_difference: f64,
    pub fd_stderr: f64,
    /// `E[Σ ∂H/∂u · v Δ]` with `p, q` replaced by the pathwise adjoint.
    pub hamiltonian: f64,
    pub hamiltonian_stderr: f64,
    pub diff: f64,
    pub diff_stderr: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Both estimates of `d/dε J_i(u_i + εv)` at `ε = 0`.
pub fn gateaux_j<M: GameModel + ?Sized>(
    model: &M,
    p: Player,
    controls: &Controls,
    dir: &Direction,
    ens: &SheetEnsemble,
    opts: GateauxOptions,
) -> Result<GateauxReport> {
    controls.validate(ens)?;
    let g = *ens.grid();
    if dir.field.grid() != &g {
        return Err(Error::Usage("direction and ensemble grids differ".into()));
    }
    let mean_u = controls.get(p).mean(ens);
    let scale = mean_u.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = opts.eps_rel * scale;
    let v = dir.field.values();
    let rows: Vec<[f64; 2]> = (0..ens.n_paths())
        .into_par_iter()
        .map(|path| -> Result<[f64; 2]> {
            let inc = ens.increments(path);
            let mut s = Scratch::new(&g);
            s.load(controls, ens, path);
            controlled_sweep(model, &g, &s.u1, &s.u2, inc, &mut s.y)?;
            let rho = quadrant_adjoint(model, p, &g, &s.y, &s.u1, &s.u2, inc);
            let grad = cell_gradient(model, p, &g, &s.y, &s.u1, &s.u2, inc, &rho);
            let ham: f64 = grad.iter().zip(v).map(|(a, b)| a * b).sum();
            let mut y2 = vec![0.0; g.n_nodes()];
            let mut cost = |sign: f64| -> Result<f64> {
                let (mut a1, mut a2) = (s.u1.clone(), s.u2.clone());
                let own = if p == Player::One { &mut a1 } else { &mut a2 };
                own.iter_mut().zip(v).for_each(|(u, d)| *u += sign * eps * d);
                controlled_sweep(model, &g, &a1, &a2, inc, &mut y2)?;
                Ok(path_cost(model, p, &g, &y2, &a1, &a2))
            };
            let fd = (cost(1.0)? - cost(-1.0)?) / (2.0 * eps);
            Ok([fd, ham])
        })
        .collect::<Result<_>>()?;
    let fd = MeanStat::from_samples(&rows.iter().map(|r| r[0]).collect::<Vec<_>>());
    let ham = MeanStat::from_samples(&rows.iter().map(|r| r[1]).collect::<Vec<_>>());
    let diff = MeanStat::from_samples(&rows.iter().map(|r| r[0] - r[1]).collect::<Vec<_>>());
    let tolerance = (opts.rel_tol * fd.mean.abs().max(ham.mean.abs())).max(opts.k_sigma * diff.stderr);
    let pass = diff.mean.abs() <= tolerance;
    if !pass {
        log::warn!(
            "gradient mismatch for player {p} along {}: fd {} vs hamiltonian {} (tol {tolerance:e})",
            dir.id,
            fd.mean,
            ham.mean
        );
    }
    Ok(GateauxReport {
        player: p,
        direction: dir.id.clone(),
        epsilon: eps,
        finite_difference: fd.mean,
        fd_stderr: fd.stderr,
        hamiltonian: ham.mean,
        hamiltonian_stderr: ham.stderr,
        diff: diff.mean,
        diff_stderr: diff.stderr,
        tolerance,
        pass,
    })
}

/// `α(·, y, u₁, u₂)` as a field over the grid, state and controls frozen.
fn frozen_field(g: &GridSpec, f: impl Fn(Point) -> f64) -> Field {
    Field::from_fn(*g, f)
}

/// `H_i = f_i + α p + β q + (L ⋆ α)(z)`, the `⋆` horizon at the grid corner.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian<M: GameModel + ?Sized>(
    model: &M,
    player: Player,
    z: GridPoint,
    g: &GridSpec,
    y: f64,
    u1: f64,
    u2: f64,
    p: f64,
    q: f64,
    l: &Field,
) -> Result<f64> {
    g.check(z)?;
    let pt = g.point(z);
    let alpha = frozen_field(g, |s| model.drift(s, y, u1, u2));
    let st = star(l, &alpha, z, g.corner())?;
    Ok(model.running_cost(player, pt, y, u1, u2) + model.drift(pt, y, u1, u2) * p + model.diffusion(pt, y, u1, u2) * q + st)
}

/// `∂H_i/∂u_i`, the `⋆` term taken as `L ⋆ ∂α/∂u_i`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_du<M: GameModel + ?Sized>(
    model: &M,
    player: Player,
    z: GridPoint,
    g: &GridSpec,
    y: f64,
    u1: f64,
    u2: f64,
    p: f64,
    q: f64,
    l: &Field,
) -> Result<f64> {
    g.check(z)?;
    let pt = g.point(z);
    let da = frozen_field(g, |s| model.drift_du(player, s, y, u1, u2));
    let st = star(l, &da, z, g.corner())?;
    Ok(model.cost_du(player, pt, y, u1, u2)
        + model.drift_du(player, pt, y, u1, u2) * p
        + model.diffusion_du(player, pt, y, u1, u2) * q
        + st)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AdjointConvention {
    /// `p(z) = E[g'(Y(Z)) + sign·∫_{R_Z∖R_z} ∂H/∂y | F_z]`; requires
    /// `∂α/∂y = ∂β/∂y = 0`.
    Complement { p_sign: f64 },
    /// `p(z) = E[ρ(z) | F_z]` with the discrete adjoint above.
    Quadrant,
}

/// Adjoint data for one player over an ensemble (`n_paths * n_nodes`).
#[derive(Debug, Clone)]
pub struct AdjointState {
    pub player: Player,
    pub convention: AdjointConvention,
    pub grid: GridSpec,
    pub p: Vec<f64>,
    /// `L = −∂H/∂y` along the solution.
    pub l: Vec<f64>,
    /// Nodes whose regression dropped basis columns.
    pub rank_deficient_nodes: usize,
    /// `max |p(Z) − g'(Y(Z))|` over paths.
    pub terminal_residual: f64,
}

impl AdjointState {
    pub fn p_field(&self, path: usize) -> Field {
        let nn = self.grid.n_nodes();
        Field::from_values(self.grid, self.p[path * nn..(path + 1) * nn].to_vec(), true).expect("shape")
    }

    pub fn l_field(&self, path: usize) -> Field {
        let nn = self.grid.n_nodes();
        Field::from_values(self.grid, self.l[path * nn..(path + 1) * nn].to_vec(), true).expect("shape")
    }
}

/// Adjoint `p_i` by conditional expectation of a pathwise target, for models
/// where `∂H_i/∂y` does not involve `(p_i, q_i)` under the complement form.
pub fn solve_adjoint_linear<M: GameModel + ?Sized>(
    model: &M,
    player: Player,
    controls: &Controls,
    ens: &SheetEnsemble,
    convention: AdjointConvention,
) -> Result<AdjointState> {
    controls.validate(ens)?;
    let g = *ens.grid();
    let nn = g.n_nodes();
    let a = g.cell_area();
    struct PathData {
        y: Vec<f64>,
        target: Vec<f64>,
        dfy: Vec<f64>,
        day: Vec<f64>,
        gy: f64,
    }
    let paths: Vec<PathData> = (0..ens.n_paths())
        .into_par_iter()
        .map(|path| -> Result<PathData> {
            let inc = ens.increments(path);
            let mut s = Scratch::new(&g);
            s.load(controls, ens, path);
            controlled_sweep(model, &g, &s.u1, &s.u2, inc, &mut s.y)?;
            let mut dfy = vec![0.0; nn];
            let mut day = vec![0.0; nn];
            for z in g.nodes() {
                let n = g.node(z.i, z.j);
                let pt = g.point(z);
                dfy[n] = model.cost_dy(player, pt, s.y[n], s.u1[n], s.u2[n]);
                day[n] = model.drift_dy(pt, s.y[n], s.u1[n], s.u2[n]);
            }
            let gy = model.terminal_dy(player, s.y[g.node(g.nt, g.nx)]);
            let target = match convention {
                AdjointConvention::Quadrant => quadrant_adjoint(model, player, &g, &s.y, &s.u1, &s.u2, inc),
                AdjointConvention::Complement { p_sign } => {
                    for c in g.cells() {
                        let n = g.node(c.i, c.j);
                        let pt = g.point(c);
                        let dby = model.diffusion_dy(pt, s.y[n], s.u1[n], s.u2[n]);
                        if day[n] != 0.0 || dby != 0.0 {
                            return Err(Error::Unsupported(
                                "complement adjoint needs state-free drift and diffusion".into(),
                            ));
                        }
                    }
                    // Σ over cells outside R_z = total − inside
                    let mut inside = vec![0.0; nn];
                    let mut cells = vec![0.0; g.n_cells()];
                    for c in g.cells() {
                        cells[g.cell(c.i, c.j)] = dfy[g.node(c.i, c.j)] * a;
                    }
                    crate::grid::prefix_sums(&g, &cells, &mut inside);
                    let total = inside[g.node(g.nt, g.nx)];
                    inside.iter().map(|v| gy + p_sign * (total - v)).collect()
                }
            };
            Ok(PathData { y: s.y, target, dfy, day, gy })
        })
        .collect::<Result<_>>()?;

    let n_paths = ens.n_paths();
    let mut p = vec![0.0; n_paths * nn];
    let mut rank_deficient_nodes = 0;
    let corner = g.node(g.nt, g.nx);
    let projections: Vec<(usize, Result<super::condexp::Projection>)> = g
        .nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|z| {
            let n = g.node(z.i, z.j);
            let t: Vec<f64> = paths.iter().map(|d| d.target[n]).collect();
            if n == corner {
                return (n, Ok(super::condexp::Projection { values: t, dropped: Vec::new() }));
            }
            let y: Vec<f64> = paths.iter().map(|d| d.y[n]).collect();
            (n, conditional_expectation(&Target::Samples(&t), z, ens, Some(&y)))
        })
        .collect();
    for (n, proj) in projections {
        let proj = proj?;
        // axes carry no information; dropping B columns there is expected
        let (i, j) = (n / (g.nx + 1), n % (g.nx + 1));
        if proj.dropped.iter().any(|d| d.starts_with('B')) && i > 0 && j > 0 {
            rank_deficient_nodes += 1;
        }
        for (path, v) in proj.values.into_iter().enumerate() {
            p[path * nn + n] = v;
        }
    }
    if rank_deficient_nodes > 0 {
        log::warn!("conditional expectation fell back to a smaller basis at {rank_deficient_nodes} nodes");
    }
    let mut l = vec![0.0; n_paths * nn];
    let mut terminal_residual = 0.0f64;
    for (path, d) in paths.iter().enumerate() {
        for n in 0..nn {
            l[path * nn + n] = -(d.dfy[n] + p[path * nn + n] * d.day[n]);
        }
        terminal_residual = terminal_residual.max((p[path * nn + corner] - d.gy).abs());
    }
    Ok(AdjointState { player, convention, grid: g, p, l, rank_deficient_nodes, terminal_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::model::LqModel;
    use crate::game::policy::Policy;

    #[test]
    fn lq_deterministic_gradient_closed_form() {
        // α = u1 + u2, f₁ = a u1², g₁ = c y²  →  dJ/dε along v ≡ 1
        let (a1, c1, y0, u1, u2) = (1.0, 1.0, 1.0, 0.3, -0.1);
        let m = LqModel { y0, r: [2.0 * a1, 2.0], h: [2.0 * c1, 2.0], ..Default::default() };
        let g = GridSpec::unit(4);
        let e = SheetEnsemble::sample(g, 1, 1).unwrap();
        let ctl = Controls::new(Policy::constant(g, u1), Policy::constant(g, u2));
        let r = gateaux_j(&m, Player::One, &ctl, &Direction::constant(g), &e, GateauxOptions::default()).unwrap();
        let want = 2.0 * a1 * u1 + 2.0 * c1 * (y0 + (u1 + u2));
        assert!((r.hamiltonian - want).abs() < 1e-12 * want.abs().max(1.0));
        assert!((r.finite_difference - want).abs() < 1e-6 * want.abs().max(1.0));
        assert!(r.pass);
    }

    #[test]
    fn zero_direction_gives_zero() {
        let m = LqModel { s0: 1.0, ..Default::default() };
        let g = GridSpec::unit(4);
        let e = SheetEnsemble::sample(g, 1, 20).unwrap();
        let ctl = Controls::new(Policy::constant(g, 0.2), Policy::constant(g, 0.0));
        let dir = Direction::custom("zero", Field::zeros(g)).unwrap();
        let r = gateaux_j(&m, Player::One, &ctl, &dir, &e, GateauxOptions::default()).unwrap();
        assert_eq!(r.finite_difference, 0.0);
        assert_eq!(r.hamiltonian, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn adjoint_matches_finite_difference_per_cell() {
        let m = LqModel { ay: -0.7, ayu: 0.4, sy: 0.3, s0: 0.5, d1: 0.2, q: [1.0, 0.5], m: [0.2, 0.0], ..Default::default() };
        let g = GridSpec::unit(4);
        let e = SheetEnsemble::sample(g, 5, 1).unwrap();
        let u1: Vec<f64> = (0..g.n_nodes()).map(|n| 0.1 * (n as f64).sin()).collect();
        let u2 = vec![0.2; g.n_nodes()];
        let inc = e.increments(0);
        let mut y = vec![0.0; g.n_nodes()];
        controlled_sweep(&m, &g, &u1, &u2, inc, &mut y).unwrap();
        let rho = quadrant_adjoint(&m, Player::One, &g, &y, &u1, &u2, inc);
        let grad = cell_gradient(&m, Player::One, &g, &y, &u1, &u2, inc, &rho);
        let h = 1e-6;
        for c in g.cells() {
            let n = g.node(c.i, c.j);
            let cost = |d: f64| {
                let mut a = u1.clone();
                a[n] += d;
                let mut yy = vec![0.0; g.n_nodes()];
                controlled_sweep(&m, &g, &a, &u2, inc, &mut yy).unwrap();
                path_cost(&m, Player::One, &g, &yy, &a, &u2)
            };
            let fd = (cost(h) - cost(-h)) / (2.0 * h);
            assert!((fd - grad[n]).abs() < 1e-7, "{c:?}: {fd} vs {}", grad[n]);
        }
    }

    #[test]
    fn hamiltonian_example_value() {
        // a₁u₁² + (u₁+u₂)p₁ + σq₁ with L ≡ 0
        let m = LqModel { r: [2.0, 2.0], s0: 1.0, h: [0.0, 0.0], ..Default::default() };
        let g = GridSpec::unit(4);
        let h = hamiltonian(&m, Player::One, GridPoint::new(1, 2), &g, 0.7, 2.0, 1.0, 3.0, 0.5, &Field::zeros(g)).unwrap();
        assert!((h - 13.5).abs() < 1e-12);
        let zero = LqModel { b1: 0.0, b2: 0.0, r: [0.0, 0.0], h: [0.0, 0.0], ..Default::default() };
        assert_eq!(hamiltonian(&zero, Player::One, GridPoint::new(0, 0), &g, 0.0, 0.0, 0.0, 0.0, 0.0, &Field::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn complement_rejects_state_dependent_drift() {
        let m = LqModel { ay: 0.5, ..Default::default() };
        let g = GridSpec::unit(2);
        let e = SheetEnsemble::sample(g, 5, 3).unwrap();
        let ctl = Controls::new(Policy::constant(g, 0.0), Policy::constant(g, 0.0));
        let r = solve_adjoint_linear(&m, Player::One, &ctl, &e, AdjointConvention::Complement { p_sign: -1.0 });
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
