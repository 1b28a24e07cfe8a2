//! Forward simulation of two-parameter Itô processes and controlled states.

use std::sync::Arc;

use crate::calculus::{Field, PairField};
use crate::error::{Error, Result};
use crate::game::GameModel;
use crate::grid::{GridPoint, GridSpec, Point, SheetEnsemble};

pub type Coef = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type PairCoef = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;

/// `Y(z) = Y₀ + ∫α dζ + ∫β B(dζ) + ∬ψ B(dζ)B(dζ')` with `α, β` depending on
/// `(ζ, Y(ζ))` and `ψ` on the two points only.
#[derive(Clone)]
pub struct ProcessSpec {
    pub y0: f64,
    pub drift: Coef,
    pub diffusion: Coef,
    pub pair: Option<PairCoef>,
    /// Whether `drift`/`diffusion` read their `y` argument.
    pub state_dependent: bool,
}

impl std::fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("y0", &self.y0)
            .field("pair", &self.pair.is_some())
            .field("state_dependent", &self.state_dependent)
            .finish()
    }
}

impl ProcessSpec {
    pub fn new(
        y0: f64,
        drift: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { y0, drift: Arc::new(drift), diffusion: Arc::new(diffusion), pair: None, state_dependent: true }
    }

    pub fn constant(y0: f64, alpha: f64, beta: f64) -> Self {
        Self::new(y0, move |_, _| alpha, move |_, _| beta).state_free()
    }

    /// `Y = B`.
    pub fn sheet() -> Self {
        Self::constant(0.0, 0.0, 1.0)
    }

    pub fn with_pair(mut self, psi: impl Fn(Point, Point) -> f64 + Send + Sync + 'static) -> Self {
        self.pair = Some(Arc::new(psi));
        self
    }

    pub fn state_free(mut self) -> Self {
        self.state_dependent = false;
        self
    }
}

/// A simulated path together with the coefficients used on each cell.
#[derive(Debug, Clone)]
pub struct StatePath {
    pub grid: GridSpec,
    pub path: usize,
    /// `Y` at every node.
    pub y: Vec<f64>,
    /// `α` at each cell's lower-left corner state.
    pub alpha: Vec<f64>,
    /// `β` likewise.
    pub beta: Vec<f64>,
    /// Controls used, when simulated from a game model.
    pub controls: Option<(Vec<f64>, Vec<f64>)>,
}

impl StatePath {
    pub fn field(&self) -> Field {
        Field::from_values(self.grid, self.y.clone(), true).expect("state matches grid")
    }

    #[inline]
    pub fn at(&self, z: GridPoint) -> f64 {
        self.y[self.grid.node(z.i, z.j)]
    }
}

/// `ProcessSpec` bound to a grid, with `ψ` tabulated once.
pub struct Simulator {
    grid: GridSpec,
    spec: ProcessSpec,
    psi: Option<PairField>,
}

impl Simulator {
    pub fn new(spec: ProcessSpec, grid: GridSpec) -> Self {
        let psi = spec.pair.as_ref().map(|f| PairField::from_fn(grid, |a, b| f(a, b)));
        Self { grid, spec, psi }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn psi(&self) -> Option<&PairField> {
        self.psi.as_ref()
    }

    pub fn simulate(&self, ens: &SheetEnsemble, path: usize) -> Result<StatePath> {
        if ens.grid() != &self.grid {
            return Err(Error::Usage("process and ensemble grids differ".into()));
        }
        if path >= ens.n_paths() {
            return Err(Error::Usage(format!("path {path} out of range (n_paths = {})", ens.n_paths())));
        }
        let g = self.grid;
        let inc = ens.increments(path);
        let joins = self.psi.as_ref().map(|psi| join_sums(&g, psi, inc));
        let area = g.cell_area();
        let mut y = vec![self.spec.y0; g.n_nodes()];
        let mut alpha = vec![0.0; g.n_cells()];
        let mut beta = vec![0.0; g.n_cells()];
        for i in 0..g.nt {
            for j in 0..g.nx {
                let c = g.cell(i, j);
                let yc = y[g.node(i, j)];
                let p = Point::new(g.t(i), g.x(j));
                let a = (self.spec.drift)(p, yc);
                let b = (self.spec.diffusion)(p, yc);
                let e = joins.as_ref().map_or(0.0, |v| v[c]);
                let next = y[g.node(i + 1, j)] + y[g.node(i, j + 1)] - yc + a * area + b * inc[c] + e;
                if !next.is_finite() {
                    return Err(Error::Numerical { i, j, what: "state".into() });
                }
                alpha[c] = a;
                beta[c] = b;
                y[g.node(i + 1, j + 1)] = next;
            }
        }
        Ok(StatePath { grid: g, path, y, alpha, beta, controls: None })
    }
}

/// Per-cell sums of `ψ ΔB_a ΔB_b` over wedge pairs whose join is that cell:
/// `a = (i₀, j)`, `b = (i', j₀)` with `i₀ ≤ i'`, `j₀ ≤ j`, `a ≠ b`.
pub fn join_sums(g: &GridSpec, psi: &PairField, inc: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n_cells()];
    for i in 0..g.nt {
        for j in 0..g.nx {
            let mut s = 0.0;
            for i0 in 0..=i {
                let a = g.cell(i0, j);
                for j0 in 0..=j {
                    if i0 == i && j0 == j {
                        continue;
                    }
                    let b = g.cell(i, j0);
                    s += psi.at(a, b) * inc[a] * inc[b];
                }
            }
            out[g.cell(i, j)] = s;
        }
    }
    out
}

pub fn simulate_process(spec: &ProcessSpec, ens: &SheetEnsemble, path: usize) -> Result<StatePath> {
    Simulator::new(spec.clone(), *ens.grid()).simulate(ens, path)
}

/// Euler–Itô sweep of the game state on one path; `u1`, `u2`, `out` are node
/// arrays. Boundary nodes hold `y₀`.
pub fn controlled_sweep<M: GameModel + ?Sized>(
    model: &M,
    g: &GridSpec,
    u1: &[f64],
    u2: &[f64],
    inc: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let area = g.cell_area();
    out.fill(model.y0());
    for i in 0..g.nt {
        for j in 0..g.nx {
            let n = g.node(i, j);
            let yc = out[n];
            let p = Point::new(g.t(i), g.x(j));
            let a = model.drift(p, yc, u1[n], u2[n]);
            let b = model.diffusion(p, yc, u1[n], u2[n]);
            let next = out[g.node(i + 1, j)] + out[g.node(i, j + 1)] - yc + a * area + b * inc[g.cell(i, j)];
            if !next.is_finite() {
                return Err(Error::Numerical { i, j, what: "controlled state".into() });
            }
            out[g.node(i + 1, j + 1)] = next;
        }
    }
    Ok(())
}

pub fn simulate_controlled_state<M: GameModel + ?Sized>(
    model: &M,
    controls: (&Field, &Field),
    ens: &SheetEnsemble,
    path: usize,
) -> Result<StatePath> {
    let (u1, u2) = controls;
    if !u1.is_adapted() || !u2.is_adapted() {
        return Err(Error::Contract("controls must be adapted".into()));
    }
    let g = *ens.grid();
    if u1.grid() != &g || u2.grid() != &g {
        return Err(Error::Usage("control and ensemble grids differ".into()));
    }
    if path >= ens.n_paths() {
        return Err(Error::Usage(format!("path {path} out of range (n_paths = {})", ens.n_paths())));
    }
    let inc = ens.increments(path);
    let mut y = vec![0.0; g.n_nodes()];
    controlled_sweep(model, &g, u1.values(), u2.values(), inc, &mut y)?;
    let mut alpha = vec![0.0; g.n_cells()];
    let mut beta = vec![0.0; g.n_cells()];
    for c in g.cells() {
        let n = g.node(c.i, c.j);
        let p = g.point(c);
        alpha[g.cell(c.i, c.j)] = model.drift(p, y[n], u1.values()[n], u2.values()[n]);
        beta[g.cell(c.i, c.j)] = model.diffusion(p, y[n], u1.values()[n], u2.values()[n]);
    }
    Ok(StatePath {
        grid: g,
        path,
        y,
        alpha,
        beta,
        controls: Some((u1.values().to_vec(), u2.values().to_vec())),
    })
}
