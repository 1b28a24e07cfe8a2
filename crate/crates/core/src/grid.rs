//! Space-time lattice over `[0,T]x[0,X]` and Brownian-sheet ensembles on it.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Rectangular lattice with `nt x nx` cells. Nodes are indexed `i*(nx+1)+j`,
/// cells `i*nx+j`; cell `(i,j)` has lower-left corner at node `(i,j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_max: f64,
    pub x_max: f64,
    pub nt: usize,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: f64,
}

impl Point {
    pub const fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
}

impl GridPoint {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl GridSpec {
    pub fn new(t_max: f64, x_max: f64, nt: usize, nx: usize) -> Result<Self> {
        let g = Self { t_max, x_max, nt, nx };
        g.validate()?;
        Ok(g)
    }

    pub fn unit(n: usize) -> Self {
        Self { t_max: 1.0, x_max: 1.0, nt: n, nx: n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::Config(format!("grid.T must be positive, got {}", self.t_max)));
        }
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::Config(format!("grid.X must be positive, got {}", self.x_max)));
        }
        if self.nt == 0 || self.nx == 0 {
            return Err(Error::Config(format!(
                "grid cell counts must be >= 1, got nt={} nx={}",
                self.nt, self.nx
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.nx as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn n_nodes(&self) -> usize {
        (self.nt + 1) * (self.nx + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.nt * self.nx
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.nx + 1) + j
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.nx + j
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn point(&self, g: GridPoint) -> Point {
        Point::new(self.t(g.i), self.x(g.j))
    }

    pub fn corner(&self) -> GridPoint {
        GridPoint::new(self.nt, self.nx)
    }

    pub fn contains(&self, g: GridPoint) -> bool {
        g.i <= self.nt && g.j <= self.nx
    }

    pub fn check(&self, g: GridPoint) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "grid point ({}, {}) outside {}x{} lattice",
                g.i, g.j, self.nt, self.nx
            )))
        }
    }

    /// Snap a physical point onto the lattice; fails unless it sits on a node.
    pub fn locate(&self, p: Point) -> Result<GridPoint> {
        let fi = p.t / self.dt();
        let fj = p.x / self.dx();
        let (ri, rj) = (fi.round(), fj.round());
        let tol = 1e-9 * (1.0 + fi.abs().max(fj.abs()));
        if (fi - ri).abs() > tol || (fj - rj).abs() > tol || ri < 0.0 || rj < 0.0 {
            return Err(Error::Usage(format!("point ({}, {}) is not a grid node", p.t, p.x)));
        }
        let g = GridPoint::new(ri as usize, rj as usize);
        self.check(g)?;
        Ok(g)
    }

    /// Same horizons with half the cells per axis.
    pub fn coarsened(&self) -> Option<Self> {
        (self.nt.is_multiple_of(2) && self.nx.is_multiple_of(2) && self.nt >= 2 && self.nx >= 2).then_some(Self {
            nt: self.nt / 2,
            nx: self.nx / 2,
            ..*self
        })
    }

    pub fn refined(&self) -> Self {
        Self { nt: self.nt * 2, nx: self.nx * 2, ..*self }
    }

    pub fn nodes(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..=self.nt).flat_map(move |i| (0..=self.nx).map(move |j| GridPoint::new(i, j)))
    }

    pub fn cells(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.nt).flat_map(move |i| (0..self.nx).map(move |j| GridPoint::new(i, j)))
    }
}

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Fill `out` with the standard normal draws of one path. Draw `k` sits at
/// word position `2k` of the ChaCha stream `path` keyed by `seed`.
fn fill_path(seed: u64, path: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos(0);
    for v in out.iter_mut() {
        *v = normal_quantile(open_unit(rng.next_u64()));
    }
}

/// Single standard normal draw for `(seed, path, cell)`.
pub fn keyed_normal(seed: u64, path: u64, cell: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos(2 * cell as u128);
    normal_quantile(open_unit(rng.next_u64()))
}

/// Seeded collection of sheet paths: per-cell increments and node values.
#[derive(Debug, Clone)]
pub struct SheetEnsemble {
    grid: GridSpec,
    seed: u64,
    first_path: u64,
    n_paths: usize,
    increments: Vec<f64>,
    values: Vec<f64>,
}

impl SheetEnsemble {
    /// Paths `0..n_paths` for `seed`.
    pub fn sample(grid: GridSpec, seed: u64, n_paths: usize) -> Result<Self> {
        Self::sample_range(grid, seed, 0, n_paths)
    }

    /// Paths `first..first+n_paths`; path `k` is identical to path `k` of any
    /// other range containing it.
    pub fn sample_range(grid: GridSpec, seed: u64, first: u64, n_paths: usize) -> Result<Self> {
        grid.validate()?;
        if n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        let nc = grid.n_cells();
        let scale = grid.cell_area().sqrt();
        let mut increments = vec![0.0; nc * n_paths];
        increments.par_chunks_mut(nc).enumerate().for_each(|(p, chunk)| {
            fill_path(seed, first + p as u64, chunk);
            chunk.iter_mut().for_each(|v| *v *= scale);
        });
        Ok(Self::assemble(grid, seed, first, n_paths, increments))
    }

    /// Build from explicit increments (`n_paths * n_cells`, path-major).
    pub fn from_increments(grid: GridSpec, seed: u64, increments: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        let nc = grid.n_cells();
        if increments.is_empty() || !increments.len().is_multiple_of(nc) {
            return Err(Error::Usage(format!(
                "increment buffer of length {} is not a multiple of {} cells",
                increments.len(),
                nc
            )));
        }
        let n = increments.len() / nc;
        Ok(Self::assemble(grid, seed, 0, n, increments))
    }

    fn assemble(grid: GridSpec, seed: u64, first: u64, n_paths: usize, increments: Vec<f64>) -> Self {
        let nn = grid.n_nodes();
        let nc = grid.n_cells();
        let mut values = vec![0.0; nn * n_paths];
        values
            .par_chunks_mut(nn)
            .zip(increments.par_chunks(nc))
            .for_each(|(vals, inc)| prefix_sums(&grid, inc, vals));
        Self { grid, seed, first_path: first, n_paths, increments, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn first_path(&self) -> u64 {
        self.first_path
    }

    pub fn increments(&self, path: usize) -> &[f64] {
        let nc = self.grid.n_cells();
        &self.increments[path * nc..(path + 1) * nc]
    }

    pub fn values(&self, path: usize) -> &[f64] {
        let nn = self.grid.n_nodes();
        &self.values[path * nn..(path + 1) * nn]
    }

    pub fn all_increments(&self) -> &[f64] {
        &self.increments
    }

    /// `B(z)` on `path`.
    pub fn sheet_value(&self, path: usize, z: GridPoint) -> Result<f64> {
        if path >= self.n_paths {
            return Err(Error::Usage(format!("path {path} out of range (n_paths = {})", self.n_paths)));
        }
        self.grid.check(z)?;
        Ok(self.values(path)[self.grid.node(z.i, z.j)])
    }

    #[inline]
    pub fn value_unchecked(&self, path: usize, z: GridPoint) -> f64 {
        self.values(path)[self.grid.node(z.i, z.j)]
    }

    /// Same paths on the grid with 2x2 cells merged.
    pub fn coarsen(&self) -> Option<Self> {
        let coarse = self.grid.coarsened()?;
        let nc = coarse.n_cells();
        let mut inc = vec![0.0; nc * self.n_paths];
        inc.par_chunks_mut(nc).enumerate().for_each(|(p, out)| {
            let fine = self.increments(p);
            for i in 0..coarse.nt {
                for j in 0..coarse.nx {
                    out[coarse.cell(i, j)] = fine[self.grid.cell(2 * i, 2 * j)]
                        + fine[self.grid.cell(2 * i + 1, 2 * j)]
                        + fine[self.grid.cell(2 * i, 2 * j + 1)]
                        + fine[self.grid.cell(2 * i + 1, 2 * j + 1)];
                }
            }
        });
        Some(Self::assemble(coarse, self.seed, self.first_path, self.n_paths, inc))
    }

    /// Copy of `path` whose increments outside `R_z` are redrawn from `alt_seed`.
    pub fn resample_outside(&self, path: usize, z: GridPoint, alt_seed: u64) -> Result<Self> {
        self.grid.check(z)?;
        let g = self.grid;
        let scale = g.cell_area().sqrt();
        let mut inc = self.increments(path).to_vec();
        let mut fresh = vec![0.0; g.n_cells()];
        fill_path(alt_seed, self.first_path + path as u64, &mut fresh);
        for c in g.cells() {
            if c.i >= z.i || c.j >= z.j {
                let k = g.cell(c.i, c.j);
                inc[k] = fresh[k] * scale;
            }
        }
        Self::from_increments(g, self.seed, inc)
    }
}

/// Node values from cell increments: `v(i,j) = sum of cells below-left`.
pub fn prefix_sums(grid: &GridSpec, cells: &[f64], nodes: &mut [f64]) {
    let (nt, nx) = (grid.nt, grid.nx);
    for j in 0..=nx {
        nodes[grid.node(0, j)] = 0.0;
    }
    for i in 0..nt {
        let mut row = 0.0;
        nodes[grid.node(i + 1, 0)] = 0.0;
        for j in 0..nx {
            row += cells[grid.cell(i, j)];
            nodes[grid.node(i + 1, j + 1)] = nodes[grid.node(i, j + 1)] + row;
        }
    }
}
