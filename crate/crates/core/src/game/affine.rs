//! Fields that are affine in the sheet increments:
//! `X(z) = c(z) + Σ_cells w(z, cell) ΔB_cell`.
//!
//! Linear-Gaussian games stay in this class under the Picard map, so
//! conditional expectations reduce to dropping the weights of cells outside
//! `R_z`.

use rayon::prelude::*;

use crate::calculus::Field;
use crate::grid::{GridPoint, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    grid: GridSpec,
    constant: Vec<f64>,
    weights: Vec<f64>,
}

impl AffineField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, constant: vec![0.0; grid.n_nodes()], weights: vec![0.0; grid.n_nodes() * grid.n_cells()] }
    }

    pub fn deterministic(f: &Field) -> Self {
        let mut a = Self::zeros(*f.grid());
        a.constant.copy_from_slice(f.values());
        a
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn constant(&self) -> &[f64] {
        &self.constant
    }

    pub fn constant_mut(&mut self) -> &mut [f64] {
        &mut self.constant
    }

    #[inline]
    pub fn row(&self, node: usize) -> &[f64] {
        let nc = self.grid.n_cells();
        &self.weights[node * nc..(node + 1) * nc]
    }

    #[inline]
    pub fn row_mut(&mut self, node: usize) -> &mut [f64] {
        let nc = self.grid.n_cells();
        &mut self.weights[node * nc..(node + 1) * nc]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Disjoint mutable access to constants and weight rows.
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.constant, &mut self.weights)
    }

    #[inline]
    pub fn eval(&self, node: usize, inc: &[f64]) -> f64 {
        self.constant[node] + self.row(node).iter().zip(inc).map(|(w, b)| w * b).sum::<f64>()
    }

    pub fn materialize(&self, inc: &[f64], out: &mut [f64]) {
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.eval(n, inc);
        }
    }

    /// Expectation at every node.
    pub fn mean(&self) -> Field {
        Field::from_values(self.grid, self.constant.clone(), true).expect("shape")
    }

    /// Variance at every node.
    pub fn variance(&self) -> Field {
        let a = self.grid.cell_area();
        let v = (0..self.grid.n_nodes()).map(|n| self.row(n).iter().map(|w| w * w).sum::<f64>() * a).collect();
        Field::from_values(self.grid, v, true).expect("shape")
    }

    /// `E[X(z) | F_z]` at each node.
    pub fn project(&mut self) {
        let g = self.grid;
        let nc = g.n_cells();
        self.weights.par_chunks_mut(nc).enumerate().for_each(|(n, row)| {
            let (zi, zj) = (n / (g.nx + 1), n % (g.nx + 1));
            for c in g.cells() {
                if c.i >= zi || c.j >= zj {
                    row[g.cell(c.i, c.j)] = 0.0;
                }
            }
        });
    }

    pub fn projected(mut self) -> Self {
        self.project();
        self
    }

    /// Largest weight on a cell outside `R_z`, over all nodes `z`.
    pub fn anticipation(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for z in g.nodes() {
            let row = self.row(g.node(z.i, z.j));
            for c in g.cells() {
                if c.i >= z.i || c.j >= z.j {
                    worst = worst.max(row[g.cell(c.i, c.j)].abs());
                }
            }
        }
        worst
    }

    pub fn is_adapted(&self) -> bool {
        self.anticipation() == 0.0
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &AffineField) {
        for (a, b) in self.constant.iter_mut().zip(&other.constant) {
            *a += s * b;
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.constant.iter_mut().for_each(|v| *v *= s);
        self.weights.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiply node `n` by `s[n]`.
    pub fn scale_nodes(&mut self, s: &[f64]) {
        let nc = self.grid.n_cells();
        for (n, &k) in s.iter().enumerate() {
            self.constant[n] *= k;
            self.weights[n * nc..(n + 1) * nc].iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Max over nodes of `|Δc| + Σ|Δw|·sqrt(area)`, a scale-aware distance.
    pub fn distance(&self, other: &AffineField) -> f64 {
        let nc = self.grid.n_cells();
        let sa = self.grid.cell_area().sqrt();
        (0..self.grid.n_nodes())
            .map(|n| {
                let dc = (self.constant[n] - other.constant[n]).abs();
                let dw: f64 = self.weights[n * nc..(n + 1) * nc]
                    .iter()
                    .zip(&other.weights[n * nc..(n + 1) * nc])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                dc + dw * sa
            })
            .fold(0.0, f64::max)
    }

    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = self.constant.clone();
        v.extend_from_slice(&self.weights);
        v
    }

    pub fn from_vec(grid: GridSpec, v: &[f64]) -> Self {
        let nn = grid.n_nodes();
        Self { grid, constant: v[..nn].to_vec(), weights: v[nn..].to_vec() }
    }

    /// Apply a node-to-node linear operator to the constant part and to
    /// every weight column.
    pub fn apply_linear(&self, op: impl Fn(&[f64], &mut [f64]) + Sync) -> Self {
        let g = self.grid;
        let (nn, nc) = (g.n_nodes(), g.n_cells());
        let mut out = Self::zeros(g);
        op(&self.constant, &mut out.constant);
        let cols: Vec<Vec<f64>> = (0..nc)
            .into_par_iter()
            .map(|k| {
                let col: Vec<f64> = (0..nn).map(|n| self.weights[n * nc + k]).collect();
                let mut res = vec![0.0; nn];
                op(&col, &mut res);
                res
            })
            .collect();
        for (k, col) in cols.iter().enumerate() {
            for (n, v) in col.iter().enumerate() {
                out.weights[n * nc + k] = *v;
            }
        }
        out
    }

    /// Every node set to the value of node `n`.
    pub fn broadcast(&self, n: usize) -> Self {
        let g = self.grid;
        let mut out = Self::zeros(g);
        let c = self.constant[n];
        let row = self.row(n).to_vec();
        out.constant.iter_mut().for_each(|v| *v = c);
        out.weights.par_chunks_mut(g.n_cells()).for_each(|r| r.copy_from_slice(&row));
        out
    }

    /// Node value at `z` as `(constant, weights)`.
    pub fn at(&self, z: GridPoint) -> (f64, &[f64]) {
        let n = self.grid.node(z.i, z.j);
        (self.constant[n], self.row(n))
    }
}
