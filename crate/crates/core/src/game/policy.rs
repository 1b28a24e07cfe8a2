use std::sync::Arc;

use super::affine::AffineField;
use super::model::Player;
use crate::calculus::Field;
use crate::error::{Error, Result};
use crate::grid::{GridPoint, GridSpec, SheetEnsemble};

/// A control process on the grid nodes.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Same values on every path.
    Field(Field),
    /// Affine in the sheet increments.
    Affine(Arc<AffineField>),
    /// Explicit values, `n_paths * n_nodes`, aligned with a given ensemble.
    Paths { grid: GridSpec, values: Arc<Vec<f64>>, adapted: bool },
}

impl Policy {
    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Policy::Field(Field::constant(grid, c))
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            Policy::Field(f) => f.grid(),
            Policy::Affine(a) => a.grid(),
            Policy::Paths { grid, .. } => grid,
        }
    }

    pub fn is_adapted(&self) -> bool {
        match self {
            Policy::Field(f) => f.is_adapted(),
            Policy::Affine(a) => a.is_adapted(),
            Policy::Paths { adapted, .. } => *adapted,
        }
    }

    pub fn validate(&self, ens: &SheetEnsemble) -> Result<()> {
        if self.grid() != ens.grid() {
            return Err(Error::Usage("control and ensemble grids differ".into()));
        }
        if let Policy::Paths { values, grid, .. } = self {
            if values.len() != grid.n_nodes() * ens.n_paths() {
                return Err(Error::Usage("per-path control does not match ensemble size".into()));
            }
        }
        if !self.is_adapted() {
            return Err(Error::Contract("controls must be adapted".into()));
        }
        Ok(())
    }

    pub fn fill(&self, ens: &SheetEnsemble, path: usize, out: &mut [f64]) {
        match self {
            Policy::Field(f) => out.copy_from_slice(f.values()),
            Policy::Affine(a) => a.materialize(ens.increments(path), out),
            Policy::Paths { grid, values, .. } => {
                let nn = grid.n_nodes();
                out.copy_from_slice(&values[path * nn..(path + 1) * nn]);
            }
        }
    }

    /// Node-wise mean over the ensemble.
    pub fn mean(&self, ens: &SheetEnsemble) -> Field {
        let g = *self.grid();
        match self {
            Policy::Field(f) => f.clone(),
            Policy::Affine(a) => a.mean(),
            Policy::Paths { .. } => {
                let mut acc = vec![0.0; g.n_nodes()];
                let mut buf = vec![0.0; g.n_nodes()];
                for p in 0..ens.n_paths() {
                    self.fill(ens, p, &mut buf);
                    acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
                }
                acc.iter_mut().for_each(|a| *a /= ens.n_paths() as f64);
                Field::from_values(g, acc, true).expect("shape")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controls {
    pub u1: Policy,
    pub u2: Policy,
}

impl Controls {
    pub fn new(u1: Policy, u2: Policy) -> Self {
        Self { u1, u2 }
    }

    pub fn get(&self, p: Player) -> &Policy {
        match p {
            Player::One => &self.u1,
            Player::Two => &self.u2,
        }
    }

    pub fn validate(&self, ens: &SheetEnsemble) -> Result<()> {
        self.u1.validate(ens)?;
        self.u2.validate(ens)
    }
}

/// Deterministic perturbation direction `v` on the nodes.
#[derive(Debug, Clone)]
pub struct Direction {
    pub id: String,
    pub field: Field,
}

impl Direction {
    pub fn constant(grid: GridSpec) -> Self {
        Self { id: "constant".into(), field: Field::constant(grid, 1.0) }
    }

    /// Indicator of `[t₀, T] x [x₀, X]`.
    pub fn rectangle(grid: GridSpec, z0: GridPoint) -> Self {
        let mut f = Field::zeros(grid);
        for z in grid.nodes() {
            if z.i >= z0.i && z.j >= z0.j {
                f.values_mut()[grid.node(z.i, z.j)] = 1.0;
            }
        }
        Self { id: format!("rect({},{})", z0.i, z0.j), field: f }
    }

    pub fn custom(id: impl Into<String>, field: Field) -> Result<Self> {
        if !field.is_adapted() {
            return Err(Error::Contract("perturbation direction must be adapted".into()));
        }
        Ok(Self { id: id.into(), field })
    }
}

/// Rectangle corners at fractions of the domain, snapped down to nodes.
pub const RECT_CORNERS: [(f64, f64); 4] = [(0.25, 0.25), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25)];

/// Constant direction plus the four rectangle directions.
pub fn standard_directions(grid: GridSpec) -> Vec<Direction> {
    let mut out = vec![Direction::constant(grid)];
    for &(ft, fx) in &RECT_CORNERS {
        let z0 = GridPoint::new((ft * grid.nt as f64).floor() as usize, (fx * grid.nx as f64).floor() as usize);
        out.push(Direction::rectangle(grid, z0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_marks_upper_block() {
        let g = GridSpec::unit(4);
        let d = Direction::rectangle(g, GridPoint::new(2, 1));
        assert_eq!(d.field.at(2, 1), 1.0);
        assert_eq!(d.field.at(1, 3), 0.0);
        assert_eq!(d.field.at(4, 0), 0.0);
        assert_eq!(standard_directions(g).len(), 5);
    }

    #[test]
    fn non_adapted_policy_rejected() {
        let g = GridSpec::unit(2);
        let e = SheetEnsemble::sample(g, 1, 1).unwrap();
        let f = Field::from_values(g, vec![0.0; 9], false).unwrap();
        assert!(matches!(Policy::Field(f).validate(&e), Err(Error::Contract(_))));
    }
}
