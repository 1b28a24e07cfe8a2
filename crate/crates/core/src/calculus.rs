//! Discrete plane calculus: Lebesgue, Itô, double and mixed integrals over
//! rectangles `R_z`, the wedge indicator and the `⋆` operator.
//!
//! Integrands are sampled at the lower-left corner of each cell. Pairs of
//! cells `(c, c')` enter double sums when `c` is weakly earlier in time and
//! weakly higher in space than `c'`, excluding `c == c'`.

use crate::error::{Error, Result};
use crate::grid::{GridPoint, GridSpec, Point, SheetEnsemble};
use crate::stats::pairwise_sum;

/// Node-valued field for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
    adapted: bool,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n_nodes()], adapted: true }
    }

    /// Deterministic field, hence adapted.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.nodes().map(|g| f(grid.point(g))).collect();
        Self { grid, values, adapted: true }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>, adapted: bool) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Usage(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, values, adapted })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    pub fn with_adapted(mut self, adapted: bool) -> Self {
        self.adapted = adapted;
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    pub fn get(&self, z: GridPoint) -> Result<f64> {
        self.grid.check(z)?;
        Ok(self.at(z.i, z.j))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), adapted: self.adapted }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Values on ordered cell pairs, stored densely as `ψ[c * n_cells + c']`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl PairField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let n = grid.n_cells();
        Self { grid, values: vec![c; n * n] }
    }

    /// `ψ(ζ, ζ')` at the lower-left corners of the two cells.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point, Point) -> f64) -> Self {
        let cells: Vec<Point> = grid.cells().map(|c| grid.point(c)).collect();
        let mut values = Vec::with_capacity(cells.len() * cells.len());
        for &a in &cells {
            for &b in &cells {
                values.push(f(a, b));
            }
        }
        Self { grid, values }
    }

    /// `ψ(c, c')` from cell coordinates.
    pub fn from_cells(grid: GridSpec, f: impl Fn(GridPoint, GridPoint) -> f64) -> Self {
        let cells: Vec<GridPoint> = grid.cells().collect();
        let mut values = Vec::with_capacity(cells.len() * cells.len());
        for &a in &cells {
            for &b in &cells {
                values.push(f(a, b));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn at(&self, c: usize, c2: usize) -> f64 {
        self.values[c * self.grid.n_cells() + c2]
    }

    /// Discrete `L²_{a,2}` weight `Σ I(c ∧̄ c') ψ² ΔtΔx ΔtΔx` over `R_z`.
    pub fn wedge_norm_sq(&self, z: GridPoint) -> f64 {
        let a2 = self.grid.cell_area().powi(2);
        let mut s = 0.0;
        for_each_wedge_pair(&self.grid, z, |c, c2| s += self.at(c, c2).powi(2) * a2);
        s
    }
}

/// `I(ζ ∧̄ ζ')`: 1 iff `t ≤ t'` and `x ≥ x'`.
#[inline]
pub fn indicator_wedge(a: Point, b: Point) -> bool {
    a.t <= b.t && a.x >= b.x
}

#[inline]
pub fn wedge_cells(a: GridPoint, b: GridPoint) -> bool {
    a.i <= b.i && a.j >= b.j
}

/// Visit every ordered pair of distinct cells `(c, c')` inside `R_z` with
/// `c ∧̄ c'`, passing flat cell indices.
pub fn for_each_wedge_pair(grid: &GridSpec, z: GridPoint, mut f: impl FnMut(usize, usize)) {
    for i in 0..z.i {
        for j in 0..z.j {
            let c = grid.cell(i, j);
            for i2 in i..z.i {
                for j2 in 0..=j {
                    if i2 == i && j2 == j {
                        continue;
                    }
                    f(c, grid.cell(i2, j2));
                }
            }
        }
    }
}

/// Node where a wedge pair `(c, c')` first becomes measurable: `(i', j)`.
#[inline]
pub fn join_node(grid: &GridSpec, c: GridPoint, c2: GridPoint) -> usize {
    grid.node(c2.i, c.j)
}

fn check_compatible(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::Usage("field and ensemble grids differ".into()));
    }
    Ok(())
}

/// Left-point rule `Σ_{cells ⊆ R_z} φ(corner) ΔtΔx`.
pub fn lebesgue_integral(phi: &Field, z: GridPoint) -> Result<f64> {
    let g = phi.grid;
    g.check(z)?;
    let mut terms = Vec::with_capacity(z.i * z.j);
    for i in 0..z.i {
        for j in 0..z.j {
            terms.push(phi.at(i, j));
        }
    }
    Ok(pairwise_sum(&terms) * g.cell_area())
}

/// `Σ_{cells ⊆ R_z} φ(corner) ΔB_cell`.
pub fn ito_integral(phi: &Field, ens: &SheetEnsemble, path: usize, z: GridPoint) -> Result<f64> {
    if !phi.adapted {
        return Err(Error::Contract("Itô integrand is not adapted".into()));
    }
    let g = phi.grid;
    check_compatible(&g, ens.grid())?;
    g.check(z)?;
    check_path(ens, path)?;
    let inc = ens.increments(path);
    let mut terms = Vec::with_capacity(z.i * z.j);
    for i in 0..z.i {
        for j in 0..z.j {
            terms.push(phi.at(i, j) * inc[g.cell(i, j)]);
        }
    }
    Ok(pairwise_sum(&terms))
}

fn check_path(ens: &SheetEnsemble, path: usize) -> Result<()> {
    if path >= ens.n_paths() {
        return Err(Error::Usage(format!("path {path} out of range (n_paths = {})", ens.n_paths())));
    }
    Ok(())
}

/// `Σ_{c ∧̄ c', c ≠ c'} ψ(c,c') ΔB_c ΔB_{c'}` over `R_z`.
pub fn double_ito_integral(psi: &PairField, ens: &SheetEnsemble, path: usize, z: GridPoint) -> Result<f64> {
    let g = psi.grid;
    check_compatible(&g, ens.grid())?;
    g.check(z)?;
    check_path(ens, path)?;
    let inc = ens.increments(path);
    let mut s = 0.0;
    for_each_wedge_pair(&g, z, |c, c2| s += psi.at(c, c2) * inc[c] * inc[c2]);
    Ok(s)
}

/// The two mixed sums `(Σ ψ ΔtΔx ΔB_{c'}, Σ ψ ΔB_c ΔtΔx)` over wedge pairs.
pub fn mixed_integrals(psi: &PairField, ens: &SheetEnsemble, path: usize, z: GridPoint) -> Result<(f64, f64)> {
    let g = psi.grid;
    check_compatible(&g, ens.grid())?;
    g.check(z)?;
    check_path(ens, path)?;
    let inc = ens.increments(path);
    let a = g.cell_area();
    let (mut s1, mut s2) = (0.0, 0.0);
    for_each_wedge_pair(&g, z, |c, c2| {
        let w = psi.at(c, c2);
        s1 += w * inc[c2];
        s2 += w * inc[c];
    });
    Ok((s1 * a, s2 * a))
}

#[inline]
fn trap_weight(k: usize, lo: usize, hi: usize, h: f64) -> f64 {
    if lo == hi {
        0.0
    } else if k == lo || k == hi {
        0.5 * h
    } else {
        h
    }
}

/// Trapezoid rule for `∫∫ f` over the node block `[i0,i1] x [j0,j1]`.
pub fn rect_trapezoid(f: &Field, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
    let g = f.grid;
    let (dt, dx) = (g.dt(), g.dx());
    let mut s = 0.0;
    for i in i0..=i1 {
        let wt = trap_weight(i, i0, i1, dt);
        if wt == 0.0 {
            continue;
        }
        for j in j0..=j1 {
            s += wt * trap_weight(j, j0, j1, dx) * f.at(i, j);
        }
    }
    s
}

/// Trapezoid integrals `∫_0^x ∫_t^{T_h} k` for every node with `i ≤ horizon.i`,
/// `j ≤ horizon.j`; O(nodes) via suffix/prefix sums.
pub fn upper_left_integrals(k: &Field, horizon: GridPoint) -> Vec<f64> {
    let g = k.grid;
    let (dt, dx) = (g.dt(), g.dx());
    let (ni, nj) = (horizon.i, horizon.j);
    // row[i][j]: trapezoid of k(i, ·) over [0, j]
    let mut row = vec![0.0; (ni + 1) * (nj + 1)];
    for i in 0..=ni {
        let mut prefix = 0.0;
        for j in 0..=nj {
            prefix += k.at(i, j);
            row[i * (nj + 1) + j] = if j == 0 { 0.0 } else { dx * (prefix - 0.5 * k.at(i, 0) - 0.5 * k.at(i, j)) };
        }
    }
    let mut out = vec![0.0; (ni + 1) * (nj + 1)];
    for j in 0..=nj {
        let top = row[ni * (nj + 1) + j];
        let mut suffix = 0.0;
        for i in (0..=ni).rev() {
            let r = row[i * (nj + 1) + j];
            suffix += r;
            out[i * (nj + 1) + j] = if i == ni { 0.0 } else { dt * (suffix - 0.5 * r - 0.5 * top) };
        }
    }
    out
}

/// `(h ⋆ k)(z) = ∫_0^x ∫_t^{T_h} {h(z)k(ζ') + h(ζ')k(z)} dζ'` by the trapezoid rule.
pub fn star(h: &Field, k: &Field, z: GridPoint, horizon: GridPoint) -> Result<f64> {
    let g = h.grid;
    check_compatible(&g, &k.grid)?;
    g.check(horizon)?;
    g.check(z)?;
    if z.i > horizon.i || z.j > horizon.j {
        return Err(Error::Usage(format!(
            "point ({}, {}) lies beyond horizon ({}, {})",
            z.i, z.j, horizon.i, horizon.j
        )));
    }
    let kin = rect_trapezoid(k, z.i, horizon.i, 0, z.j);
    let hin = rect_trapezoid(h, z.i, horizon.i, 0, z.j);
    Ok(h.at(z.i, z.j) * kin + hin * k.at(z.i, z.j))
}

/// `h ⋆ k` at every node, horizon at the grid corner.
pub fn star_field(h: &Field, k: &Field) -> Result<Field> {
    let g = h.grid;
    check_compatible(&g, &k.grid)?;
    let hz = g.corner();
    let kin = upper_left_integrals(k, hz);
    let hin = upper_left_integrals(h, hz);
    let values = (0..g.n_nodes()).map(|n| h.values[n] * kin[n] + hin[n] * k.values[n]).collect();
    Ok(Field { grid: g, values, adapted: false })
}

/// Both sides of `∬ I(ζ∧̄ζ'){α₁(ζ')α₂(ζ)+α₁(ζ)α₂(ζ')} = ∫_{R_z} (α₁ ⋆ α₂)` with the
/// `⋆` horizon at `z`. Left side by an explicit node-pair loop, right side via
/// the prefix-sum `⋆`.
pub fn star_double_identity(a1: &Field, a2: &Field, z: GridPoint) -> Result<(f64, f64)> {
    let g = a1.grid;
    check_compatible(&g, &a2.grid)?;
    g.check(z)?;
    let (dt, dx) = (g.dt(), g.dx());
    let mut lhs = 0.0;
    for i in 0..=z.i {
        let wi = trap_weight(i, 0, z.i, dt);
        for j in 0..=z.j {
            let w = wi * trap_weight(j, 0, z.j, dx);
            if w == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for i2 in i..=z.i {
                let wi2 = trap_weight(i2, i, z.i, dt);
                if wi2 == 0.0 {
                    continue;
                }
                for j2 in 0..=j {
                    let w2 = wi2 * trap_weight(j2, 0, j, dx);
                    inner += w2 * (a1.at(i2, j2) * a2.at(i, j) + a1.at(i, j) * a2.at(i2, j2));
                }
            }
            lhs += w * inner;
        }
    }
    let kin = upper_left_integrals(a2, z);
    let hin = upper_left_integrals(a1, z);
    let stride = z.j + 1;
    let mut rhs = 0.0;
    for i in 0..=z.i {
        let wi = trap_weight(i, 0, z.i, dt);
        for j in 0..=z.j {
            let w = wi * trap_weight(j, 0, z.j, dx);
            let s = a1.at(i, j) * kin[i * stride + j] + hin[i * stride + j] * a2.at(i, j);
            rhs += w * s;
        }
    }
    Ok((lhs, rhs))
}

/// `E[B(ζ) | F_z] = B(min(s,t), min(a,x))`.
pub fn conditional_projection(zeta: GridPoint, z: GridPoint, ens: &SheetEnsemble, path: usize) -> Result<f64> {
    let g = ens.grid();
    g.check(zeta)?;
    g.check(z)?;
    ens.sheet_value(path, GridPoint::new(zeta.i.min(z.i), zeta.j.min(z.j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wedge_examples() {
        assert!(indicator_wedge(Point::new(0.2, 0.8), Point::new(0.5, 0.3)));
        assert!(indicator_wedge(Point::new(0.4, 0.4), Point::new(0.4, 0.4)));
        assert!(!indicator_wedge(Point::new(0.5, 0.3), Point::new(0.2, 0.8)));
    }

    #[test]
    fn wedge_pair_count() {
        let g = GridSpec::unit(5);
        let mut n = 0usize;
        for_each_wedge_pair(&g, g.corner(), |_, _| n += 1);
        // ordered pairs with i<=i', j>=j', minus the diagonal
        assert_eq!(n, 15 * 15 - 25);
    }

    #[test]
    fn lebesgue_constant_and_linear() {
        let g = GridSpec::new(2.0, 3.0, 8, 6).unwrap();
        let one = Field::constant(g, 1.0);
        let v = lebesgue_integral(&one, GridPoint::new(4, 2)).unwrap();
        assert!((v - 1.0 * 1.0).abs() < 1e-14);
        let zero = Field::zeros(g);
        assert_eq!(lebesgue_integral(&zero, g.corner()).unwrap(), 0.0);

        let u = GridSpec::unit(64);
        let sa = Field::from_fn(u, |p| p.t * p.x);
        let v = lebesgue_integral(&sa, u.corner()).unwrap();
        // left-point bias (1 - 1/n)^2 / 4
        assert!((v - 0.25).abs() < 0.25 * 2.0 / 64.0);
    }

    #[test]
    fn ito_of_one_is_sheet() {
        let g = GridSpec::unit(6);
        let e = SheetEnsemble::sample(g, 2, 3).unwrap();
        let one = Field::constant(g, 1.0);
        for p in 0..3 {
            let z = GridPoint::new(4, 5);
            let v = ito_integral(&one, &e, p, z).unwrap();
            assert!((v - e.sheet_value(p, z).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ito_rejects_non_adapted() {
        let g = GridSpec::unit(2);
        let e = SheetEnsemble::sample(g, 2, 1).unwrap();
        let f = Field::from_values(g, e.values(0).to_vec(), false).unwrap();
        assert!(matches!(ito_integral(&f, &e, 0, g.corner()), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_pair_field_gives_zero() {
        let g = GridSpec::unit(4);
        let e = SheetEnsemble::sample(g, 2, 1).unwrap();
        let z = PairField::zeros(g);
        assert_eq!(double_ito_integral(&z, &e, 0, g.corner()).unwrap(), 0.0);
        assert_eq!(mixed_integrals(&z, &e, 0, g.corner()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn star_constants() {
        let g = GridSpec::new(2.0, 1.5, 6, 5).unwrap();
        let one = Field::constant(g, 1.0);
        let sf = star_field(&one, &one).unwrap();
        for z in g.nodes() {
            let p = g.point(z);
            let want = 2.0 * p.x * (g.t_max - p.t);
            assert!((sf.at(z.i, z.j) - want).abs() < 1e-12);
            assert!((star(&one, &one, z, g.corner()).unwrap() - want).abs() < 1e-12);
        }
        let zero = Field::zeros(g);
        assert_eq!(star(&zero, &zero, GridPoint::new(1, 1), g.corner()).unwrap(), 0.0);
    }

    #[test]
    fn star_beyond_horizon_is_usage_error() {
        let g = GridSpec::unit(4);
        let one = Field::constant(g, 1.0);
        let r = star(&one, &one, GridPoint::new(3, 1), GridPoint::new(2, 4));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn star_double_identity_ones() {
        let g = GridSpec::unit(16);
        let one = Field::constant(g, 1.0);
        let (l, r) = star_double_identity(&one, &one, g.corner()).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        let zero = Field::zeros(g);
        assert_eq!(star_double_identity(&zero, &one, g.corner()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn projection_examples() {
        let g = GridSpec::unit(4);
        let e = SheetEnsemble::sample(g, 4, 1).unwrap();
        let z = GridPoint::new(2, 3);
        assert_eq!(conditional_projection(GridPoint::new(1, 1), z, &e, 0).unwrap(), e.value_unchecked(0, GridPoint::new(1, 1)));
        assert_eq!(conditional_projection(g.corner(), z, &e, 0).unwrap(), e.value_unchecked(0, z));
        assert_eq!(conditional_projection(g.corner(), GridPoint::new(0, 0), &e, 0).unwrap(), 0.0);
    }

    fn poly(g: GridSpec, c: [f64; 4]) -> Field {
        Field::from_fn(g, move |p| c[0] + c[1] * p.t + c[2] * p.x + c[3] * p.t * p.x * p.x)
    }

    proptest! {
        #[test]
        fn star_is_bilinear(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0),
                            c in prop::array::uniform4(-2.0f64..2.0), s in -3.0f64..3.0) {
            let g = GridSpec::new(1.0, 2.0, 7, 5).unwrap();
            let (h1, h2, k) = (poly(g, a), poly(g, b), poly(g, c));
            let comb = Field::from_values(g, h1.values().iter().zip(h2.values()).map(|(x, y)| x + s * y).collect(), true).unwrap();
            let lhs = star_field(&comb, &k).unwrap();
            let r1 = star_field(&h1, &k).unwrap();
            let r2 = star_field(&h2, &k).unwrap();
            for n in 0..g.n_nodes() {
                let want = r1.values()[n] + s * r2.values()[n];
                prop_assert!((lhs.values()[n] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
            let sym = star_field(&k, &h1).unwrap();
            for n in 0..g.n_nodes() {
                prop_assert!((sym.values()[n] - r1.values()[n]).abs() <= 1e-12 * (1.0 + r1.values()[n].abs()));
            }
        }

        #[test]
        fn fast_star_matches_direct(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0),
                                    zi in 0usize..8, zj in 0usize..6) {
            let g = GridSpec::new(1.5, 1.0, 7, 5).unwrap();
            let (h, k) = (poly(g, a), poly(g, b));
            let z = GridPoint::new(zi.min(7), zj.min(5));
            let fast = star_field(&h, &k).unwrap().at(z.i, z.j);
            let direct = star(&h, &k, z, g.corner()).unwrap();
            prop_assert!((fast - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }
}
