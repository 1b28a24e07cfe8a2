//! Monte Carlo checks of the plane Itô formula and the integration-by-parts
//! identity, plus the BSPDE well-posedness test.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{for_each_wedge_pair, PairField};
use crate::error::{Error, Result};
use crate::grid::{GridPoint, GridSpec, SheetEnsemble};
use crate::process::{ProcessSpec, Simulator, StatePath};
use crate::stats::{pairwise_sum, MeanStat};

type Deriv = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f ∈ C⁴` given with its first four derivatives.
#[derive(Clone)]
pub struct SmoothFn {
    name: String,
    d: [Deriv; 5],
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothFn({})", self.name)
    }
}

macro_rules! deriv {
    ($e:expr) => {
        Arc::new($e) as Deriv
    };
}

impl SmoothFn {
    pub fn new(
        name: impl Into<String>,
        f0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f3: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f4: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), d: [deriv!(f0), deriv!(f1), deriv!(f2), deriv!(f3), deriv!(f4)] }
    }

    pub fn identity() -> Self {
        Self::new("identity", |y| y, |_| 1.0, |_| 0.0, |_| 0.0, |_| 0.0)
    }

    pub fn square() -> Self {
        Self::new("square", |y| y * y, |y| 2.0 * y, |_| 2.0, |_| 0.0, |_| 0.0)
    }

    pub fn cube() -> Self {
        Self::new("cube", |y| y * y * y, |y| 3.0 * y * y, |y| 6.0 * y, |_| 6.0, |_| 0.0)
    }

    pub fn quartic() -> Self {
        Self::new("quartic", |y| y.powi(4), |y| 4.0 * y.powi(3), |y| 12.0 * y * y, |y| 24.0 * y, |_| 24.0)
    }

    /// `exp(k y)`.
    pub fn exp(k: f64) -> Self {
        Self::new(
            format!("exp({k})"),
            move |y| (k * y).exp(),
            move |y| k * (k * y).exp(),
            move |y| k * k * (k * y).exp(),
            move |y| k.powi(3) * (k * y).exp(),
            move |y| k.powi(4) * (k * y).exp(),
        )
    }

    pub fn sin() -> Self {
        Self::new("sin", f64::sin, f64::cos, |y| -y.sin(), |y| -y.cos(), f64::sin)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::identity()),
            "square" => Ok(Self::square()),
            "cube" => Ok(Self::cube()),
            "quartic" => Ok(Self::quartic()),
            "sin" => Ok(Self::sin()),
            "exp" => Ok(Self::exp(1.0)),
            other => Err(Error::Config(format!("unknown test function '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn d(&self, k: usize, y: f64) -> f64 {
        (self.d[k])(y)
    }

    /// Compare each supplied derivative against a central difference of the
    /// previous one at `points`, step `1e-4·scale`.
    pub fn check_derivatives(&self, points: &[f64]) -> Result<()> {
        for &y in points {
            let h = 1e-4 * y.abs().max(1.0);
            for k in 0..4 {
                let fd = (self.d(k, y + h) - self.d(k, y - h)) / (2.0 * h);
                let exact = self.d(k + 1, y);
                let scale = exact.abs().max(self.d(k, y).abs()).max(1.0);
                if (fd - exact).abs() > 1e-6 * scale {
                    return Err(Error::Contract(format!(
                        "derivative {} of {} inconsistent at y={y}: {exact} vs finite difference {fd}",
                        k + 1,
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Zero-mean stochastic groups dropped; compare means.
    Expectation,
    /// All groups kept; compare path by path.
    Pathwise,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermGroup {
    pub name: &'static str,
    pub mean: f64,
    pub stderr: f64,
    /// Pure stochastic-integral group, dropped in expectation mode.
    pub zero_mean: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItoReport {
    pub mode: CheckMode,
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// Mean of the retained groups.
    pub rhs: f64,
    /// Mean including the zero-mean groups.
    pub rhs_full: f64,
    pub groups: Vec<TermGroup>,
    /// Mean and stderr of the per-path difference `lhs - rhs`.
    pub diff: f64,
    pub diff_stderr: f64,
    /// Largest per-path `|lhs - rhs_full|` relative to `1 + |lhs|`.
    pub max_path_rel_err: f64,
    pub allowance: f64,
    pub n_paths: usize,
    pub pass: bool,
}

impl ItoReport {
    pub fn group(&self, name: &str) -> Option<&TermGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

const ITO_GROUPS: [(&str, bool); 8] = [
    ("const", false),
    ("drift", false),
    ("ito", true),
    ("correction", false),
    ("double", true),
    ("mixed1", true),
    ("mixed2", true),
    ("pair", false),
];

/// Tolerance for pathwise comparisons.
pub const PATHWISE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub mode: CheckMode,
    /// Estimate the discretization allowance by re-running on the ensemble
    /// coarsened once.
    pub grid_allowance: bool,
    pub k_sigma: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { mode: CheckMode::Expectation, grid_allowance: true, k_sigma: 3.0 }
    }
}

/// Per-path values of the left side and the eight right-side groups.
fn ito_terms(f: &SmoothFn, s: &StatePath, psi: Option<&PairField>, inc: &[f64], z: GridPoint) -> [f64; 9] {
    let g = s.grid;
    let a = g.cell_area();
    let nn = g.n_nodes();
    let mut d = [vec![0.0; nn], vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]];
    for n in 0..nn {
        for k in 0..4 {
            d[k][n] = f.d(k + 1, s.y[n]);
        }
    }
    let y0 = s.y[g.node(0, 0)];
    let mut drift = 0.0;
    let mut ito = 0.0;
    let mut corr = 0.0;
    let mut diag = 0.0;
    for i in 0..z.i {
        for j in 0..z.j {
            let n = g.node(i, j);
            let c = g.cell(i, j);
            let (al, be) = (s.alpha[c], s.beta[c]);
            drift += d[0][n] * al * a;
            ito += d[0][n] * be * inc[c];
            corr += 0.5 * d[1][n] * be * be * a;
            diag += 0.5 * (d[1][n] * al * al + d[2][n] * al * be * be + 0.25 * d[3][n] * be.powi(4)) * a * a;
        }
    }
    // u(c') and ũ(c): β plus the ψ-weighted increments paired with that cell
    let nc = g.n_cells();
    let mut u = s.beta.clone();
    let mut ut = s.beta.clone();
    if let Some(psi) = psi {
        for_each_wedge_pair(&g, z, |c, c2| {
            let w = psi.at(c, c2);
            u[c2] += w * inc[c];
            ut[c] += w * inc[c2];
        });
    }
    let (mut dbl, mut m1, mut m2, mut pair) = (0.0, 0.0, 0.0, 0.0);
    let cells: Vec<GridPoint> = g.cells().collect();
    debug_assert_eq!(cells.len(), nc);
    for_each_wedge_pair(&g, z, |c, c2| {
        let (p, q) = (cells[c], cells[c2]);
        let jn = g.node(q.i, p.j);
        let (f1, f2, f3, f4) = (d[0][jn], d[1][jn], d[2][jn], d[3][jn]);
        let w = psi.map_or(0.0, |psi| psi.at(c, c2));
        let (uu, vv) = (u[c2], ut[c]);
        let (al, al2) = (s.alpha[c], s.alpha[c2]);
        dbl += (f2 * uu * vv + f1 * w) * inc[c] * inc[c2];
        m1 += (f2 * (uu * al + w * vv) + 0.5 * f3 * uu * uu * vv) * a * inc[c2];
        m2 += (f2 * (vv * al2 + w * uu) + 0.5 * f3 * uu * vv * vv) * inc[c] * a;
        pair += (f2 * (al * al2 + 0.5 * w * w)
            + f3 * uu * vv * w
            + 0.5 * f3 * (al2 * vv * vv + al * uu * uu)
            + 0.25 * f4 * uu * uu * vv * vv)
            * a
            * a;
    });
    let lhs = f.d(0, s.y[g.node(z.i, z.j)]);
    [lhs, f.d(0, y0), drift, ito, corr, dbl, m1, m2, pair + diag]
}

fn run_ito(f: &SmoothFn, spec: &ProcessSpec, z: GridPoint, ens: &SheetEnsemble) -> Result<Vec<[f64; 9]>> {
    let sim = Simulator::new(spec.clone(), *ens.grid());
    (0..ens.n_paths())
        .into_par_iter()
        .map(|p| {
            let s = sim.simulate(ens, p)?;
            Ok(ito_terms(f, &s, sim.psi(), ens.increments(p), z))
        })
        .collect()
}

fn column(rows: &[[f64; 9]], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn mean_diff(rows: &[[f64; 9]]) -> f64 {
    let d: Vec<f64> = rows.iter().map(|r| r[0] - retained(r)).collect();
    pairwise_sum(&d) / d.len() as f64
}

fn retained(r: &[f64; 9]) -> f64 {
    r[1] + r[2] + r[4] + r[8]
}

fn full(r: &[f64; 9]) -> f64 {
    r[1..].iter().sum()
}

/// Check `f(Y(z))` against the plane Itô expansion.
pub fn ito_formula_check(
    f: &SmoothFn,
    spec: &ProcessSpec,
    z: GridPoint,
    ens: &SheetEnsemble,
    opts: CheckOptions,
) -> Result<ItoReport> {
    f.check_derivatives(&[-1.3, -0.2, 0.0, 0.7, 2.1])?;
    ens.grid().check(z)?;
    let rows = run_ito(f, spec, z, ens)?;
    let groups: Vec<TermGroup> = ITO_GROUPS
        .iter()
        .enumerate()
        .map(|(k, &(name, zero_mean))| {
            let s = MeanStat::from_samples(&column(&rows, k + 1));
            TermGroup { name, mean: s.mean, stderr: s.stderr, zero_mean }
        })
        .collect();
    let lhs = MeanStat::from_samples(&column(&rows, 0));
    let rhs: Vec<f64> = rows.iter().map(retained).collect();
    let rhs_full: Vec<f64> = rows.iter().map(full).collect();
    let diff = MeanStat::from_samples(&rows.iter().map(|r| r[0] - retained(r)).collect::<Vec<_>>());
    let max_path_rel_err =
        rows.iter().map(|r| (r[0] - full(r)).abs() / (1.0 + r[0].abs())).fold(0.0, f64::max);

    let mut allowance = 0.0;
    if opts.grid_allowance && opts.mode == CheckMode::Expectation && z.i.is_multiple_of(2) && z.j.is_multiple_of(2) {
        if let Some(coarse) = ens.coarsen() {
            let zc = GridPoint::new(z.i / 2, z.j / 2);
            let rows_c = run_ito(f, spec, zc, &coarse)?;
            allowance = 2.0 * (diff.mean - mean_diff(&rows_c)).abs();
        }
    }
    let pass = match opts.mode {
        CheckMode::Expectation => diff.mean.abs() <= opts.k_sigma * diff.stderr + allowance,
        CheckMode::Pathwise => max_path_rel_err <= PATHWISE_TOL,
    };
    Ok(ItoReport {
        mode: opts.mode,
        lhs: lhs.mean,
        lhs_stderr: lhs.stderr,
        rhs: MeanStat::from_samples(&rhs).mean,
        rhs_full: MeanStat::from_samples(&rhs_full).mean,
        groups,
        diff: diff.mean,
        diff_stderr: diff.stderr,
        max_path_rel_err,
        allowance,
        n_paths: ens.n_paths(),
        pass,
    })
}

/// Rectangle sums `S(i,j) = Σ_{i' ≥ i, i' < zi, j' ≤ j} v(i',j')` over cells.
fn wedge_after_sums(g: &GridSpec, v: &[f64], z: GridPoint) -> Vec<f64> {
    let mut out = vec![0.0; g.n_cells()];
    for j in 0..z.j {
        let mut acc = 0.0;
        for i in (0..z.i).rev() {
            let mut row = 0.0;
            for j2 in 0..=j {
                row += v[g.cell(i, j2)];
            }
            acc += row;
            out[g.cell(i, j)] = acc;
        }
    }
    out
}

/// `E[Y₁(z)Y₂(z)]` against the integration-by-parts expansion. Both processes
/// are driven by the same sheet.
pub fn ibp_check(
    spec1: &ProcessSpec,
    spec2: &ProcessSpec,
    z: GridPoint,
    ens: &SheetEnsemble,
    k_sigma: f64,
) -> Result<ItoReport> {
    let g = *ens.grid();
    g.check(z)?;
    let s1 = Simulator::new(spec1.clone(), g);
    let s2 = Simulator::new(spec2.clone(), g);
    let a = g.cell_area();
    let psi_term = match (s1.psi(), s2.psi()) {
        (Some(p1), Some(p2)) => {
            let mut s = 0.0;
            for_each_wedge_pair(&g, z, |c, c2| s += p1.at(c, c2) * p2.at(c, c2));
            s * a * a
        }
        _ => 0.0,
    };
    let rows: Vec<[f64; 5]> = (0..ens.n_paths())
        .into_par_iter()
        .map(|p| -> Result<[f64; 5]> {
            let y1 = s1.simulate(ens, p)?;
            let y2 = s2.simulate(ens, p)?;
            let mut leb = 0.0;
            let mut diag = 0.0;
            for i in 0..z.i {
                for j in 0..z.j {
                    let n = g.node(i, j);
                    let c = g.cell(i, j);
                    leb += (y1.y[n] * y2.alpha[c] + y2.y[n] * y1.alpha[c] + y1.beta[c] * y2.beta[c]) * a;
                    diag += y1.alpha[c] * y2.alpha[c] * a * a;
                }
            }
            // Σ_{c ∧̄ c', c≠c'} α₁(c')α₂(c) + α₁(c)α₂(c')
            let w1 = wedge_after_sums(&g, &y1.alpha, z);
            let w2 = wedge_after_sums(&g, &y2.alpha, z);
            let mut cross = 0.0;
            for i in 0..z.i {
                for j in 0..z.j {
                    let c = g.cell(i, j);
                    cross += y2.alpha[c] * (w1[c] - y1.alpha[c]) + y1.alpha[c] * (w2[c] - y2.alpha[c]);
                }
            }
            let lhs = y1.at(z) * y2.at(z);
            Ok([lhs, spec1.y0 * spec2.y0, leb, cross * a * a + diag, psi_term])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let names = [("const", false), ("lebesgue", false), ("pair", false), ("psi", false)];
    let groups = names
        .iter()
        .enumerate()
        .map(|(k, &(name, zero_mean))| {
            let s = MeanStat::from_samples(&col(k + 1));
            TermGroup { name, mean: s.mean, stderr: s.stderr, zero_mean }
        })
        .collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r[1] + r[2] + r[3] + r[4]).collect();
    let diffs: Vec<f64> = rows.iter().zip(&rhs).map(|(r, h)| r[0] - h).collect();
    let lhs = MeanStat::from_samples(&col(0));
    let diff = MeanStat::from_samples(&diffs);
    let rhs_mean = MeanStat::from_samples(&rhs).mean;
    let scale = 1.0 + lhs.mean.abs();
    let pass = diff.mean.abs() <= k_sigma * diff.stderr + 1e-10 * scale;
    Ok(ItoReport {
        mode: CheckMode::Expectation,
        lhs: lhs.mean,
        lhs_stderr: lhs.stderr,
        rhs: rhs_mean,
        rhs_full: rhs_mean,
        groups,
        diff: diff.mean,
        diff_stderr: diff.stderr,
        max_path_rel_err: f64::NAN,
        allowance: 0.0,
        n_paths: ens.n_paths(),
        pass,
    })
}

/// `J₀(2√t) = Σ (-t)^k / (k!)²`.
pub fn bessel_j0_sqrt(t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= -t / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive root of `J₀(2√t)`, by bisection on `[1, 2]`.
pub fn bessel_r0() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    let flo = bessel_j0_sqrt(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (bessel_j0_sqrt(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wellposedness {
    pub well_posed: bool,
    pub r0: f64,
    /// `√r₀ - K₁|z₀|`.
    pub margin_k1: f64,
    /// `1 - K₂²|z₀|`.
    pub margin_k2: f64,
}

/// Lipschitz-constant condition for existence and uniqueness of the plane BSPDE.
pub fn bspde_wellposedness(k1: f64, k2: f64, area: f64) -> Result<Wellposedness> {
    if !(k1 >= 0.0 && k2 >= 0.0 && k1.is_finite() && k2.is_finite()) {
        return Err(Error::Usage(format!("Lipschitz constants must be finite and >= 0, got {k1}, {k2}")));
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::Usage(format!("|z0| must be positive, got {area}")));
    }
    let r0 = bessel_r0();
    let margin_k1 = r0.sqrt() - k1 * area;
    let margin_k2 = 1.0 - k2 * k2 * area;
    Ok(Wellposedness { well_posed: margin_k1 > 0.0 && margin_k2 > 0.0, r0, margin_k1, margin_k2 })
}
