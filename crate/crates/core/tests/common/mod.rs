//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use sheetgame::game::{GameModel, Player};
use sheetgame::Point;

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Deterministic Example 1 with constant controls `u₂ = ratio·u₁`:
/// total cost `Σ a_i u_i² TX + Σ c_i Y(Z)²`.
pub fn example1_total_cost(a: [f64; 2], c: [f64; 2], y0: f64, area: f64, u1: f64) -> f64 {
    let ratio = c[1] * a[0] / (c[0] * a[1]);
    let u2 = ratio * u1;
    let yz = y0 + (u1 + u2) * area;
    (a[0] * u1 * u1 + a[1] * u2 * u2) * area + (c[0] + c[1]) * yz * yz
}

/// `u* = −(c₁+c₂)α y / (β + (c₁+c₂)α² TX)`.
pub fn example1_closed_form(a: [f64; 2], c: [f64; 2], y0: f64, area: f64) -> f64 {
    let ratio = c[1] * a[0] / (c[0] * a[1]);
    let alpha = 1.0 + ratio;
    let beta = a[0] + a[1] * ratio * ratio;
    -(c[0] + c[1]) * alpha * y0 / (beta + (c[0] + c[1]) * alpha * alpha * area)
}

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            if m == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Deterministic Example 2 on an `nt × nx` grid over `[0,T]×[0,X]`, controls
/// indexed by cell `i*nx + j`. State at the lower-left corner of cell `c`:
/// `y₀ + Δ Σ_{c' < c} (S − α₁u₁ − α₂u₂)(c')`, where `c' < c` is strict in both
/// coordinates. Costs `Δ Σ_c ½Y² + ½β_i u_i²`.
pub struct Example2Oracle {
    pub nt: usize,
    pub nx: usize,
    pub area: f64,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub y0: f64,
    pub source: Vec<f64>,
}

impl Example2Oracle {
    pub fn new(
        nt: usize,
        nx: usize,
        t_max: f64,
        x_max: f64,
        alpha: [f64; 2],
        beta: [f64; 2],
        y0: f64,
        source: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let (dt, dx) = (t_max / nt as f64, x_max / nx as f64);
        let mut s = Vec::with_capacity(nt * nx);
        for i in 0..nt {
            for j in 0..nx {
                s.push(source(i as f64 * dt, j as f64 * dx));
            }
        }
        Self { nt, nx, area: dt * dx, alpha, beta, y0, source: s }
    }

    fn below(&self, c: usize, c2: usize) -> bool {
        let (i, j) = (c / self.nx, c % self.nx);
        let (i2, j2) = (c2 / self.nx, c2 % self.nx);
        i2 < i && j2 < j
    }

    pub fn state(&self, u1: &[f64], u2: &[f64]) -> Vec<f64> {
        let n = self.nt * self.nx;
        (0..n)
            .map(|c| {
                self.y0
                    + self.area
                        * (0..n)
                            .filter(|&c2| self.below(c, c2))
                            .map(|c2| self.source[c2] - self.alpha[0] * u1[c2] - self.alpha[1] * u2[c2])
                            .sum::<f64>()
            })
            .collect()
    }

    pub fn cost(&self, p: usize, u1: &[f64], u2: &[f64]) -> f64 {
        let y = self.state(u1, u2);
        let u = if p == 0 { u1 } else { u2 };
        self.area * y.iter().zip(u).map(|(y, u)| 0.5 * y * y + 0.5 * self.beta[p] * u * u).sum::<f64>()
    }

    /// Exact best response of player `p` by the normal equations.
    pub fn best_response(&self, p: usize, other: &[f64]) -> Vec<f64> {
        let n = self.nt * self.nx;
        let zero = vec![0.0; n];
        let a = if p == 0 { self.state(&zero, other) } else { self.state(other, &zero) };
        let m = |c: usize, c2: usize| if self.below(c, c2) { -self.alpha[p] * self.area } else { 0.0 };
        let mut lhs = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            for l in 0..n {
                lhs[k][l] = (0..n).map(|c| m(c, k) * m(c, l)).sum();
            }
            lhs[k][k] += self.beta[p];
            rhs[k] = -(0..n).map(|c| m(c, k) * a[c]).sum::<f64>();
        }
        gauss_solve(lhs, rhs)
    }

    /// Alternate exact best responses until the update is below `tol`.
    pub fn nash(&self, tol: f64, max_rounds: usize) -> (Vec<f64>, Vec<f64>, usize) {
        let n = self.nt * self.nx;
        let (mut u1, mut u2) = (vec![0.0; n], vec![0.0; n]);
        for round in 1..=max_rounds {
            let n1 = self.best_response(0, &u2);
            let n2 = self.best_response(1, &n1);
            let d = n1.iter().zip(&u1).chain(n2.iter().zip(&u2)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            u1 = n1;
            u2 = n2;
            if d < tol {
                return (u1, u2, round);
            }
        }
        panic!("best-response iteration did not settle");
    }
}

/// `J₀(2√t)` by its power series.
pub fn j0_sqrt(t: f64) -> f64 {
    let mut term = 1.0;
    let mut s = 1.0;
    for k in 1..80 {
        term *= -t / (k as f64 * k as f64);
        s += term;
    }
    s
}

/// Plain bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sheet weight of `E[Y(Z) | F_z]` on cell `(i, j)` for Example 1 with
/// `u₁ + u₂ = κ·E[Y(Z) | F_z]` and constant noise `σ`: `σ / (1 − κΔN)` with
/// `N` the number of control cells strictly north-east of the cell.
pub fn example1_weight(sigma: f64, kappa: f64, area: f64, nt: usize, nx: usize, i: usize, j: usize) -> f64 {
    let n = ((nt - 1 - i) * (nx - 1 - j)) as f64;
    sigma / (1.0 - kappa * area * n)
}

/// Nonlinear test model: `α = 0.8 sin y + u₁ − 0.5u₂`, `β = 0.4 + 0.2 cos y + 0.3u₁`,
/// `f_i = ½y² + ½u_i² + 0.1u₁u₂ + 0.2 sin(t + x)·y`, `g_i = ½(y − 0.5)²`.
/// Partials come from the trait's finite differences.
pub struct SinDrift;

impl GameModel for SinDrift {
    fn y0(&self) -> f64 {
        0.3
    }
    fn drift(&self, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        0.8 * y.sin() + u1 - 0.5 * u2
    }
    fn diffusion(&self, _z: Point, y: f64, u1: f64, _u2: f64) -> f64 {
        0.4 + 0.2 * y.cos() + 0.3 * u1
    }
    fn running_cost(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let own = if p == Player::One { u1 } else { u2 };
        0.5 * y * y + 0.5 * own * own + 0.1 * u1 * u2 + 0.2 * (z.t + z.x).sin() * y
    }
    fn terminal_cost(&self, _p: Player, y: f64) -> f64 {
        0.5 * (y - 0.5) * (y - 0.5)
    }
}
