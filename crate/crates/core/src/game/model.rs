use serde::{Deserialize, Serialize};

use crate::grid::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// `(u1, u2)` with player `self`'s entry shifted by `d`.
    #[inline]
    pub fn shift(self, u1: f64, u2: f64, d: f64) -> (f64, f64) {
        match self {
            Player::One => (u1 + d, u2),
            Player::Two => (u1, u2 + d),
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Two-player game on the plane: `dY = α dz + β B(dz)` with boundary value
/// `y₀`, player `i` minimizing `E[∫ f_i dz + g_i(Y(Z))]`.
///
/// Partial derivatives default to central differences; models with closed
/// forms override them.
pub trait GameModel: Send + Sync {
    fn y0(&self) -> f64;
    fn drift(&self, z: Point, y: f64, u1: f64, u2: f64) -> f64;
    fn diffusion(&self, z: Point, y: f64, u1: f64, u2: f64) -> f64;
    fn running_cost(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64;
    fn terminal_cost(&self, _p: Player, _y: f64) -> f64 {
        0.0
    }

    fn control_set(&self, _p: Player) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn drift_dy(&self, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(y);
        (self.drift(z, y + h, u1, u2) - self.drift(z, y - h, u1, u2)) / (2.0 * h)
    }

    fn drift_du(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(if p == Player::One { u1 } else { u2 });
        let (a1, a2) = p.shift(u1, u2, h);
        let (b1, b2) = p.shift(u1, u2, -h);
        (self.drift(z, y, a1, a2) - self.drift(z, y, b1, b2)) / (2.0 * h)
    }

    fn diffusion_dy(&self, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(y);
        (self.diffusion(z, y + h, u1, u2) - self.diffusion(z, y - h, u1, u2)) / (2.0 * h)
    }

    fn diffusion_du(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(if p == Player::One { u1 } else { u2 });
        let (a1, a2) = p.shift(u1, u2, h);
        let (b1, b2) = p.shift(u1, u2, -h);
        (self.diffusion(z, y, a1, a2) - self.diffusion(z, y, b1, b2)) / (2.0 * h)
    }

    fn cost_dy(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(y);
        (self.running_cost(p, z, y + h, u1, u2) - self.running_cost(p, z, y - h, u1, u2)) / (2.0 * h)
    }

    fn cost_du(&self, p: Player, z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let h = fd_step(if p == Player::One { u1 } else { u2 });
        let (a1, a2) = p.shift(u1, u2, h);
        let (b1, b2) = p.shift(u1, u2, -h);
        (self.running_cost(p, z, y, a1, a2) - self.running_cost(p, z, y, b1, b2)) / (2.0 * h)
    }

    fn terminal_dy(&self, p: Player, y: f64) -> f64 {
        let h = fd_step(y);
        (self.terminal_cost(p, y + h) - self.terminal_cost(p, y - h)) / (2.0 * h)
    }
}

/// Linear-quadratic family with optional state/control coupling:
///
/// `α = a0 + ay·y + b1·u1 + b2·u2 + ayu·y·u1`,
/// `β = s0 + sy·y + d1·u1 + d2·u2`,
/// `f_i = ½q_i y² + ½r_i u_i² + m_i y u_i`, `g_i = ½h_i y² + l_i y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqModel {
    pub y0: f64,
    pub a0: f64,
    pub ay: f64,
    pub b1: f64,
    pub b2: f64,
    pub ayu: f64,
    pub s0: f64,
    pub sy: f64,
    pub d1: f64,
    pub d2: f64,
    pub q: [f64; 2],
    pub r: [f64; 2],
    pub m: [f64; 2],
    pub h: [f64; 2],
    pub l: [f64; 2],
}

impl Default for LqModel {
    fn default() -> Self {
        Self {
            y0: 1.0,
            a0: 0.0,
            ay: 0.0,
            b1: 1.0,
            b2: 1.0,
            ayu: 0.0,
            s0: 0.0,
            sy: 0.0,
            d1: 0.0,
            d2: 0.0,
            q: [0.0; 2],
            r: [1.0; 2],
            m: [0.0; 2],
            h: [1.0; 2],
            l: [0.0; 2],
        }
    }
}

impl LqModel {
    fn own(p: Player, u1: f64, u2: f64) -> f64 {
        match p {
            Player::One => u1,
            Player::Two => u2,
        }
    }
}

impl GameModel for LqModel {
    fn y0(&self) -> f64 {
        self.y0
    }

    fn drift(&self, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        self.a0 + self.ay * y + self.b1 * u1 + self.b2 * u2 + self.ayu * y * u1
    }

    fn diffusion(&self, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        self.s0 + self.sy * y + self.d1 * u1 + self.d2 * u2
    }

    fn running_cost(&self, p: Player, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let k = p.index();
        let u = Self::own(p, u1, u2);
        0.5 * self.q[k] * y * y + 0.5 * self.r[k] * u * u + self.m[k] * y * u
    }

    fn terminal_cost(&self, p: Player, y: f64) -> f64 {
        let k = p.index();
        0.5 * self.h[k] * y * y + self.l[k] * y
    }

    fn drift_dy(&self, _z: Point, _y: f64, u1: f64, _u2: f64) -> f64 {
        self.ay + self.ayu * u1
    }

    fn drift_du(&self, p: Player, _z: Point, y: f64, _u1: f64, _u2: f64) -> f64 {
        match p {
            Player::One => self.b1 + self.ayu * y,
            Player::Two => self.b2,
        }
    }

    fn diffusion_dy(&self, _z: Point, _y: f64, _u1: f64, _u2: f64) -> f64 {
        self.sy
    }

    fn diffusion_du(&self, p: Player, _z: Point, _y: f64, _u1: f64, _u2: f64) -> f64 {
        match p {
            Player::One => self.d1,
            Player::Two => self.d2,
        }
    }

    fn cost_dy(&self, p: Player, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let k = p.index();
        self.q[k] * y + self.m[k] * Self::own(p, u1, u2)
    }

    fn cost_du(&self, p: Player, _z: Point, y: f64, u1: f64, u2: f64) -> f64 {
        let k = p.index();
        self.r[k] * Self::own(p, u1, u2) + self.m[k] * y
    }

    fn terminal_dy(&self, p: Player, y: f64) -> f64 {
        let k = p.index();
        self.h[k] * y + self.l[k]
    }
}
