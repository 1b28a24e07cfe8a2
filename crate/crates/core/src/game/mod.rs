//! Two-player nonzero-sum games driven by a controlled sheet process.

pub mod affine;
pub mod condexp;
pub mod engine;
pub mod fixed_point;
pub mod model;
pub mod nash;
pub mod policy;

pub use affine::AffineField;
pub use condexp::{conditional_expectation, Projection, Target};
pub use engine::{
    evaluate_costs, gateaux_j, hamiltonian, hamiltonian_du, simulate_g, solve_adjoint_linear, AdjointConvention,
    AdjointState, GateauxOptions, GateauxReport,
};
pub use fixed_point::{damped_picard, solve_l, PicardOptions, PicardTrace};
pub use model::{GameModel, LqModel, Player};
pub use nash::{check_nash, NashEntry, NashOptions, NashReport, StationarityEntry};
pub use policy::{standard_directions, Controls, Direction, Policy};
