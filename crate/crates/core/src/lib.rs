pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod scalar;
pub mod scenario;
pub mod thermal;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Network graph in double precision.
pub type Network = network::NetworkGraph<f64>;
pub type Flow = network::FlowField<f64>;
pub type System = thermal::ThermalSystem<f64>;
pub type Control = thermal::ControlTrajectory<f64>;
pub type Trajectory = thermal::StateTrajectory<f64>;
pub type OptimalControlProblem = objective::Problem<f64>;
/// Single-precision variants for memory-bound simulation.
pub type NetworkF32 = network::NetworkGraph<f32>;
pub type SystemF32 = thermal::ThermalSystem<f32>;
