//! Quantitative recurrence and shrinking-target counting for expanding
//! piecewise-linear full-branch maps on `[0,1]^d`.
//!
//! - [`maps`]: product maps, cylinders, exact evaluation.
//! - [`points`]: lazily realized generic points and certified orbit-distance
//!   predicates.
//! - [`rate`] and [`counting`]: rate functions `psi`, the main term `Psi(N)`,
//!   and the counting functions `R(x,N)` and `W(x,N)`.
//! - [`measure`]: exact cylinder-decomposition oracles for event measures,
//!   intersections and mixing deficits.
//! - [`harness`]: seeded Monte Carlo experiments and their statistics.

pub mod counting;
pub mod harness;
pub mod maps;
pub mod measure;
pub mod points;
pub mod rate;
pub mod rational;

pub use maps::{AxisCylinder, BranchSpec1D, Cylinder, MapError, MapSpec};
pub use rational::Rational;
pub use counting::{CountRecord, EventKind};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use points::{GenericPoint, Outcome, TargetPoint};
pub use rate::{RateFamily, RateFunction};
