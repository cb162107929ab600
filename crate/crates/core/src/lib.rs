// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod benchmarks;
pub mod config;
pub mod control;
pub mod driver;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod linsolve;
pub mod marking;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod selfcheck;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{TetGeometry, Vec3};
pub use scalar::Real;

pub type Mesh = mesh::TetMesh<f64>;
pub type Problem = problem::ProblemSpec<f64>;
pub type Disc = assembly::Discretization<f64>;
pub type Edges = spaces::EdgeField<f64>;
pub type Control = spaces::P0Field<f64>;
pub type Kkt = control::KktSolution<f64>;
pub type Indicator = estimator::IndicatorReport<f64>;
pub type Point = geometry::Vec3<f64>;
