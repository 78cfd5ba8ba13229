pub mod expr;
pub mod games;
pub mod lower;
pub mod model;
pub mod report;
pub mod robust;
mod roots;
pub mod scalar;
pub mod setreal;
pub mod solutions;
pub mod verify;

pub use scalar::Scalar;
pub use setreal::{ExtendedRealSet, Interval, SetError, SetOrder};

pub type RealSet = ExtendedRealSet<f64>;
pub type Instance = model::BilevelInstance<f64>;
