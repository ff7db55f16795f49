//! Outer loop, acceleration sequence, inexactness schedules and audits.

mod audit;
mod driver;
mod schedule;
mod theta;

pub use audit::*;
pub use driver::*;
pub use schedule::*;
pub use theta::*;
