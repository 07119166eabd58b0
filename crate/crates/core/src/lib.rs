//! Pseudo-gradient flows, navigation functions and explicit motion planners
//! on embedded manifolds.

pub mod bounds;
pub mod embed;
pub mod fiber;
pub mod flow;
pub mod linalg;
pub mod navfun;
pub mod planner;
pub mod verify;
