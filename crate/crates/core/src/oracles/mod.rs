//! Brute-force reference solutions used to cross-check the series route.

pub mod fd;
pub mod reflected;

pub use fd::{f_fd_richardson, f_fd_solve, FdEstimate, FdGrid};
pub use reflected::{f_mc_reflected, survival_mc, McEstimate, ReflectedWalker};
