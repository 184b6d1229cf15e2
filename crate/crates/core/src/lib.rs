//! Verified numerics for Gaussian theta frames over the irrational rotation
//! algebra: certified theta series, square convergents, twisted-polynomial
//! coefficient calculus and the quantitative bounds built from them.

pub mod numkit;
pub mod theta;
pub mod diophantine;
pub mod frame;
pub mod nctorus;
pub mod bounds;
pub mod cli;
