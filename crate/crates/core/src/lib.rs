//! Ride-sharing potential estimation for commuter populations.

pub mod cdr;
pub mod endpoints;
pub mod enroute;
pub mod extrapolation;
pub mod geo;
pub mod population;
pub mod social;
