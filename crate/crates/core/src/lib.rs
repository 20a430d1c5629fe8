//! Nested-grid nonlinear shallow-water solver with block decomposition,
//! halo exchange between workers and a cost-model driven load balancer.

pub mod balance;
pub mod coupling;
pub mod exchange;
pub mod field;
pub mod grid;
pub mod kernels;
pub mod raster;
pub mod sim;
pub mod topology;
