//! Special functions, random streams, quadrature and grid search.

pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use optimize::{grid_minimize, grid_minimize_2d, Axis, GridMinimum};
pub use quadrature::{quad_01, quad_01_with};
pub use rng::{
    sample_bernoulli, sample_beta, sample_gamma, sample_uniform, sample_uniform_choice, RngStream,
    StreamRng,
};
pub use special::{ln_beta, ln_gamma, log_beta, log_hypergeom_pmf, BetaParams};
