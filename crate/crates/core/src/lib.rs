pub mod boolean;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod gronwall;
pub mod hermite;
pub mod level;
pub mod monotone;
pub mod process;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use boolean::{BooleanFunction, Normalization, SpectralSummary};
pub use error::{Error, Result};
pub use scalar::{Rational, Real};

pub type GaussianFunctional64 = gaussian::GaussianFunctional<f64>;
pub type HermiteMoment64 = hermite::HermiteMoment<f64>;
pub type Trajectory64 = gronwall::Trajectory<f64>;
