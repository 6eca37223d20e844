pub mod augmentation;
pub mod ctm;
pub mod error;
pub mod gaussian;
pub mod geweke;
pub mod mult_gp;
pub mod mult_lds;
pub mod polya_gamma;
pub mod rng;
pub mod scalar;
pub mod stick_breaking;

pub use error::{Error, Result};
pub use scalar::{lit, Real};

pub type StickCoords64 = stick_breaking::StickCoords<f64>;
pub type SimplexPoint64 = stick_breaking::SimplexPoint<f64>;
pub type GaussianPotential64 = augmentation::GaussianPotential<f64>;
pub type PgAuxiliaries64 = augmentation::PgAuxiliaries<f64>;
pub type CtmState64 = ctm::CtmState<f64>;
pub type MvnParams64 = gaussian::MvnParams<f64>;
