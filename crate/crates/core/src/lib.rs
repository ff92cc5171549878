//! Localized effective spins in gapped spin chains with matrix-product states.

pub mod aklt;
pub mod analysis;
pub mod checkpoint;
pub mod defect;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod spin;
pub mod transfer;
pub mod uniform;
pub mod vumps;
pub mod window;

pub use error::{Error, Result};
pub use faer::c64;
pub use linalg::ComplexMatrix;
pub use mps::MpsTensor;
pub use transfer::{SpectralData, TransferOperator};
pub use window::{Background, WindowMps};
pub use uniform::UniformMps;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
