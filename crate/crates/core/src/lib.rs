pub mod blockform;
pub mod error;
pub mod linalg;
pub mod mtx;
pub mod random;
pub mod riccati;
pub mod spectral;
pub mod stokes;
pub mod subspace;
pub mod verify;

pub use blockform::{BlockDecomposition, SaddlePointMatrix};
pub use error::{Error, Result};
pub use linalg::Matrix;
