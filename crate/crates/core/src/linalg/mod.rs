//! Dense and Krylov linear algebra.

pub mod dense;
pub mod krylov;

pub use dense::{
    generalized_eig, hermitian_eig, inv_sqrt, ComplexMatrix, GeneralizedEigen,
    GeneralizedEigenProblem,
};
pub use krylov::{deflated_solve, dominant_eigenpair, Eigenpair, KrylovOptions, LinearMap};
