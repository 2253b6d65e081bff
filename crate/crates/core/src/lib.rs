//! Adaptive-multilevel BDDC for symmetric positive definite finite-element
//! systems.

pub mod linalg;
pub mod level;
pub mod mesh;
pub mod partition;
pub mod constraints;
pub mod substructure;
pub mod precond;
pub mod krylov;
pub mod oracle;
pub mod adaptive;
pub mod driver;
