pub mod bath;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod quadrature;
