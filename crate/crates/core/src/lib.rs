//! Differential energy operators `Ψ_k^±` and generalized energy operators
//! `[[·]^p]_k^±` evaluated exactly on truncated Taylor jets, with numerical
//! checks of their derivative-of-power decompositions and an application to
//! evanescent wave fields.

pub mod cli;
pub mod decomposition;
pub mod error;
pub mod generator;
pub mod jet;
pub mod energy_space;
pub mod ops;
pub mod quadrature;
pub mod wavefields;

pub use decomposition::{BasisFit, DecompositionReport, Family};
pub use error::{Error, Result};
pub use generator::Generator;
pub use jet::{AntiderivPolicy, ExtendedJet, Fill, JetConfig};
pub use ops::{OperatorId, RecursionConvention, Sign};
