//! Exact transition and crossing probabilities for multi-species exclusion processes on Z,
//! together with the vertex-model functions they are built from and an independent
//! Markov-chain oracle used to validate them.

pub mod error;
pub mod formulas;
pub mod identities;
pub mod oracle;
pub mod quadrature;
pub mod vertex;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    BlockSignatureVector, ComplexPoint, IntegerComposition, ModelParams, Orientation, ParticleConfig,
    StrictSignature,
};
