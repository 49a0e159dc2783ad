//! Proof-pipeline machinery: nested multiscale solves, the oscillation
//! cascade, the boundary-derivative extraction with its scale modulus, and
//! the dyadic Log-Lipschitz induction.

pub mod calibrate;
pub mod derivative;
pub mod envelope;
pub mod loglip;
pub mod modulus;
pub mod multiscale;
pub mod report;

pub use derivative::{boundary_derivative, DecayReport, DerivativeConfig, ScaleRow};
pub use envelope::{run_oscillation_cascade, CascadeConfig, CascadeLevel, OscillationTrace};
pub use loglip::{log_lip_induction, LogLipConfig, LogLipReport, LogLipStep};
pub use modulus::{scale_modulus, ModulusTerms, MonotoneEnvelope, PsiFn, SourceScale};
pub use multiscale::{MultiscaleConfig, MultiscaleSolution};
