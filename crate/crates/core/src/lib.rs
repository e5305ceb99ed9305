//! Noise model, Fock-space oracle and fitting tools for heralded
//! three-photon sources built from an SPDC pair and an attenuated laser.
//!
//! The [`analytic`] module holds the closed-form coincidence rates,
//! [`fock`] an independent photon-number simulation of the same setup,
//! [`protocol`] the three-step shutter measurement, [`fidelity`] the
//! teleportation fidelity estimates and [`fitting`] the fits to data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod fidelity;
pub mod fitting;
pub mod fock;
pub mod optimize;
pub mod protocol;

pub use analytic::{CoincidenceRates, SourceParams};
pub use error::{Error, Result};
pub use fidelity::{FidelityEstimate, IntervalKind, McConfig};
pub use fitting::{DataPoint, Dataset, FitResult};
pub use fock::{JointPhotonDistribution, ShutterConfig};
pub use num_complex::Complex64;
pub use protocol::{Acquisition, AttenuationSetting, Engine, ThreeStepResult};
