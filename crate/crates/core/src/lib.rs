//! Time encoding of low-rank parametric signal ensembles and recovery from spikes.
//!
//! Signals `y = A·x` share `J` latent components drawn from a finite
//! parametric basis. Each TEM integrates its input plus a bias and fires on
//! threshold crossings; every spike pair yields a linear measurement of `C(x)`
//! (mixing known) or a rank-one measurement of `C(y)` (mixing unknown).

pub mod error;
pub mod exec;
pub mod experiment;
pub mod fourier_model;
pub mod linalg;
pub mod recon_known;
pub mod scene;
pub mod special;
pub mod svp;
pub mod tem;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fourier_model::{BasisSet, Channel, CoefficientMatrix, MixingMatrix, SignalEnsemble};
pub use recon_known::{assemble_system, feasibility, solve, FeasibilityReport, InitMode, MeasurementSystem};
pub use scene::{interpolate_patch, SceneDims, SceneSpec, SensorGrid, VideoPatch};
pub use svp::{svp_recover, SensingOperator, SvpConfig, SvpOutcome};
pub use tem::{encode, encode_ensemble, SpikeTrain, TemParams};
