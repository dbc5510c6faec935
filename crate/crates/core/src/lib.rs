//! Semi-symmetric informationally complete (semi-SIC) qubit measurements.
//!
//! The crate covers the whole chain from the measurement family to its
//! certification:
//!
//! - [`qmath`]: closed-form 2×2 complex linear algebra for qubit states and effects.
//! - [`povm`]: the semi-SIC family indexed by the pairwise overlap `B`, with verification.
//! - [`walk`]: a one-dimensional coined quantum walk, effective-POVM extraction and a
//!   compiler from four-outcome rank-one POVMs to five-step coin schedules.
//! - [`optics`]: Jones matrices for half/quarter-wave plates, plate decomposition of
//!   coins and an optical noise model.
//! - [`selftest`]: prepare-and-measure statistics, the linear witness, its qubit
//!   maximum, see-saw optimisation and finite-shot estimation.
//! - [`tables`]: coin matrices, plate angles and states tabulated for the optical
//!   realisation, used as fixtures and regression references.

pub mod error;
pub mod optics;
pub mod optim;
pub mod overlap;
pub mod povm;
pub mod qmath;
pub mod selftest;
pub mod tables;
pub mod tol;
pub mod walk;

pub use error::{Error, Result};
pub use optics::{NoiseModel, PlateChain, PlateKind, WaveplateSetting};
pub use overlap::Overlap;
pub use povm::{Povm, PovmElement, SemiSicParams, VerificationReport};
pub use qmath::{DensityMat, Mat2, PureQubit, C64};
pub use selftest::{PamScenario, WitnessResult, WitnessSpec};
pub use walk::{CoinOp, CoinSchedule, KrausSet, WalkState};
