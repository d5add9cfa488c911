//! Numerical laboratory for pre- and post-selected quantum measurements.
//!
//! The crate models a finite-dimensional system coupled to a continuous 1-D
//! pointer through the impulsive interaction `exp(-i g A P)`, and provides:
//!
//! * [`hilbert`]: dense complex states and operators, Hermitian
//!   eigendecomposition (cyclic Jacobi), tensor products, expectation values.
//! * [`pointer`]: a periodic position grid carrying the pointer wavefunction,
//!   with translation and `exp(cP)` kernels applied in momentum space.
//! * [`projective`]: exact von Neumann coupling, Born-rule collapse,
//!   post-selection of the joint state, and the ABL conditional rule.
//! * [`weak`]: weak values, their conditional real/imaginary forms, the exact
//!   and first-order post-selected pointer, readout, and the classical and
//!   current-density companions.
//! * [`scenarios`]: JSON scenario configs, the built-in registry (three-box
//!   and friends), sweeps, and JSON/CSV reports.
//!
//! Units: `hbar = 1` throughout. Complex numbers are `Complex64`.

pub mod error;
pub mod fit;
pub mod hilbert;
pub mod pointer;
pub mod projective;
pub mod scenarios;
pub mod weak;

pub use error::{Error, Result};
pub use hilbert::{Operator, SpectralDecomposition, StateVector};
pub use num_complex::Complex64;
pub use pointer::{GridSpec, Moments, NormTag, PointerState};
pub use projective::JointState;
pub use weak::{PostSelection, WeakScenario, WeakValue};

/// Threshold below which a post-selection (or ABL denominator) is treated as
/// impossible.
pub const EPS_POST_SELECTION: f64 = 1e-12;

/// Post-selection probabilities below this still produce a weak value, but
/// flagged as being in the divergent regime.
pub const DIVERGENCE_WARNING: f64 = 1e-6;
