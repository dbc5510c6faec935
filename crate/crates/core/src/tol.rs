//! Central tolerance table.
//!
//! Internal algebra is checked at machine-level tolerances; anything compared
//! against tabulated four-decimal data uses the looser `TABLE_*` values.

/// Hermiticity / trace checks on constructed states.
pub const STATE: f64 = 1e-12;
/// Positivity of density matrices and POVM elements.
pub const PSD: f64 = 1e-10;
/// Unitarity of coins and plate products.
pub const UNITARY: f64 = 1e-10;
/// Completeness, symmetry and rank-one residuals of constructed POVMs.
pub const POVM: f64 = 1e-10;
/// Compile -> extract round trip.
pub const COMPILE: f64 = 1e-9;
/// Plate decomposition of exactly reachable unitaries.
pub const DECOMPOSE: f64 = 1e-9;
/// Probabilities more negative than this are an error rather than rounding.
pub const NEG_PROB: f64 = 1e-12;
/// Agreement with matrices tabulated to four decimals.
pub const TABLE_MATRIX: f64 = 2e-3;
/// Agreement with plate angles tabulated to two decimals, in degrees.
pub const TABLE_ANGLE_DEG: f64 = 0.05;
/// Witness values from the optimiser against the closed-form maximum.
pub const WITNESS: f64 = 1e-3;

/// Per-call overrides of the defaults above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub psd: f64,
    pub povm: f64,
    pub unitary: f64,
    pub compile: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: PSD,
            povm: POVM,
            unitary: UNITARY,
            compile: COMPILE,
        }
    }
}
