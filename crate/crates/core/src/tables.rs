//! Tabulated reference data for the optical realisation: four-decimal coin
//! matrices for `B = 1/13`, two-decimal plate angles for several `B`, and the
//! optimal self-test preparations for `B = 1/13`.
//!
//! Rounded values are kept exactly as tabulated; consumers compare against
//! them with the `TABLE_*` tolerances.

use crate::error::Result;
use crate::qmath::{c, r, Mat2, PureQubit};
use crate::tol;
use crate::walk::CoinSchedule;

/// Coins `(step, site, matrix)` of the five-step schedule realising the
/// semi-SIC POVM with `B = 1/13` directly (ports `5, 3, 1, −1` ↔ `E₁…E₄`).
pub fn povm_coins_b13() -> Vec<(u32, i64, Mat2)> {
    vec![
        (1, 0, Mat2::identity()),
        (2, 1, Mat2::real(0.6011, 0.7992, 0.7992, -0.6011)),
        (2, -1, Mat2::pauli_x()),
        (3, 0, Mat2::real(0.5551, 0.8318, 0.8318, -0.5551)),
        (4, 1, Mat2::real(0.6941, 0.7199, 0.7199, -0.6941)),
        (4, -1, Mat2::pauli_x()),
        (
            5,
            0,
            Mat2::new(c(-0.0771, 0.7029), c(0.7028, 0.0771), c(0.0771, 0.7028), c(-0.7028, 0.0771)),
        ),
    ]
}

/// Coins of the self-test variant for `B = 1/13`: same real rotations, with
/// general coins at steps 1, 3 and 5.
pub fn selftest_coins_b13() -> Vec<(u32, i64, Mat2)> {
    vec![
        (
            1,
            0,
            Mat2::new(c(0.9381, 0.0614), c(0.2563, -0.2248), c(-0.2248, 0.2563), c(-0.0614, -0.9381)),
        ),
        (2, 1, Mat2::real(0.6011, 0.7992, 0.7992, -0.6011)),
        (2, -1, Mat2::pauli_x()),
        (
            3,
            0,
            Mat2::new(c(-0.4281, -0.3533), c(0.8106, -0.1866), c(-0.1866, 0.8106), c(0.3533, 0.4281)),
        ),
        (4, 1, Mat2::real(0.6941, 0.7199, 0.7199, -0.6941)),
        (4, -1, Mat2::pauli_x()),
        (
            5,
            0,
            Mat2::new(c(0.6882, 0.1625), c(-0.6882, 0.1625), c(0.1625, -0.6882), c(-0.1625, -0.6882)),
        ),
    ]
}

fn schedule_from(coins: Vec<(u32, i64, Mat2)>) -> Result<CoinSchedule> {
    let mut s = CoinSchedule::new(5, 0)?;
    for (step, site, m) in coins {
        s.insert_with_tol(step, site, m, tol::TABLE_MATRIX)?;
    }
    Ok(s)
}

/// The four-decimal POVM schedule, admitted at the table tolerance.
pub fn povm_schedule_b13() -> CoinSchedule {
    schedule_from(povm_coins_b13()).expect("tabulated coins are unitary to four decimals")
}

/// The four-decimal self-test schedule, admitted at the table tolerance.
pub fn selftest_schedule_b13() -> CoinSchedule {
    schedule_from(selftest_coins_b13()).expect("tabulated coins are unitary to four decimals")
}

/// One row of a plate-angle table: `B = num/den` and `(label, degrees)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateRow {
    pub b: (u64, u64),
    pub angles: &'static [(&'static str, f64)],
}

impl PlateRow {
    pub fn b_value(&self) -> f64 {
        self.b.0 as f64 / self.b.1 as f64
    }

    pub fn angle(&self, label: &str) -> Option<f64> {
        self.angles.iter().find(|(l, _)| *l == label).map(|p| p.1)
    }
}

/// Plate angles realising the semi-SIC POVMs. The step-1 plates are absent
/// (identity coin); HWP4 and HWP7 stay at 45°.
pub const POVM_PLATES: [PlateRow; 4] = [
    PlateRow {
        b: (1, 12),
        angles: &[("HWP3", 22.5), ("HWP4", 45.0), ("HWP5", 22.5), ("HWP6", 17.63), ("HWP7", 45.0), ("QWP4", 60.34), ("HWP8", 7.67)],
    },
    PlateRow {
        b: (1, 13),
        angles: &[("HWP3", 26.53), ("HWP4", 45.0), ("HWP5", 28.14), ("HWP6", 23.02), ("HWP7", 45.0), ("QWP4", 96.26), ("HWP8", 25.63)],
    },
    PlateRow {
        b: (1, 14),
        angles: &[("HWP3", 28.05), ("HWP4", 45.0), ("HWP5", 31.86), ("HWP6", 24.96), ("HWP7", 45.0), ("QWP4", 67.03), ("HWP8", 11.01)],
    },
    PlateRow {
        b: (1, 15),
        angles: &[("HWP3", 29.14), ("HWP4", 45.0), ("HWP5", 36.0), ("HWP6", 26.31), ("HWP7", 45.0), ("QWP4", 22.19), ("HWP8", -11.4)],
    },
];

/// Plate angles of the self-test walk.
pub const SELFTEST_PLATES: [PlateRow; 3] = [
    PlateRow {
        b: (1, 13),
        angles: &[("QWP2", 15.28), ("HWP2", 0.9), ("HWP3", 26.53), ("HWP4", 45.0), ("QWP3", -62.16), ("HWP5", -19.31), ("HWP6", 23.02), ("HWP7", 45.0), ("QWP4", -45.0), ("HWP8", -15.86)],
    },
    PlateRow {
        b: (1, 14),
        angles: &[("QWP2", 11.41), ("HWP2", 0.41), ("HWP3", 28.05), ("HWP4", 45.0), ("QWP3", -69.79), ("HWP5", -25.63), ("HWP6", 24.96), ("HWP7", 45.0), ("QWP4", -45.0), ("HWP8", -13.68)],
    },
    PlateRow {
        b: (1, 15),
        angles: &[("QWP2", 7.56), ("HWP2", 0.13), ("HWP3", 29.14), ("HWP4", 45.0), ("QWP3", -76.81), ("HWP5", -32.05), ("HWP6", 26.31), ("HWP7", 45.0), ("QWP4", -45.0), ("HWP8", -12.28)],
    },
];

/// Four-decimal amplitudes `(amp_H, amp_V)` of the optimal self-test
/// preparations for `B = 1/13`, as printed (not renormalised).
pub fn preparation_amplitudes_b13() -> [[crate::qmath::C64; 2]; 4] {
    [
        [r(0.3409), c(-0.6648, -0.6648)],
        [r(0.3409), c(0.6648, 0.6648)],
        [r(0.8468), c(0.3761, -0.3761)],
        [r(0.8468), c(-0.3761, 0.3761)],
    ]
}

/// The same preparations, normalised.
pub fn preparations_b13() -> [PureQubit; 4] {
    preparation_amplitudes_b13()
        .map(|[h, v]| PureQubit::from_amplitudes(h, v).expect("nonzero amplitudes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_admit_rounded_coins() {
        assert!(povm_schedule_b13().max_unitarity_residual() < 1e-3);
        assert!(selftest_schedule_b13().max_unitarity_residual() < 1e-3);
    }

    #[test]
    fn real_rotation_squares_to_identity() {
        let c12 = povm_coins_b13()[1].2;
        assert!((c12 * c12 - Mat2::identity()).max_abs() < 1e-3);
    }

    #[test]
    fn printed_preparations_nearly_normalised() {
        for ([h, v], psi) in preparation_amplitudes_b13().iter().zip(preparations_b13()) {
            assert!((h.norm_sqr() + v.norm_sqr() - 1.0).abs() < 2e-4);
            assert!((psi.amp_h() - h).norm() < 1e-4);
            assert!((psi.amp_v() - v).norm() < 1e-4);
        }
    }

    #[test]
    fn plate_rows_lookup() {
        assert_eq!(POVM_PLATES[1].angle("HWP3"), Some(26.53));
        assert_eq!(SELFTEST_PLATES[0].angle("QWP3"), Some(-62.16));
        assert_eq!(POVM_PLATES[0].angle("QWP2"), None);
    }
}
