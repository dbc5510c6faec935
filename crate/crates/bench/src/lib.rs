//! Shared fixtures for the benchmark suite.

use semisic::povm::build_semi_sic;
use semisic::selftest::WitnessSpec;
use semisic::walk::compile_povm;
use semisic::{CoinSchedule, Povm};

/// Overlaps exercised by every benchmark group.
pub const OVERLAPS: [(u64, u64); 3] = [(1, 13), (1, 14), (1, 15)];

pub fn povm(b: (u64, u64)) -> Povm {
    build_semi_sic(b.0 as f64 / b.1 as f64).expect("overlap in range")
}

pub fn schedule(b: (u64, u64)) -> CoinSchedule {
    compile_povm(&povm(b)).expect("semi-SIC compiles")
}

pub fn witness(b: (u64, u64)) -> WitnessSpec {
    semisic::selftest::fit_witness(b.0 as f64 / b.1 as f64, 0).expect("witness fit")
}
