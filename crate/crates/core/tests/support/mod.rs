#![allow(dead_code)]

pub mod fec_oracle;

/// Oracle success rate for L = 128, r = 128 QPSK exchanges with 0.15 rad
/// per-phase disagreement, 10^3 trials. Frozen by `fec_oracle_baseline`.
pub const FEC_BASELINE_STD_0_15: f64 = 1.0;
