//! Every tunable default in one table.
//!
//! | name | value | used by |
//! |---|---|---|
//! | `DENSE_THRESHOLD` | 4000 | dense vs. Lanczos eigensolver |
//! | `EIGEN_TOL` | 1e-12 | iterative eigen residual |
//! | `INNER_TABLE_CAP` | 5000 | all-pairs inner distance table |
//! | `IU_EXHAUSTIVE_CAP` | 1500 | exhaustive inner-uniform pair search |
//! | `IU_SAMPLE_PAIRS` | 4000 | sampled inner-uniform pairs |
//! | `UNDERFLOW` | 1e-280 | switch to log representation |
//! | `HARMONIC_TOL` | 1e-10 | harmonicity precondition |
//! | `THETA` | 2 | Poincare and Nash exponent |
//! | `SEED` | 7 | default RNG seed |
//! | `LAZY_HOLDING` | 0.5 | holding added by `--lazify` |
//! | `OUTPUT_ENV` | `KILLED_CHAINS_OUT` | default output root variable |

pub const DENSE_THRESHOLD: usize = 4000;
pub const EIGEN_TOL: f64 = 1e-12;
pub const INNER_TABLE_CAP: usize = 5000;
pub const IU_EXHAUSTIVE_CAP: usize = 1500;
pub const IU_SAMPLE_PAIRS: usize = 4000;
pub const UNDERFLOW: f64 = 1e-280;
pub const HARMONIC_TOL: f64 = 1e-10;
pub const THETA: f64 = 2.0;
pub const SEED: u64 = 7;
pub const LAZY_HOLDING: f64 = 0.5;
pub const OUTPUT_ENV: &str = "KILLED_CHAINS_OUT";
pub const DEFAULT_OUTPUT: &str = "killed-chains-out";
