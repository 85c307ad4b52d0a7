//! Independent implementations used only to check the engine: the full
//! algorithm with explicit virtual servers, exhaustive path enumeration,
//! offline optima and a greedy baseline.

pub mod enumerate;
pub mod greedy;
pub mod mv;
pub mod opt;

use thiserror::Error;

pub use enumerate::{enumerate_aug_paths, enumerate_min_aug_path, EnumError};
pub use greedy::greedy_baseline;
pub use mv::{vrm_with_mv_servers, MvError, MvRun};
pub use opt::{hungarian, min_cost_matching, opt_bruteforce, opt_hungarian, opt_hungarian_exact, OptMatching};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleConfig {
    /// Largest `m` accepted by brute force and exhaustive enumeration.
    pub max_m_bruteforce: usize,
    /// Largest number of complete paths one enumeration may visit.
    pub max_paths: u64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_m_bruteforce: 8, max_paths: 50_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("m = {m} exceeds the brute-force limit {limit}")]
pub struct TooLarge {
    pub m: usize,
    pub limit: usize,
}
