//! Fixtures shared by the benchmarks.

use vrm_core::harness::gen::{generate, Family, GenSpec};
use vrm_core::Instance;

/// Seeded instance of the given family and size.
pub fn fixture(family: Family, m: usize) -> Instance {
    generate(&GenSpec::new(family, m, 42)).expect("default parameters are valid")
}
