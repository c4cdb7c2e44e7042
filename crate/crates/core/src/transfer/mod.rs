//! Monolingual and bilingual transfer experiments with seed averaging and
//! paired randomization tests.

pub mod csv_io;
pub mod grid;
pub mod stats;

pub use grid::{
    run_bilingual_grid, run_monolingual_grid, BilingualGrid, Comparison, GridSetup, SeedRun,
    TransferResult, DEFAULT_SEEDS,
};
pub use stats::{average_over_seeds, significance_test, DEFAULT_PERMUTATIONS, EXACT_LIMIT};
