//! Shared inputs for the benchmarks.

use sparselab::corpus::{band_limited, bump};
use sparselab::heatlp::{SquareEngine, SquareFunctionKind, TimeGrid};
use sparselab::sparse::SparseBuildConfig;
use sparselab::SampledFunction;

pub fn signal(n: usize) -> SampledFunction {
    band_limited(42, n, 16.min(n / 4)).expect("valid band")
}

pub fn test_function(n: usize) -> SampledFunction {
    bump(n, 0.37, 0.1).expect("valid grid")
}

pub fn engine(n: usize, nodes: usize) -> SquareEngine {
    let grid = TimeGrid::new(1e-8, 1e2, nodes).expect("valid grid");
    SquareEngine::new(n, SquareFunctionKind::Vertical, grid).expect("valid kind")
}

pub fn sparse_config(nodes: usize) -> SparseBuildConfig {
    let mut cfg = SparseBuildConfig::new(1.0, 4.0);
    cfg.time_grid = TimeGrid::new(1e-8, 1e2, nodes).expect("valid grid");
    cfg
}
