//! Shared fixtures for the benchmarks.

use crslab_core::generators::{complete_bipartite, cycle, er_one_regular, tree_hard};
use crslab_core::Instance;

/// Named instances of a few sizes, built once per benchmark group.
pub fn fixtures() -> Vec<(&'static str, Instance)> {
    vec![
        ("cycle_31", cycle(31, 0.5).expect("cycle")),
        ("tree_hard_30", tree_hard(30).expect("tree_hard")),
        ("k_100_100", complete_bipartite(100).expect("complete_bipartite")),
        ("er_500", er_one_regular(500, 0).expect("er_one_regular")),
    ]
}
