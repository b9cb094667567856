//! Shared fixtures for the benchmarks.

use sc_core::instances::{gen_er, gen_er_bipartite, gen_regular_bipartite};
use sc_core::{bipartition, Bipartition, Graph};

/// A random bipartite graph with its sides.
pub fn bipartite_fixture(side: usize, q: f64, seed: u64) -> (Graph, Bipartition) {
    let g = gen_er_bipartite(side, side, q, seed).expect("valid parameters").graph;
    let sides = bipartition(&g).expect("generated graph is bipartite");
    (g, sides)
}

pub fn regular_fixture(n: usize, d: usize) -> (Graph, Bipartition) {
    let g = gen_regular_bipartite(n, d, 0).expect("valid parameters").graph;
    let sides = bipartition(&g).expect("generated graph is bipartite");
    (g, sides)
}

pub fn general_fixture(n: usize, q: f64, seed: u64) -> Graph {
    gen_er(n, q, seed).expect("valid parameters").graph
}
