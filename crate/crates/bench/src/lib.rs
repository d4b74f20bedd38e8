//! Fixtures shared by the benchmarks.

use hyperrole::synth::{generate_planted_graph, PlantedRoleSpec};
use hyperrole::txgraph::TxGraph;

/// Planted three-tier graph scaled by `factor` (1 = 112 addresses, 3,000 transfers).
pub fn planted_graph(factor: usize, seed: u64) -> TxGraph {
    let spec = PlantedRoleSpec {
        n_hubs: 2 * factor,
        n_relays: 10 * factor,
        n_traders: 100 * factor,
        transfers: 3000 * factor,
        seed,
        ..Default::default()
    };
    let planted = generate_planted_graph(&spec).expect("valid planted spec");
    TxGraph::build(&planted.records).expect("non-empty planted graph")
}
