//! Radius statistics of a node's k-hop neighbourhood.
//!
//! For node `v` with radius `r_v` and neighbourhood `N_k(v)` the eleven
//! features are `r_v, μ, σ, α, β, δ, Δ, b_0..b_3`: mean and population std of
//! neighbour radii, fractions strictly deeper/shallower, extremes of
//! `r_u - r_v`, and a 4-bin histogram of `r_u - r_v` clamped to `[-1, 1]`.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::radius;
use crate::io::{write_node_rows, NodeMatrix};
use crate::txgraph::TxGraph;

pub const HIER_DIM: usize = 11;
pub const HIER_COLUMNS: [&str; HIER_DIM] = [
    "r_self", "mu", "sigma", "alpha", "beta", "delta", "Delta", "b0", "b1", "b2", "b3",
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HierFeatureVector {
    pub r_self: f64,
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub delta_max: f64,
    pub hist: [f64; 4],
}

impl HierFeatureVector {
    pub fn to_array(&self) -> [f64; HIER_DIM] {
        [
            self.r_self,
            self.mu,
            self.sigma,
            self.alpha,
            self.beta,
            self.delta,
            self.delta_max,
            self.hist[0],
            self.hist[1],
            self.hist[2],
            self.hist[3],
        ]
    }
}

/// Bin index for a relative radius over edges `[-1, -0.5, 0, 0.5, 1]`.
/// The right edge of each bin is exclusive except for the last.
fn bin_of(rel: f64) -> usize {
    let x = rel.clamp(-1.0, 1.0);
    (((x + 1.0) * 2.0).floor() as usize).min(3)
}

/// Nodes within `k` undirected hops of `v`, excluding `v`.
pub fn k_hop_neighborhood(graph: &TxGraph, v: usize, k: usize) -> Vec<usize> {
    let mut seen = vec![false; graph.node_count()];
    seen[v] = true;
    let mut queue = VecDeque::from([(v, 0usize)]);
    let mut out = Vec::new();
    while let Some((u, d)) = queue.pop_front() {
        if d == k {
            continue;
        }
        for &w in graph.neighbors(u) {
            if !seen[w] {
                seen[w] = true;
                out.push(w);
                queue.push_back((w, d + 1));
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn node_features(r_self: f64, neighbor_radii: &[f64]) -> HierFeatureVector {
    let n = neighbor_radii.len();
    if n == 0 {
        return HierFeatureVector {
            r_self,
            ..Default::default()
        };
    }
    let nf = n as f64;
    let mu = neighbor_radii.iter().sum::<f64>() / nf;
    let sigma = (neighbor_radii.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / nf).sqrt();
    let mut deeper = 0usize;
    let mut shallower = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut counts = [0usize; 4];
    for &r in neighbor_radii {
        let rel = r - r_self;
        if r > r_self {
            deeper += 1;
        } else if r < r_self {
            shallower += 1;
        }
        lo = lo.min(rel);
        hi = hi.max(rel);
        counts[bin_of(rel)] += 1;
    }
    HierFeatureVector {
        r_self,
        mu,
        sigma,
        alpha: deeper as f64 / nf,
        beta: shallower as f64 / nf,
        delta: lo,
        delta_max: hi,
        hist: counts.map(|c| c as f64 / nf),
    }
}

pub fn hier_features(emb: &EmbeddingMatrix, graph: &TxGraph, k: usize) -> Result<Vec<HierFeatureVector>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k_hop must be at least 1".into()));
    }
    if !emb.is_aligned_with(graph) {
        return Err(Error::MisalignedInputs(
            "embedding does not follow graph node order".into(),
        ));
    }
    let radii: Vec<f64> = emb.rows().map(radius).collect();
    Ok((0..graph.node_count())
        .into_par_iter()
        .map(|v| {
            let nbr: Vec<f64> = k_hop_neighborhood(graph, v, k)
                .into_iter()
                .map(|u| radii[u])
                .collect();
            node_features(radii[v], &nbr)
        })
        .collect())
}

pub fn hier_matrix(graph: &TxGraph, feats: &[HierFeatureVector]) -> NodeMatrix {
    let data = feats.iter().flat_map(|f| f.to_array()).collect();
    NodeMatrix::new(graph.nodes().to_vec(), HIER_DIM, data).expect("11 values per node")
}

/// Writes the feature CSV; the file can be read back with [`NodeMatrix::read_csv`].
pub fn write_hier_features<W: Write>(writer: W, graph: &TxGraph, feats: &[HierFeatureVector]) -> Result<()> {
    let columns: Vec<String> = HIER_COLUMNS.iter().map(|c| c.to_string()).collect();
    let arrays: Vec<[f64; HIER_DIM]> = feats.iter().map(HierFeatureVector::to_array).collect();
    write_node_rows(writer, &columns, graph.nodes(), arrays.iter().map(|a| a.as_slice()))
}
