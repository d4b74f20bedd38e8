//! Truncated random walks and skip-gram with negative sampling over them.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::NodeMatrix;
use crate::txgraph::TxGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub context_size: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    /// Derived from the root seed, not read from the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 5,
            walks_per_node: 10,
            context_size: 10,
            dim: 64,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            final_learning_rate: 1e-4,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("walk_length", self.walk_length),
            ("walks_per_node", self.walks_per_node),
            ("context_size", self.context_size),
            ("dim", self.dim),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("walk.{name} must be positive")));
        }
        if !(self.learning_rate > 0.0) || !(self.final_learning_rate > 0.0) {
            return Err(Error::InvalidConfig("walk learning rates must be positive".into()));
        }
        if self.walk_length < 2 {
            log::warn!("walk_length < 2 gives skip-gram no context pairs");
        }
        Ok(())
    }
}

/// `walks_per_node` walks from every node, in node order. Each start node has
/// its own generator stream, so the result does not depend on thread count.
pub fn generate_walks(graph: &TxGraph, config: &WalkConfig) -> Vec<Vec<usize>> {
    let per_node: Vec<Vec<Vec<usize>>> = (0..graph.node_count())
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(start as u64);
            (0..config.walks_per_node)
                .map(|_| {
                    let mut walk = Vec::with_capacity(config.walk_length);
                    walk.push(start);
                    let mut cur = start;
                    while walk.len() < config.walk_length {
                        let nbrs = graph.neighbors(cur);
                        if nbrs.is_empty() {
                            break;
                        }
                        cur = nbrs[rng.random_range(0..nbrs.len())];
                        walk.push(cur);
                    }
                    walk
                })
                .collect()
        })
        .collect();
    per_node.into_iter().flatten().collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram vectors, one row per graph node. Single-threaded and deterministic.
pub fn train_walk_embeddings(graph: &TxGraph, walks: &[Vec<usize>], config: &WalkConfig) -> Result<NodeMatrix> {
    config.validate()?;
    if walks.is_empty() {
        return Err(Error::EmptyInput("walks"));
    }
    let n = graph.node_count();
    let d = config.dim;

    let mut freq = vec![0.0f64; n];
    for &v in walks.iter().flatten() {
        freq[v] += 1.0;
    }
    let noise = WeightedIndex::new(freq.iter().map(|f| f.powf(0.75)))
        .map_err(|e| Error::InvalidConfig(format!("negative-sampling distribution: {e}")))?;

    let mut pairs = Vec::new();
    for walk in walks {
        for (i, &center) in walk.iter().enumerate() {
            let lo = i.saturating_sub(config.context_size);
            let hi = (i + config.context_size + 1).min(walk.len());
            for (j, &ctx) in walk.iter().enumerate().take(hi).skip(lo) {
                if j != i {
                    pairs.push((center, ctx));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut input: Vec<f64> = (0..n * d).map(|_| (rng.random::<f64>() - 0.5) / d as f64).collect();
    let mut output = vec![0.0f64; n * d];
    let mut grad = vec![0.0f64; d];

    let total = (pairs.len() * config.epochs).max(1) as f64;
    let (lr0, lr1) = (config.learning_rate, config.final_learning_rate);
    let mut step = 0usize;
    for _ in 0..config.epochs {
        for &(center, ctx) in &pairs {
            let lr = lr0 + (lr1 - lr0) * step as f64 / total;
            step += 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let c = center * d..(center + 1) * d;
            for s in 0..=config.negatives {
                let (target, label) = if s == 0 {
                    (ctx, 1.0)
                } else {
                    let t = noise.sample(&mut rng);
                    if t == ctx {
                        continue;
                    }
                    (t, 0.0)
                };
                let o = target * d..(target + 1) * d;
                let score: f64 = input[c.clone()].iter().zip(&output[o.clone()]).map(|(a, b)| a * b).sum();
                let g = lr * (label - sigmoid(score));
                for k in 0..d {
                    grad[k] += g * output[o.start + k];
                    output[o.start + k] += g * input[c.start + k];
                }
            }
            for (x, g) in input[c].iter_mut().zip(&grad) {
                *x += g;
            }
        }
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("walk embedding".into()));
    }
    NodeMatrix::new(graph.nodes().to_vec(), d, input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> TxGraph {
        let nodes = (0..n).map(|i| format!("n{i:03}")).collect();
        TxGraph::from_edges(nodes, edges).unwrap()
    }

    #[test]
    fn path_walks_alternate() {
        let g = graph(2, &[(0, 1)]);
        let walks = generate_walks(&g, &WalkConfig::default());
        assert_eq!(walks.len(), 20);
        for w in walks.iter().filter(|w| w[0] == 0) {
            assert_eq!(w, &vec![0, 1, 0, 1, 0]);
        }
    }

    #[test]
    fn self_loop_only_node_walks_are_singletons() {
        let g = graph(3, &[(0, 1), (2, 2)]);
        let walks = generate_walks(&g, &WalkConfig::default());
        let from2: Vec<_> = walks.iter().filter(|w| w[0] == 2).collect();
        assert_eq!(from2.len(), 10);
        assert!(from2.iter().all(|w| w.len() == 1));
    }

    #[test]
    fn step_frequencies_are_uniform() {
        // star centre 0 with 4 leaves; first step from 0 over 10^4 walks
        let g = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let cfg = WalkConfig {
            walks_per_node: 10_000,
            walk_length: 2,
            ..Default::default()
        };
        let mut counts = [0.0f64; 5];
        for w in generate_walks(&g, &cfg).iter().filter(|w| w[0] == 0) {
            counts[w[1]] += 1.0;
        }
        let expected = 2500.0;
        let chi2: f64 = counts[1..].iter().map(|c| (c - expected).powi(2) / expected).sum();
        // chi-square, 3 dof, p = 0.001 critical value
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn walks_are_deterministic_and_sized() {
        let edges: Vec<_> = (1..121).map(|i| ((i - 1) / 3, i)).collect();
        let g = graph(121, &edges);
        let a = generate_walks(&g, &WalkConfig::default());
        assert_eq!(a.len(), 1210);
        assert!(a.iter().all(|w| w.len() == 5));
        assert_eq!(a, generate_walks(&g, &WalkConfig::default()));
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn disconnected_cliques_separate() {
        let mut edges = Vec::new();
        for base in [0, 6] {
            for i in 0..6 {
                for j in i + 1..6 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let g = graph(12, &edges);
        let cfg = WalkConfig {
            dim: 16,
            ..Default::default()
        };
        let m = train_walk_embeddings(&g, &generate_walks(&g, &cfg), &cfg).unwrap();
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..12 {
            for j in i + 1..12 {
                let c = cosine(m.row(i), m.row(j));
                if (i < 6) == (j < 6) {
                    intra += c;
                    ni += 1.0;
                } else {
                    inter += c;
                    nx += 1.0;
                }
            }
        }
        assert!(intra / ni > inter / nx, "intra {} inter {}", intra / ni, inter / nx);
    }

    #[test]
    fn training_is_deterministic_and_shaped() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let cfg = WalkConfig::default();
        let walks = generate_walks(&g, &cfg);
        let a = train_walk_embeddings(&g, &walks, &cfg).unwrap();
        assert_eq!(a.dim(), 64);
        assert_eq!(a, train_walk_embeddings(&g, &walks, &cfg).unwrap());
        assert!(a.as_slice().iter().all(|x| x.is_finite()));
    }
}
