//! Poincaré embeddings trained with Riemannian SGD on a contrastive hinge
//! loss plus a degree-aligned radial regularizer.
//!
//! ```text
//! L_c = mean over positives (i, j+) and their negatives j- of [d(i, j+) - d(i, j-) + γ]_+
//! L_r = mean over v of (‖z_v‖ - (1 - deg(v) / max_deg))²
//! L   = L_c + β L_r
//! ```
//!
//! Each step rescales the Euclidean gradient by the inverse metric
//! `(1 - ‖z‖²)² / 4` and retracts with `z ← proj(z ⊕ (-lr · g_R))`.

use std::io::Write;
use std::ops::Deref;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{add_distance_grad_u, distance, norm, norm_sq, PoincareBall};
use crate::io::{fmt_f64, NodeMatrix};
use crate::txgraph::TxGraph;

/// Per-node points of the open unit ball, aligned with graph node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(NodeMatrix);

impl EmbeddingMatrix {
    pub fn from_matrix(m: NodeMatrix) -> Result<Self> {
        for (node, row) in m.nodes().iter().zip(m.rows()) {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding row for `{node}`")));
            }
            if norm_sq(row) >= 1.0 {
                return Err(Error::Parse(format!(
                    "embedding row for `{node}` lies outside the unit ball"
                )));
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &NodeMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> NodeMatrix {
        self.0
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.0.row_mut(i)
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        self.0.as_mut_slice()
    }

    pub fn align_to(&self, graph: &TxGraph) -> Result<Self> {
        Ok(Self(self.0.align_to(graph)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_matrix(NodeMatrix::load(path)?)
    }

    pub fn all_in_ball(&self) -> bool {
        self.0.rows().all(|r| norm_sq(r) < 1.0)
    }
}

impl Deref for EmbeddingMatrix {
    type Target = NodeMatrix;

    fn deref(&self) -> &NodeMatrix {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Set from the pipeline's geometry section, not read from the config file.
    #[serde(skip)]
    pub dim: usize,
    /// Hinge margin γ.
    pub margin: f64,
    /// Radial regularization weight β.
    pub radial_weight: f64,
    pub learning_rate: f64,
    /// Learning rate reached at the last epoch (linear decay).
    pub final_learning_rate: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    /// Derived from the root seed, not read from the config file.
    #[serde(skip)]
    pub seed: u64,
    pub init_scale: f64,
    /// Negatives per positive for the reported loss trace. `None` evaluates
    /// the exact expectation over uniformly drawn negatives.
    pub eval_negatives: Option<usize>,
    #[serde(skip)]
    pub eps_boundary: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            margin: 1.0,
            radial_weight: 0.1,
            learning_rate: 0.05,
            final_learning_rate: 0.005,
            epochs: 500,
            negatives_per_positive: 1,
            seed: 0,
            init_scale: 1e-3,
            eval_negatives: None,
            eps_boundary: crate::geometry::DEFAULT_EPS_BOUNDARY,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("embed.{m}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.radial_weight >= 0.0) {
            return bad("radial_weight must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !(self.final_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.epochs == 0 || self.negatives_per_positive == 0 {
            return bad("epochs and negatives_per_positive must be positive");
        }
        if !(self.init_scale > 0.0 && self.init_scale < 1.0) {
            return bad("init_scale must lie in (0, 1)");
        }
        if self.eval_negatives == Some(0) {
            return bad("eval_negatives must be positive when set");
        }
        if !(self.eps_boundary > 0.0 && self.eps_boundary < 1.0) {
            return bad("eps_boundary must lie in (0, 1)");
        }
        Ok(())
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.learning_rate + (self.final_learning_rate - self.learning_rate) * t
    }
}

/// Points drawn uniformly from the ball of radius `init_scale`.
pub fn init_embeddings(graph: &TxGraph, config: &TrainConfig) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dim;
    let mut m = NodeMatrix::zeros(graph.nodes().to_vec(), d);
    for i in 0..graph.node_count() {
        let row = m.row_mut(i);
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = norm(row).max(f64::MIN_POSITIVE);
        let r = config.init_scale * rng.random::<f64>().powf(1.0 / d as f64);
        row.iter_mut().for_each(|x| *x *= r / n);
    }
    EmbeddingMatrix(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub contrastive: f64,
    pub radial: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: LossParts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub embedding: EmbeddingMatrix,
    pub trace: Vec<EpochLoss>,
}

#[inline]
fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// `negatives[p * m + k]` is the k-th negative of positive `p`.
pub fn contrastive_loss(
    emb: &NodeMatrix,
    positives: &[(usize, usize)],
    negatives: &[usize],
    gamma: f64,
) -> f64 {
    if positives.is_empty() {
        return 0.0;
    }
    let m = negatives.len() / positives.len();
    assert_eq!(m * positives.len(), negatives.len(), "negatives per positive");
    let total: f64 = positives
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let dp = distance(emb.row(i), emb.row(j));
            negatives[p * m..(p + 1) * m]
                .iter()
                .map(|&n| hinge(dp - distance(emb.row(i), emb.row(n)) + gamma))
                .sum::<f64>()
                / m as f64
        })
        .sum();
    total / positives.len() as f64
}

/// Contrastive loss averaged over every node as the negative, i.e. its
/// expectation under uniform negative sampling.
pub fn expected_contrastive_loss(emb: &NodeMatrix, positives: &[(usize, usize)], gamma: f64) -> f64 {
    if positives.is_empty() {
        return 0.0;
    }
    let n = emb.len();
    let per_positive: Vec<f64> = positives
        .par_iter()
        .map(|&(i, j)| {
            let dp = distance(emb.row(i), emb.row(j));
            (0..n)
                .map(|v| hinge(dp - distance(emb.row(i), emb.row(v)) + gamma))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    per_positive.iter().sum::<f64>() / positives.len() as f64
}

/// Target norm `1 - deg(v) / max_deg` for every node.
pub fn radial_targets(graph: &TxGraph) -> Result<Vec<f64>> {
    let max_deg = graph.max_degree();
    if max_deg == 0 {
        return Err(Error::DegenerateGraph("every node has degree zero".into()));
    }
    Ok(graph
        .degrees()
        .into_iter()
        .map(|d| 1.0 - d as f64 / max_deg as f64)
        .collect())
}

pub fn radial_loss(emb: &NodeMatrix, graph: &TxGraph) -> Result<f64> {
    let targets = radial_targets(graph)?;
    Ok(radial_loss_with(emb, &targets))
}

pub(crate) fn radial_loss_with(emb: &NodeMatrix, targets: &[f64]) -> f64 {
    let sum: f64 = emb
        .rows()
        .zip(targets)
        .map(|(z, t)| (norm(z) - t).powi(2))
        .sum();
    sum / targets.len() as f64
}

#[inline]
fn add_radial_grad(z: &[f64], target: f64, weight: f64, out: &mut [f64]) {
    let n = norm(z);
    let scale = weight * 2.0 * (n - target) / n.max(1e-12);
    for (o, &x) in out.iter_mut().zip(z) {
        *o += scale * x;
    }
}

/// Accumulates the gradient of one positive's hinge terms (scaled by `weight`)
/// into `grad`, a flat `n × dim` buffer.
fn add_contrastive_terms(
    emb: &NodeMatrix,
    (i, j): (usize, usize),
    negs: &[usize],
    gamma: f64,
    weight: f64,
    grad: &mut [f64],
) {
    let d = emb.dim();
    let zi = emb.row(i);
    let zj = emb.row(j);
    let dp = distance(zi, zj);
    let w = weight / negs.len() as f64;
    for &n in negs {
        let zn = emb.row(n);
        if dp - distance(zi, zn) + gamma <= 0.0 {
            continue;
        }
        add_distance_grad_u(zi, zj, w, &mut grad[i * d..(i + 1) * d]);
        add_distance_grad_u(zj, zi, w, &mut grad[j * d..(j + 1) * d]);
        add_distance_grad_u(zi, zn, -w, &mut grad[i * d..(i + 1) * d]);
        add_distance_grad_u(zn, zi, -w, &mut grad[n * d..(n + 1) * d]);
    }
}

/// Euclidean gradient of `contrastive_loss` with respect to every coordinate.
pub fn contrastive_gradient(
    emb: &NodeMatrix,
    positives: &[(usize, usize)],
    negatives: &[usize],
    gamma: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; emb.as_slice().len()];
    if positives.is_empty() {
        return grad;
    }
    let m = negatives.len() / positives.len();
    let w = 1.0 / positives.len() as f64;
    for (p, &edge) in positives.iter().enumerate() {
        add_contrastive_terms(emb, edge, &negatives[p * m..(p + 1) * m], gamma, w, &mut grad);
    }
    grad
}

/// Euclidean gradient of `radial_loss`; targets are held constant.
pub fn radial_gradient(emb: &NodeMatrix, graph: &TxGraph) -> Result<Vec<f64>> {
    let targets = radial_targets(graph)?;
    let d = emb.dim();
    let w = 1.0 / targets.len() as f64;
    let mut grad = vec![0.0; emb.as_slice().len()];
    for (v, t) in targets.iter().enumerate() {
        add_radial_grad(emb.row(v), *t, w, &mut grad[v * d..(v + 1) * d]);
    }
    Ok(grad)
}

pub fn total_loss(
    emb: &NodeMatrix,
    graph: &TxGraph,
    positives: &[(usize, usize)],
    negatives: &[usize],
    gamma: f64,
    beta: f64,
) -> Result<LossParts> {
    let contrastive = contrastive_loss(emb, positives, negatives, gamma);
    let radial = radial_loss(emb, graph)?;
    Ok(LossParts {
        contrastive,
        radial,
        total: contrastive + beta * radial,
    })
}

pub fn total_gradient(
    emb: &NodeMatrix,
    graph: &TxGraph,
    positives: &[(usize, usize)],
    negatives: &[usize],
    gamma: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    let mut g = contrastive_gradient(emb, positives, negatives, gamma);
    for (a, b) in g.iter_mut().zip(radial_gradient(emb, graph)?) {
        *a += beta * b;
    }
    Ok(g)
}

/// Positive pairs for training: simple directed edges without self-loops.
pub fn positive_edges(graph: &TxGraph) -> Vec<(usize, usize)> {
    graph.proper_edges().collect()
}

pub fn train(graph: &TxGraph, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    let init = init_embeddings(graph, config);
    train_from(graph, config, init)
}

/// Positives and their fixed negatives for the reported loss.
type EvalSet = (Vec<(usize, usize)>, Vec<usize>);

/// Trains starting from an explicit embedding aligned with `graph`.
pub fn train_from(graph: &TxGraph, config: &TrainConfig, init: EmbeddingMatrix) -> Result<Trained> {
    config.validate()?;
    if !init.is_aligned_with(graph) {
        return Err(Error::MisalignedInputs(
            "initial embedding does not follow graph node order".into(),
        ));
    }
    let mut positives = positive_edges(graph);
    if positives.is_empty() {
        return Err(Error::DegenerateGraph(
            "no edges between distinct addresses".into(),
        ));
    }
    let targets = radial_targets(graph)?;
    let n = graph.node_count();
    let d = init.dim();
    let m = config.negatives_per_positive;
    let ball = PoincareBall::new(config.eps_boundary, crate::geometry::DEFAULT_DELTA_STAB);
    let mut emb = init;

    // Separate streams: the shuffle/negative stream must not depend on
    // whether a sampled evaluation set is requested.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let eval_set: Option<EvalSet> = config.eval_negatives.map(|k| {
        let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed);
        eval_rng.set_stream(2);
        let negs = (0..positives.len() * k)
            .map(|_| eval_rng.random_range(0..n))
            .collect();
        (positives.clone(), negs)
    });
    let eval_positives = positives.clone();

    let mut trace = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; n * d];
    let mut negs = vec![0usize; m];
    let mut touched: Vec<usize> = Vec::with_capacity(2 + m);
    let mut step = vec![0.0; d];
    let mut updated = vec![0.0; d];

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        positives.shuffle(&mut rng);
        for &(i, j) in &positives {
            for slot in negs.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            touched.clear();
            touched.extend([i, j]);
            touched.extend(negs.iter().copied());
            touched.sort_unstable();
            touched.dedup();

            add_contrastive_terms(emb.matrix(), (i, j), &negs, config.margin, 1.0, &mut grad);
            if config.radial_weight > 0.0 {
                for v in [i, j] {
                    add_radial_grad(
                        emb.row(v),
                        targets[v],
                        config.radial_weight,
                        &mut grad[v * d..(v + 1) * d],
                    );
                }
            }

            for &v in &touched {
                let g = &mut grad[v * d..(v + 1) * d];
                let z = emb.row(v);
                let scale = -lr * (1.0 - norm_sq(z)).powi(2) / 4.0;
                for (s, gv) in step.iter_mut().zip(g.iter()) {
                    *s = scale * gv;
                }
                ball.mobius_add_into(z, &step, &mut updated);
                emb.row_mut(v).copy_from_slice(&updated);
                g.iter_mut().for_each(|x| *x = 0.0);
            }
        }

        let contrastive = match &eval_set {
            Some((pos, negs)) => contrastive_loss(emb.matrix(), pos, negs, config.margin),
            None => expected_contrastive_loss(emb.matrix(), &eval_positives, config.margin),
        };
        let radial = radial_loss_with(emb.matrix(), &targets);
        let total = contrastive + config.radial_weight * radial;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("embedding loss at epoch {epoch}")));
        }
        trace.push(EpochLoss {
            epoch,
            loss: LossParts {
                contrastive,
                radial,
                total,
            },
        });
    }
    if emb.raw_mut().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("embedding coordinates".into()));
    }
    Ok(Trained {
        embedding: emb,
        trace,
    })
}

pub fn write_trace<W: Write>(writer: W, trace: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "loss_contrastive", "loss_radial", "loss_total"])?;
    for e in trace {
        w.write_record([
            e.epoch.to_string(),
            fmt_f64(e.loss.contrastive),
            fmt_f64(e.loss.radial),
            fmt_f64(e.loss.total),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
