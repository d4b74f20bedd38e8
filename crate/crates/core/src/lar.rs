//! Liquidity-to-Average Ratio, node trust, and trust-weighted refinement.
//!
//! ```text
//! LAR(u→v) = σ_uv / (μ_uv + ε) · (1 + Σin(v) / (Σout(v) + ε))
//! τ_i      = logistic(z_val_i - z_lar_i)
//! t_i      = Σ_{j ∈ N(i)} τ_j / Σ_k τ_k · log_0(z_j)
//! z_i     ← exp_0(t_i)
//! ```
//!
//! All quantities are restricted to one observation window `[start, end]`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{distance, log0, PoincareBall};
use crate::io::fmt_f64;
use crate::txgraph::{Transfer, TxGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub steps: usize,
    pub smoothing_eps: f64,
    pub convergence_tol: f64,
    /// Window length in seconds, starting at the first observed transfer.
    /// `None` covers the whole observation span.
    pub window_delta: Option<i64>,
    /// Set from the pipeline's geometry section, not read from the config file.
    #[serde(skip)]
    pub eps_boundary: f64,
    #[serde(skip)]
    pub delta_stab: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            steps: 3,
            smoothing_eps: 1e-6,
            convergence_tol: 1e-4,
            window_delta: None,
            eps_boundary: crate::geometry::DEFAULT_EPS_BOUNDARY,
            delta_stab: crate::geometry::DEFAULT_DELTA_STAB,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("refine.steps must be at least 1".into()));
        }
        if !(self.smoothing_eps > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "refine.smoothing_eps and refine.convergence_tol must be positive".into(),
            ));
        }
        if matches!(self.window_delta, Some(d) if d < 0) {
            return Err(Error::InvalidConfig("refine.window_delta must be >= 0".into()));
        }
        Ok(())
    }

    pub fn window(&self, graph: &TxGraph) -> (i64, i64) {
        let (start, end) = graph.time_span();
        match self.window_delta {
            Some(delta) => (start, start.saturating_add(delta)),
            None => (start, end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFlowStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub window: (i64, i64),
}

fn in_window(t: &Transfer, (start, end): (i64, i64)) -> bool {
    t.timestamp >= start && t.timestamp <= end
}

/// Population mean and standard deviation of u→v transfers inside the window.
pub fn edge_flow_stats(graph: &TxGraph, u: usize, v: usize, window: (i64, i64)) -> Option<EdgeFlowStats> {
    let values: Vec<f64> = graph
        .transfers(u, v)
        .iter()
        .filter(|t| in_window(t, window))
        .map(|t| t.value)
        .collect();
    if values.is_empty() {
        return None;
    }
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
    Some(EdgeFlowStats {
        mean,
        std: if count == 1 { 0.0 } else { var.sqrt() },
        count,
        window,
    })
}

/// Total value received and sent by `v` inside the window.
pub fn node_flows(graph: &TxGraph, v: usize, window: (i64, i64)) -> (f64, f64) {
    let sum_edges = |ids: &[usize]| -> f64 {
        ids.iter()
            .flat_map(|&e| {
                let (a, b) = graph.simple_edges()[e];
                graph.transfers(a, b)
            })
            .filter(|t| in_window(t, window))
            .map(|t| t.value)
            .sum()
    };
    (sum_edges(graph.in_edge_ids(v)), sum_edges(graph.out_edge_ids(v)))
}

pub fn edge_lar(graph: &TxGraph, u: usize, v: usize, config: &RefineConfig) -> Result<f64> {
    let window = config.window(graph);
    let stats = edge_flow_stats(graph, u, v, window).ok_or_else(|| {
        Error::EmptyWindow(format!(
            "{} -> {}",
            graph.address(u),
            graph.address(v)
        ))
    })?;
    let (inflow, outflow) = node_flows(graph, v, window);
    let eps = config.smoothing_eps;
    Ok(stats.std / (stats.mean + eps) * (1.0 + inflow / (outflow + eps)))
}

/// LAR of every simple edge with at least one transfer in the window.
pub fn all_edge_lars(graph: &TxGraph, config: &RefineConfig) -> BTreeMap<(usize, usize), f64> {
    graph
        .simple_edges()
        .iter()
        .filter_map(|&(u, v)| edge_lar(graph, u, v, config).ok().map(|l| ((u, v), l)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeTrust {
    pub total_in: f64,
    pub total_out: f64,
    pub mean_incident_lar: f64,
    pub z_val: f64,
    pub z_lar: f64,
    pub tau: f64,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Population z-scores; a (numerically) constant column scores zero everywhere.
fn z_scores(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / sd).collect()
}

pub fn node_trust(
    graph: &TxGraph,
    lar_by_edge: &BTreeMap<(usize, usize), f64>,
    config: &RefineConfig,
) -> Vec<NodeTrust> {
    let n = graph.node_count();
    let window = config.window(graph);
    let eps = config.smoothing_eps;

    let mut lar_sum = vec![0.0; n];
    let mut lar_count = vec![0usize; n];
    for (&(u, v), &l) in lar_by_edge {
        lar_sum[u] += l;
        lar_count[u] += 1;
        if v != u {
            lar_sum[v] += l;
            lar_count[v] += 1;
        }
    }
    let flows: Vec<(f64, f64)> = (0..n).map(|v| node_flows(graph, v, window)).collect();
    let mean_lar: Vec<f64> = (0..n)
        .map(|v| match lar_count[v] {
            0 => 0.0,
            c => lar_sum[v] / c as f64,
        })
        .collect();
    let log_val: Vec<f64> = flows.iter().map(|(i, _)| (i + eps).ln()).collect();
    let log_lar: Vec<f64> = mean_lar.iter().map(|l| (l + eps).ln()).collect();
    let z_val = z_scores(&log_val);
    let z_lar = z_scores(&log_lar);

    (0..n)
        .map(|v| NodeTrust {
            total_in: flows[v].0,
            total_out: flows[v].1,
            mean_incident_lar: mean_lar[v],
            z_val: z_val[v],
            z_lar: z_lar[v],
            tau: logistic(z_val[v] - z_lar[v]),
        })
        .collect()
}

/// Neighbour weights α_ij = τ_j / Σ_{k ∈ N(i)} τ_k, in neighbour order.
pub fn neighbor_weights(graph: &TxGraph, trust: &[NodeTrust], i: usize) -> Vec<f64> {
    let nbrs = graph.neighbors(i);
    let total: f64 = nbrs.iter().map(|&j| trust[j].tau).sum();
    nbrs.iter().map(|&j| trust[j].tau / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub embedding: EmbeddingMatrix,
    pub steps_run: usize,
    /// Largest per-node hyperbolic displacement of each step.
    pub max_displacement: Vec<f64>,
    pub converged: bool,
}

/// Synchronous refinement: every update in a step reads the pre-step
/// embedding. Nodes without neighbours are left untouched. Stops after the
/// first step whose largest displacement falls below `convergence_tol`.
pub fn refine(
    emb: &EmbeddingMatrix,
    graph: &TxGraph,
    trust: &[NodeTrust],
    config: &RefineConfig,
) -> Result<Refined> {
    config.validate()?;
    if !emb.is_aligned_with(graph) {
        return Err(Error::MisalignedInputs(
            "embedding does not follow graph node order".into(),
        ));
    }
    if trust.len() != graph.node_count() {
        return Err(Error::MisalignedInputs(format!(
            "{} trust values for {} nodes",
            trust.len(),
            graph.node_count()
        )));
    }
    let ball = PoincareBall::new(config.eps_boundary, config.delta_stab);
    let d = emb.dim();
    let mut current = emb.clone();
    let mut max_displacement = Vec::new();
    let mut converged = false;

    for _ in 0..config.steps {
        let logs: Vec<Vec<f64>> = current.rows().map(log0).collect();
        let mut next = current.clone();
        let mut step_max: f64 = 0.0;
        for i in 0..graph.node_count() {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                continue;
            }
            let weights = neighbor_weights(graph, trust, i);
            let mut t = vec![0.0; d];
            for (&j, a) in nbrs.iter().zip(&weights) {
                for (tk, lk) in t.iter_mut().zip(&logs[j]) {
                    *tk += a * lk;
                }
            }
            let z = ball.exp0(&t);
            step_max = step_max.max(distance(current.row(i), z.coords()));
            next.row_mut(i).copy_from_slice(z.coords());
        }
        current = next;
        max_displacement.push(step_max);
        if step_max < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(Refined {
        embedding: current,
        steps_run: max_displacement.len(),
        max_displacement,
        converged,
    })
}

pub fn write_trust<W: Write>(writer: W, graph: &TxGraph, trust: &[NodeTrust]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "total_in", "total_out", "mean_lar", "z_val", "z_lar", "tau"])?;
    for (addr, t) in graph.nodes().iter().zip(trust) {
        w.write_record([
            addr.clone(),
            fmt_f64(t.total_in),
            fmt_f64(t.total_out),
            fmt_f64(t.mean_incident_lar),
            fmt_f64(t.z_val),
            fmt_f64(t.z_lar),
            fmt_f64(t.tau),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
