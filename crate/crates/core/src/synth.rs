//! Synthetic fixtures: k-ary trees with ideal ball embeddings, and three-tier
//! hub/relay/trader transaction graphs with planted roles.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bucketing::RoleLabel;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{norm, radius};
use crate::io::NodeMatrix;
use crate::txgraph::{LabeledAddress, TransactionRecord, TxGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSpec {
    pub branching: usize,
    pub depth: usize,
    pub step_length: f64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self {
            branching: 3,
            depth: 4,
            step_length: 1.0,
        }
    }
}

impl TreeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.branching == 0 || !(self.step_length > 0.0) {
            return Err(Error::InvalidConfig(
                "tree branching must be >= 1 and step_length positive".into(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        (0..=self.depth).map(|h| self.branching.pow(h as u32)).sum()
    }
}

/// Nodes in breadth-first order; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTree {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub depths: Vec<usize>,
}

impl SynthTree {
    pub fn graph(&self) -> Result<TxGraph> {
        TxGraph::from_edges(self.nodes.clone(), &self.edges)
    }

    /// One unit transfer per parent→child edge.
    pub fn records(&self) -> Vec<TransactionRecord> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &(p, c))| TransactionRecord {
                chain: "synthetic".into(),
                token: "TREE".into(),
                tx_id: format!("tree-{i}"),
                timestamp: i as i64,
                sender: self.nodes[p].clone(),
                recipient: self.nodes[c].clone(),
                value: 1.0,
                function_name: "transfer".into(),
            })
            .collect()
    }

    /// Depths re-ordered to match the graph's (lexicographic) node ids.
    pub fn depths_for(&self, graph: &TxGraph) -> Vec<usize> {
        let mut out = vec![0; graph.node_count()];
        for (name, &d) in self.nodes.iter().zip(&self.depths) {
            if let Some(id) = graph.id_of(name) {
                out[id] = d;
            }
        }
        out
    }
}

pub fn build_tree(spec: &TreeSpec) -> Result<SynthTree> {
    spec.validate()?;
    let n = spec.node_count();
    let width = n.to_string().len();
    let nodes: Vec<String> = (0..n).map(|i| format!("t{i:0width$}")).collect();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut depths = vec![0; n];
    for child in 1..n {
        let parent = (child - 1) / spec.branching;
        edges.push((parent, child));
        depths[child] = depths[parent] + 1;
    }
    Ok(SynthTree { nodes, edges, depths })
}

/// Places every depth-`h` node at Euclidean norm `tanh(h·ℓ/2)` along a
/// seeded random direction, so its hyperbolic radius is `h·ℓ`. Rows follow
/// the tree's breadth-first node order.
pub fn ideal_tree_embedding(spec: &TreeSpec, dim: usize, seed: u64) -> Result<(SynthTree, EmbeddingMatrix)> {
    if dim < 2 {
        return Err(Error::InvalidConfig("ideal tree embedding needs dim >= 2".into()));
    }
    let tree = build_tree(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(tree.nodes.len() * dim);
    for &h in &tree.depths {
        let r = (h as f64 * spec.step_length / 2.0).tanh();
        if h == 0 {
            data.extend(std::iter::repeat_n(0.0, dim));
            continue;
        }
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&dir);
        data.extend(dir.iter().map(|x| x / n * r));
    }
    let emb = EmbeddingMatrix::from_matrix(NodeMatrix::new(tree.nodes.clone(), dim, data)?)?;
    Ok((tree, emb))
}

/// Spearman correlation. `degenerate` is set when either variable is
/// constant, in which case `rho` is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    pub degenerate: bool,
    pub n: usize,
}

/// Average ranks; values within a relative 1e-12 of their sorted predecessor share a rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() {
            let (p, q) = (xs[order[end - 1]], xs[order[end]]);
            if (q - p).abs() > 1e-12 * p.abs().max(q.abs()).max(1.0) {
                break;
            }
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = avg);
        start = end;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Spearman {
    let n = xs.len();
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (rx[i] - mean, ry[i] - mean);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if n < 2 || sxx == 0.0 || syy == 0.0 {
        return Spearman {
            rho: 0.0,
            degenerate: true,
            n,
        };
    }
    Spearman {
        rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
        n,
    }
}

/// Rank correlation between depth and hyperbolic radius, row by row.
pub fn check_radius_monotonicity(emb: &NodeMatrix, depths: &[usize]) -> Result<Spearman> {
    if depths.len() != emb.len() {
        return Err(Error::MisalignedInputs(format!(
            "{} depths for {} embedding rows",
            depths.len(),
            emb.len()
        )));
    }
    let radii: Vec<f64> = emb.rows().map(radius).collect();
    let d: Vec<f64> = depths.iter().map(|&h| h as f64).collect();
    Ok(spearman(&d, &radii))
}

pub fn write_depths<W: Write>(writer: W, nodes: &[String], depths: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "depth"])?;
    for (n, d) in nodes.iter().zip(depths) {
        w.write_record([n.clone(), d.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_depths<R: std::io::Read>(reader: R) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let depth = row
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad depth row `{}`", row.iter().collect::<Vec<_>>().join(","))))?;
        out.push((row[0].trim().to_string(), depth));
    }
    Ok(out)
}

/// Three-tier planted structure. Log-normal parameters are `(median, sigma)` of each tier's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedRoleSpec {
    pub n_hubs: usize,
    pub n_relays: usize,
    pub n_traders: usize,
    pub p_hub_relay: f64,
    pub p_relay_trader: f64,
    pub p_trader_trader: f64,
    pub transfers: usize,
    pub hub_relay_value: (f64, f64),
    pub relay_trader_value: (f64, f64),
    pub trader_trader_value: (f64, f64),
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PlantedRoleSpec {
    fn default() -> Self {
        Self {
            n_hubs: 2,
            n_relays: 10,
            n_traders: 100,
            p_hub_relay: 0.9,
            p_relay_trader: 0.2,
            p_trader_trader: 0.01,
            transfers: 3000,
            hub_relay_value: (1.0e6, 0.1),
            relay_trader_value: (1.0e3, 1.0),
            trader_trader_value: (1.0e2, 1.5),
            seed: 0,
        }
    }
}

impl PlantedRoleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_hubs == 0 || self.n_relays == 0 || self.n_traders == 0 {
            return Err(Error::InvalidConfig("planted role counts must be positive".into()));
        }
        for p in [self.p_hub_relay, self.p_relay_trader, self.p_trader_trader] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig("attachment probabilities must lie in (0, 1]".into()));
            }
        }
        for (m, s) in [self.hub_relay_value, self.relay_trader_value, self.trader_trader_value] {
            if !(m > 0.0) || !(s >= 0.0) {
                return Err(Error::InvalidConfig("value medians must be positive, sigmas non-negative".into()));
            }
        }
        if self.transfers == 0 {
            return Err(Error::InvalidConfig("planted graph needs at least one transfer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGraph {
    pub records: Vec<TransactionRecord>,
    pub labels: Vec<LabeledAddress>,
}

fn random_address(rng: &mut impl Rng, taken: &mut BTreeSet<String>) -> String {
    loop {
        let bytes: [u8; 20] = rng.random();
        let addr: String = std::iter::once("0x".to_string())
            .chain(bytes.iter().map(|b| format!("{b:02x}")))
            .collect();
        if taken.insert(addr.clone()) {
            return addr;
        }
    }
}

/// Attaches each `b` to every `a` independently with probability `p`, and to
/// one uniformly drawn `a` when the draw leaves it unattached.
fn bipartite(rng: &mut impl Rng, a: &[usize], b: &[usize], p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for &y in b {
        let before = edges.len();
        for &x in a {
            if rng.random::<f64>() < p {
                edges.push((x, y));
            }
        }
        if edges.len() == before {
            edges.push((*a.choose(rng).expect("non-empty tier"), y));
        }
    }
    edges
}

/// Hubs move large, steady amounts to and from relays; relays pass smaller,
/// noisier amounts on to traders; traders occasionally pay each other.
/// Exactly `spec.transfers` records are produced, split 25/70/5 across the
/// three tiers (the trader tier's share moves to relays when it has no pairs).
pub fn generate_planted_graph(spec: &PlantedRoleSpec) -> Result<PlantedGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = BTreeSet::new();
    let n = spec.n_hubs + spec.n_relays + spec.n_traders;
    let addrs: Vec<String> = (0..n).map(|_| random_address(&mut rng, &mut taken)).collect();
    let hubs: Vec<usize> = (0..spec.n_hubs).collect();
    let relays: Vec<usize> = (spec.n_hubs..spec.n_hubs + spec.n_relays).collect();
    let traders: Vec<usize> = (spec.n_hubs + spec.n_relays..n).collect();

    let mut hub_relay = bipartite(&mut rng, &hubs, &relays, spec.p_hub_relay);
    for &h in &hubs {
        if !hub_relay.iter().any(|&(x, _)| x == h) {
            hub_relay.push((h, *relays.choose(&mut rng).expect("relays exist")));
        }
    }
    let relay_trader = bipartite(&mut rng, &relays, &traders, spec.p_relay_trader);
    let mut trader_trader = Vec::new();
    for (i, &a) in traders.iter().enumerate() {
        for &b in &traders[i + 1..] {
            if rng.random::<f64>() < spec.p_trader_trader {
                trader_trader.push((a, b));
            }
        }
    }

    let total = spec.transfers;
    let n_hr = ((total as f64 * 0.25).round() as usize).min(total);
    let n_tt = if trader_trader.is_empty() {
        0
    } else {
        ((total as f64 * 0.05).round() as usize).min(total - n_hr)
    };
    let n_rt = total - n_hr - n_tt;

    let lognormal = |(median, sigma): (f64, f64)| {
        LogNormal::new(median.ln(), sigma).map_err(|e| Error::InvalidConfig(format!("value distribution: {e}")))
    };
    let tiers = [
        (&hub_relay, n_hr, lognormal(spec.hub_relay_value)?, 0.7),
        (&relay_trader, n_rt, lognormal(spec.relay_trader_value)?, 0.5),
        (&trader_trader, n_tt, lognormal(spec.trader_trader_value)?, 0.5),
    ];

    let start: i64 = 1_700_000_000;
    let span: i64 = 90 * 86_400;
    let mut records = Vec::with_capacity(spec.transfers);
    for (edges, count, dist, p_forward) in tiers {
        for _ in 0..count {
            let &(a, b) = edges.choose(&mut rng).expect("tier with transfers has edges");
            let (from, to) = if rng.random::<f64>() < p_forward { (a, b) } else { (b, a) };
            records.push(TransactionRecord {
                chain: "synthetic".into(),
                token: "SYN".into(),
                tx_id: String::new(),
                timestamp: start + rng.random_range(0..span),
                sender: addrs[from].clone(),
                recipient: addrs[to].clone(),
                value: (dist.sample(&mut rng) * 100.0).round() / 100.0,
                function_name: "transfer".into(),
            });
        }
    }
    records.sort_by(|x, y| x.timestamp.cmp(&y.timestamp).then_with(|| x.sender.cmp(&y.sender)));
    for (i, r) in records.iter_mut().enumerate() {
        r.tx_id = format!("syn-{i:06}");
    }

    let tag = |i: usize| -> (RoleLabel, String) {
        if i < spec.n_hubs {
            (RoleLabel::Treasury, format!("Gnosis Safe Proxy {}", i + 1))
        } else if i < spec.n_hubs + spec.n_relays {
            (RoleLabel::Bot, format!("MEV Bot {}", i - spec.n_hubs + 1))
        } else {
            (RoleLabel::Trader, format!("dex trader {}", i - spec.n_hubs - spec.n_relays + 1))
        }
    };
    let labels = (0..n)
        .map(|i| {
            let (role, name) = tag(i);
            LabeledAddress {
                address: addrs[i].clone(),
                role,
                source_name_tag: name,
            }
        })
        .collect();
    Ok(PlantedGraph { records, labels })
}
