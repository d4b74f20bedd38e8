//! Oracles shared by the core integration tests and the CLI acceptance run.
// `ensure!` negates its condition on purpose so that NaN fails a check.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;

use hyperrole::bucketing::{BucketRuleSet, RoleLabel, RoleRuleSet};
use hyperrole::embed::{
    contrastive_gradient, contrastive_loss, positive_edges, radial_gradient, radial_loss, total_gradient, total_loss,
    EmbeddingMatrix,
};
use hyperrole::geometry::{distance, log0, norm, radius, PoincareBall};
use hyperrole::lar::{all_edge_lars, edge_lar, neighbor_weights, node_trust, refine, RefineConfig};
use hyperrole::{NodeMatrix, TransactionRecord, TxGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---- geometry ----

pub fn ball_point(rng: &mut ChaCha8Rng, d: usize, max_norm: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = norm(&v);
    if n > max_norm {
        v.iter().map(|x| x * max_norm / n).collect()
    } else {
        v
    }
}

/// Metric axioms, Möbius identities and map round trips on random points.
pub fn geometry_suite(trials: usize, seed: u64) -> Check {
    let ball = PoincareBall::new(1e-5, 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let d = rng.random_range(1..6);
        let (a, b, c) = (
            ball_point(&mut rng, d, 0.95),
            ball_point(&mut rng, d, 0.95),
            ball_point(&mut rng, d, 0.95),
        );
        let (ab, ba, bc, ac) = (distance(&a, &b), distance(&b, &a), distance(&b, &c), distance(&a, &c));
        ensure!((ab - ba).abs() <= 1e-9 * (1.0 + ab), "asymmetric distance {ab} vs {ba}");
        ensure!(distance(&a, &a).abs() <= 1e-9, "d(a, a) = {}", distance(&a, &a));
        ensure!(ac <= ab + bc + 1e-9, "triangle inequality: {ac} > {ab} + {bc}");
        let origin = vec![0.0; d];
        ensure!((radius(&a) - distance(&a, &origin)).abs() <= 1e-9, "radius differs from distance to origin");
        let id = ball.mobius_add(&origin, &a);
        ensure!(
            id.coords().iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-9),
            "origin is not a left identity"
        );
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        ensure!(norm(ball.mobius_add(&neg, &a).coords()) <= 1e-9, "(-a) + a is not the origin");
        let back = ball.exp0(&log0(&a));
        ensure!(
            back.coords().iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-6),
            "exp0(log0(a)) != a"
        );
    }
    Ok(())
}

// ---- gradients ----

pub const GAMMA: f64 = 1.0;
pub const BETA: f64 = 0.1;
const FD_STEP: f64 = 1e-6;

pub struct GradInstance {
    pub graph: TxGraph,
    pub emb: NodeMatrix,
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<usize>,
}

fn random_grad_instance(rng: &mut ChaCha8Rng) -> GradInstance {
    let n = rng.random_range(3..=10);
    let d = rng.random_range(1..=4);
    // a path keeps every node attached; extra edges are random
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    for u in 0..n {
        for v in 0..n {
            if u != v && v != u + 1 && rng.random::<f64>() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let nodes = (0..n).map(|i| format!("v{i}")).collect();
    let graph = TxGraph::from_edges(nodes, &edges).expect("connected test graph");
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-0.45..0.45)).collect();
    let emb = NodeMatrix::new(graph.nodes().to_vec(), d, data).expect("matching shape");
    let positives = positive_edges(&graph);
    let m = rng.random_range(1..=3);
    let negatives = (0..positives.len() * m).map(|_| rng.random_range(0..n)).collect();
    GradInstance {
        graph,
        emb,
        positives,
        negatives,
    }
}

/// Finite differences are meaningless across a hinge kink or a norm singularity.
fn smooth(inst: &GradInstance) -> bool {
    let m = inst.negatives.len() / inst.positives.len();
    let e = &inst.emb;
    let far_from_kink = inst.positives.iter().enumerate().all(|(p, &(i, j))| {
        inst.negatives[p * m..(p + 1) * m].iter().all(|&k| {
            let arg = distance(e.row(i), e.row(j)) - distance(e.row(i), e.row(k)) + GAMMA;
            arg.abs() > 1e-3 && k != i
        })
    });
    far_from_kink && e.rows().all(|z| norm(z) > 1e-3)
}

pub fn gradient_instances(count: usize, seed: u64) -> Vec<GradInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let inst = random_grad_instance(&mut rng);
        if smooth(&inst) {
            out.push(inst);
        }
    }
    out
}

fn central_differences(emb: &NodeMatrix, f: &dyn Fn(&NodeMatrix) -> f64) -> Vec<f64> {
    let mut e = emb.clone();
    (0..e.as_slice().len())
        .map(|k| {
            let x = e.as_slice()[k];
            e.as_mut_slice()[k] = x + FD_STEP;
            let up = f(&e);
            e.as_mut_slice()[k] = x - FD_STEP;
            let down = f(&e);
            e.as_mut_slice()[k] = x;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative error of the contrastive, radial and total gradients.
pub fn gradient_errors(inst: &GradInstance) -> [f64; 3] {
    let (g, e, p, n) = (&inst.graph, &inst.emb, &inst.positives, &inst.negatives);
    let c = relative_error(
        &contrastive_gradient(e, p, n, GAMMA),
        &central_differences(e, &|m| contrastive_loss(m, p, n, GAMMA)),
    );
    let r = relative_error(
        &radial_gradient(e, g).expect("radial gradient"),
        &central_differences(e, &|m| radial_loss(m, g).expect("radial loss")),
    );
    let t = relative_error(
        &total_gradient(e, g, p, n, GAMMA, BETA).expect("total gradient"),
        &central_differences(e, &|m| total_loss(m, g, p, n, GAMMA, BETA).expect("total loss").total),
    );
    [c, r, t]
}

pub fn gradient_suite(count: usize, seed: u64) -> Check {
    for (k, inst) in gradient_instances(count, seed).iter().enumerate() {
        let errs = gradient_errors(inst);
        ensure!(errs.iter().all(|&e| e < 1e-4), "instance {k}: relative errors {errs:?}");
    }
    Ok(())
}

// ---- LAR ----

pub fn record(from: &str, to: &str, value: f64, timestamp: i64) -> TransactionRecord {
    TransactionRecord {
        chain: "c".into(),
        token: "t".into(),
        tx_id: String::new(),
        timestamp,
        sender: from.into(),
        recipient: to.into(),
        value,
        function_name: "transfer".into(),
    }
}

pub fn random_records(rng: &mut ChaCha8Rng) -> Vec<TransactionRecord> {
    let n = rng.random_range(2..8);
    let count = rng.random_range(1..40);
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let value = 10f64.powf(rng.random_range(-2.0..6.0));
            record(&format!("a{a}"), &format!("a{b}"), value, rng.random_range(0..1000))
        })
        .collect()
}

/// Straight from the records, without the graph's indexes.
pub fn brute_lar(records: &[TransactionRecord], u: &str, v: &str, window: (i64, i64), eps: f64) -> Option<f64> {
    let inside = |r: &&TransactionRecord| r.timestamp >= window.0 && r.timestamp <= window.1;
    let vals: Vec<f64> = records
        .iter()
        .filter(inside)
        .filter(|r| r.sender == u && r.recipient == v)
        .map(|r| r.value)
        .collect();
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let inflow: f64 = records.iter().filter(inside).filter(|r| r.recipient == v).map(|r| r.value).sum();
    let outflow: f64 = records.iter().filter(inside).filter(|r| r.sender == v).map(|r| r.value).sum();
    Some(std / (mean + eps) * (1.0 + inflow / (outflow + eps)))
}

/// Compares every edge of `trials` random graphs and windows; returns the edge count.
pub fn lar_oracle(trials: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for _ in 0..trials {
        let records = random_records(&mut rng);
        let graph = TxGraph::build(&records).map_err(|e| e.to_string())?;
        let config = RefineConfig {
            window_delta: if rng.random::<bool>() { Some(rng.random_range(0..1000)) } else { None },
            ..Default::default()
        };
        let window = config.window(&graph);
        for &(u, v) in graph.simple_edges() {
            let want = brute_lar(&records, graph.address(u), graph.address(v), window, config.smoothing_eps);
            match (edge_lar(&graph, u, v, &config), want) {
                (Ok(got), Some(want)) => {
                    let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
                    ensure!(got == want || rel < 1e-9, "edge {u}->{v}: {got} vs {want}");
                    compared += 1;
                }
                (Err(_), None) => {}
                (got, want) => return Err(format!("edge {u}->{v}: {got:?} vs {want:?}")),
            }
        }
    }
    Ok(compared)
}

// ---- refinement ----

fn random_tree_records(rng: &mut ChaCha8Rng) -> Vec<TransactionRecord> {
    let n = rng.random_range(3..12);
    let name = |i: usize| format!("n{i:02}");
    let mut records: Vec<TransactionRecord> = (1..n)
        .map(|v| record(&name(rng.random_range(0..v)), &name(v), rng.random_range(1.0..100.0), 0))
        .collect();
    for _ in 0..rng.random_range(0..30) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        records.push(record(&name(a), &name(b), rng.random_range(1.0..1e4), rng.random_range(0..100)));
    }
    records
}

fn embedding(graph: &TxGraph, dim: usize, data: Vec<f64>) -> EmbeddingMatrix {
    EmbeddingMatrix::from_matrix(NodeMatrix::new(graph.nodes().to_vec(), dim, data).expect("shape"))
        .expect("inside the ball")
}

pub fn refinement_weights_and_containment(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = RefineConfig::default();
    for _ in 0..trials {
        let graph = TxGraph::build(&random_tree_records(&mut rng)).map_err(|e| e.to_string())?;
        let trust = node_trust(&graph, &all_edge_lars(&graph, &config), &config);
        for i in 0..graph.node_count() {
            let w = neighbor_weights(&graph, &trust, i);
            ensure!(
                w.is_empty() || (w.iter().sum::<f64>() - 1.0).abs() < 1e-12,
                "weights of node {i} sum to {}",
                w.iter().sum::<f64>()
            );
        }
        let data = (0..graph.node_count() * 3).map(|_| rng.random_range(-0.57..0.57)).collect();
        let out = refine(&embedding(&graph, 3, data), &graph, &trust, &config).map_err(|e| e.to_string())?;
        ensure!(
            out.embedding.matrix().rows().all(|z| norm(z) < 1.0),
            "a refined point left the ball"
        );
        ensure!(out.steps_run >= 1 && out.steps_run <= config.steps, "{} steps run", out.steps_run);
    }
    Ok(())
}

pub fn two_node_swap() -> Check {
    let graph = TxGraph::from_edges(vec!["a".into(), "b".into()], &[(0, 1)]).map_err(|e| e.to_string())?;
    let config = RefineConfig {
        steps: 1,
        ..Default::default()
    };
    let trust = node_trust(&graph, &all_edge_lars(&graph, &config), &config);
    let out = refine(&embedding(&graph, 2, vec![0.3, 0.0, 0.0, -0.2]), &graph, &trust, &config)
        .map_err(|e| e.to_string())?;
    let m = out.embedding.matrix();
    let close = |row: &[f64], want: [f64; 2]| row.iter().zip(want).all(|(x, y)| (x - y).abs() < 1e-15);
    ensure!(close(m.row(0), [0.0, -0.2]), "a moved to {:?}", m.row(0));
    ensure!(close(m.row(1), [0.3, 0.0]), "b moved to {:?}", m.row(1));
    Ok(())
}

pub fn early_stopping() -> Check {
    let config = RefineConfig::default();
    // points at the origin are a fixed point
    let path = TxGraph::from_edges((0..4).map(|i| format!("n{i}")).collect(), &[(0, 1), (1, 2), (2, 3)])
        .map_err(|e| e.to_string())?;
    let trust = node_trust(&path, &all_edge_lars(&path, &config), &config);
    let out = refine(&embedding(&path, 2, vec![0.0; 8]), &path, &trust, &config).map_err(|e| e.to_string())?;
    ensure!(out.converged && out.steps_run == 1, "fixed point ran {} steps", out.steps_run);

    // nearly coincident clique members settle within the budget
    let clique = TxGraph::from_edges((0..3).map(|i| format!("k{i}")).collect(), &[(0, 1), (1, 2), (0, 2)])
        .map_err(|e| e.to_string())?;
    let trust = node_trust(&clique, &all_edge_lars(&clique, &config), &config);
    let out = refine(&embedding(&clique, 1, vec![0.1, 0.1 + 1e-6, 0.1 - 1e-6]), &clique, &trust, &config)
        .map_err(|e| e.to_string())?;
    let d = &out.max_displacement;
    ensure!(out.converged, "clique did not converge: {d:?}");
    ensure!(*d.last().unwrap() < config.convergence_tol, "last displacement {d:?}");
    ensure!(
        d[..d.len() - 1].iter().all(|&x| x >= config.convergence_tol),
        "stopped late: {d:?}"
    );
    Ok(())
}

// ---- rule tables ----

pub const BUIDL: &[(&str, &[&str])] = &[
    ("issuetokens", &["issue", "mint", "bulkissuance"]),
    ("redeem", &["redeem"]),
    ("burn", &["burn"]),
    ("transfer", &["transfer", "bridgedstokens", "multisend"]),
    ("deposit", &["deposit"]),
    ("deliver", &["deliver"]),
];

pub const BENJI: &[(&str, &[&str])] = &[("signeddataexecution", &["signeddataexecution"])];

pub const USDY: &[(&str, &[&str])] = &[
    ("swap", &["swap", "unoswap", "swaptoken"]),
    ("liquidity", &["add_liquidity", "removeliquidity"]),
    ("lending", &["lend", "borrow", "repay", "loan", "collateral"]),
    ("transfer", &["transfer", "transfertoken", "safetransfer"]),
    ("bridge", &["bridge", "startbridge", "swapandstartbridge"]),
    ("mint", &["mint"]),
    ("burn", &["burn"]),
    ("rewards", &["claim", "harvest", "reward", "collect"]),
    ("governance", &["vote", "governance"]),
    (
        "execution",
        &["executemeta", "execute", "exectransaction", "delegatecall", "call", "multicall"],
    ),
    ("approval", &["approve", "permit"]),
    ("configuration", &["register", "set_", "init", "config"]),
];

pub const ROLES: &[(RoleLabel, &[&str])] = &[
    (
        RoleLabel::Trader,
        &["dex trader", "aggregator trader", "nft trader", "daily trader", "number of DEXs traded"],
    ),
    (
        RoleLabel::Bot,
        &["Sandwich Attacker", "Arbitrage", "MEV", "Flashloan", "Flashbots"],
    ),
    (
        RoleLabel::Treasury,
        &["Safe", "Gnosis Safe", "Multisig", "DAO Treasury", "Vault", "Zerion Multisig"],
    ),
];

/// Every golden pattern maps to its bucket, and the shipped file holds exactly the golden patterns.
pub fn bucket_table(name: &str, golden: &[(&str, &[&str])]) -> Check {
    let rules = BucketRuleSet::builtin(name).ok_or_else(|| format!("no builtin `{name}`"))?;
    for (bucket, patterns) in golden {
        for p in *patterns {
            ensure!(rules.assign(p) == *bucket, "{name}: `{p}` -> {}", rules.assign(p));
            let upper = p.to_uppercase();
            ensure!(rules.assign(&upper) == *bucket, "{name}: `{upper}` -> {}", rules.assign(&upper));
        }
    }
    let shipped: BTreeSet<(String, String)> = rules
        .rules()
        .iter()
        .flat_map(|r| r.patterns.iter().map(|p| (r.bucket.clone(), p.clone())))
        .collect();
    let expected: BTreeSet<(String, String)> = golden
        .iter()
        .flat_map(|(b, ps)| ps.iter().map(|p| (b.to_string(), p.to_string())))
        .collect();
    ensure!(
        shipped == expected,
        "{name}: uncovered {:?}, unexpected {:?}",
        expected.difference(&shipped).collect::<Vec<_>>(),
        shipped.difference(&expected).collect::<Vec<_>>()
    );
    ensure!(rules.assign("zzzz") == "unknown", "{name}: fallback is {}", rules.assign("zzzz"));
    Ok(())
}

pub fn role_table() -> Check {
    let rules = RoleRuleSet::default();
    for (role, patterns) in ROLES {
        for p in *patterns {
            ensure!(rules.assign(p) == *role, "`{p}` -> {:?}", rules.assign(p));
            let embedded = format!("xx {} yy", p.to_lowercase());
            ensure!(rules.assign(&embedded) == *role, "`{embedded}` -> {:?}", rules.assign(&embedded));
        }
    }
    let shipped: BTreeSet<(RoleLabel, String)> = rules
        .rules()
        .iter()
        .flat_map(|(r, ps)| ps.iter().map(|p| (*r, p.to_lowercase())))
        .collect();
    let expected: BTreeSet<(RoleLabel, String)> = ROLES
        .iter()
        .flat_map(|(r, ps)| ps.iter().map(|p| (*r, p.to_lowercase())))
        .collect();
    ensure!(shipped == expected, "role patterns differ from the golden table");
    ensure!(rules.assign("Gnosis Safe Proxy 7") == RoleLabel::Treasury, "Gnosis Safe precedence");
    ensure!(rules.assign("Uniswap V3 Router") == RoleLabel::Other, "fallback role");
    Ok(())
}

pub fn all_rule_tables() -> Check {
    bucket_table("buidl", BUIDL)?;
    bucket_table("benji", BENJI)?;
    bucket_table("usdy", USDY)?;
    ensure!(
        BucketRuleSet::builtin("usdy").unwrap().assign("swapAndStartBridgeTokensViaStargate") == "bridge",
        "swapandstartbridge precedence"
    );
    role_table()
}
