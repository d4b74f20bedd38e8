//! Stage functions shared by the CLI subcommands and the end-to-end run.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::bucketing::{RoleLabel, RoleRuleSet};
use crate::config::PipelineConfig;
use crate::embed::{train, write_trace, EmbeddingMatrix, Trained};
use crate::error::{Error, Result};
use crate::hierfeat::{hier_features, hier_matrix, HIER_COLUMNS};
use crate::io::{create, write_node_rows, NodeMatrix};
use crate::lar::{all_edge_lars, node_trust, refine, write_trust, NodeTrust, Refined};
use crate::roleclf::{
    assemble_features, evaluate, majority_class, metrics_from_predictions, stratified_split, train_classifier,
    write_class_report, write_metrics, write_predictions, Ablation, FeatureTable, Metrics, MetricsRow, RoleModel,
    Split, TrainedClassifier, N_CLASSES,
};
use crate::roleclf::validate_dataset_profile;
use crate::txgraph::{
    ingest_transactions, load_labels, summarize, write_summary, write_transactions, LabelSet, TransactionRecord,
    TxGraph,
};
use crate::walkfeat::{generate_walks, train_walk_embeddings};

/// File names used inside an output directory.
pub mod files {
    pub const TRANSACTIONS: &str = "transactions.csv";
    pub const SUMMARY: &str = "summary.csv";
    pub const LABELS: &str = "labels.csv";
    pub const EMBEDDING: &str = "embedding.csv";
    pub const TRACE: &str = "loss_trace.csv";
    pub const REFINED: &str = "refined_embedding.csv";
    pub const TRUST: &str = "trust.csv";
    pub const HIER: &str = "hier_features.csv";
    pub const WALK: &str = "walk_embedding.csv";
    pub const MODEL: &str = "model.json";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const METRICS: &str = "metrics.csv";
    pub const CLASS_REPORT: &str = "class_report.csv";
}

pub struct Loaded {
    pub records: Vec<TransactionRecord>,
    pub skipped: usize,
    pub graph: TxGraph,
}

pub fn load_graph(path: &Path, config: &PipelineConfig) -> Result<Loaded> {
    let ing = ingest_transactions(path, &config.schema)?;
    let graph = TxGraph::build(&ing.records)?;
    info!(
        "{} records ({} skipped), {} addresses, {} directed pairs",
        ing.records.len(),
        ing.skipped,
        graph.node_count(),
        graph.simple_edges().len()
    );
    Ok(Loaded {
        records: ing.records,
        skipped: ing.skipped,
        graph,
    })
}

pub fn write_ingested(out: &Path, records: &[TransactionRecord]) -> Result<()> {
    write_transactions(create(&out.join(files::TRANSACTIONS))?, records)?;
    write_summary(create(&out.join(files::SUMMARY))?, &summarize(records))
}

pub fn embed_stage(graph: &TxGraph, config: &PipelineConfig) -> Result<Trained> {
    let trained = train(graph, &config.embed)?;
    if let (Some(first), Some(last)) = (trained.trace.first(), trained.trace.last()) {
        info!("embedding loss {:.4} -> {:.4}", first.loss.total, last.loss.total);
    }
    Ok(trained)
}

pub fn write_embedded(out: &Path, trained: &Trained) -> Result<()> {
    trained.embedding.save(&out.join(files::EMBEDDING))?;
    write_trace(create(&out.join(files::TRACE))?, &trained.trace)
}

pub struct RefineOutput {
    pub trust: Vec<NodeTrust>,
    pub refined: Refined,
}

pub fn refine_stage(graph: &TxGraph, emb: &EmbeddingMatrix, config: &PipelineConfig) -> Result<RefineOutput> {
    let emb = emb.align_to(graph)?;
    let lars = all_edge_lars(graph, &config.refine);
    let trust = node_trust(graph, &lars, &config.refine);
    let refined = refine(&emb, graph, &trust, &config.refine)?;
    info!(
        "refinement ran {} step(s), max displacement {:?}",
        refined.steps_run, refined.max_displacement
    );
    Ok(RefineOutput { trust, refined })
}

pub fn write_refined(out: &Path, graph: &TxGraph, r: &RefineOutput) -> Result<()> {
    r.refined.embedding.save(&out.join(files::REFINED))?;
    write_trust(create(&out.join(files::TRUST))?, graph, &r.trust)
}

pub struct Features {
    pub hier: NodeMatrix,
    pub walk: Option<NodeMatrix>,
}

/// Hierarchical features always; walk vectors only when `with_walk` is set.
pub fn feature_stage(graph: &TxGraph, emb: &EmbeddingMatrix, config: &PipelineConfig, with_walk: bool) -> Result<Features> {
    let emb = emb.align_to(graph)?;
    let hier = hier_matrix(graph, &hier_features(&emb, graph, config.k_hop)?);
    let walk = if with_walk {
        let walks = generate_walks(graph, &config.walk);
        Some(train_walk_embeddings(graph, &walks, &config.walk)?)
    } else {
        None
    };
    Ok(Features { hier, walk })
}

pub fn write_features(out: &Path, graph: &TxGraph, f: &Features) -> Result<()> {
    let columns: Vec<String> = HIER_COLUMNS.iter().map(|c| c.to_string()).collect();
    write_node_rows(create(&out.join(files::HIER))?, &columns, graph.nodes(), f.hier.rows())?;
    if let Some(w) = &f.walk {
        w.save(&out.join(files::WALK))?;
    }
    Ok(())
}

/// Row positions (into `nodes`) that carry a label, and their class ids.
pub fn labeled_rows(nodes: &[String], labels: &LabelSet) -> (Vec<usize>, Vec<usize>) {
    let role_of = labels.role_of();
    nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| role_of.get(n.as_str()).map(|r| (i, r.index())))
        .unzip()
}

pub struct Variant {
    pub ablation: Ablation,
    pub trained: TrainedClassifier,
    pub metrics: Metrics,
}

pub struct ClassifyOutput {
    /// Node names in the shared split.
    pub train_nodes: Vec<String>,
    pub test_nodes: Vec<String>,
    pub variants: Vec<Variant>,
    pub baseline: Metrics,
}

impl ClassifyOutput {
    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        let mut rows: Vec<MetricsRow> = self
            .variants
            .iter()
            .map(|v| MetricsRow {
                variant: v.ablation.name(),
                metrics: v.metrics.clone(),
            })
            .collect();
        rows.push(MetricsRow {
            variant: "majority".into(),
            metrics: self.baseline.clone(),
        });
        rows
    }
}

/// Splits the labelled nodes once, then trains and scores one model per
/// ablation on that shared split, plus the majority-class baseline.
pub fn classify_stage(
    emb: &NodeMatrix,
    features: &Features,
    labels: &LabelSet,
    config: &PipelineConfig,
    ablations: &[Ablation],
) -> Result<ClassifyOutput> {
    let (rows, y) = labeled_rows(emb.nodes(), labels);
    if rows.is_empty() {
        return Err(Error::EmptyInput("labelled addresses in the graph"));
    }
    let unlabeled = emb.len() - rows.len();
    if unlabeled > 0 {
        info!("{unlabeled} graph addresses have no label and are not classified");
    }
    let split: Split = stratified_split(&y, config.classifier.test_fraction, config.split_seed())?;
    let pick = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) { idx.iter().map(|&k| (rows[k], y[k])).unzip() };
    let (train_rows, train_y) = pick(&split.train);
    let (test_rows, test_y) = pick(&split.test);

    let mut variants = Vec::new();
    for &ablation in ablations {
        let table = assemble_features(emb, features.walk.as_ref(), Some(&features.hier), ablation)?;
        let cfg = config.classifier.clone().with_ablation(ablation);
        let mut trained = train_classifier(&table.select(&train_rows), &train_y, &cfg)?;
        let test_table = table.select(&test_rows);
        trained.model.test_nodes = test_table.nodes().to_vec();
        let metrics = evaluate(&trained.model, &test_table, &test_y)?;
        info!(
            "{}: macro-F1 {:.4}, accuracy {:.4} (best epoch {})",
            ablation.name(),
            metrics.macro_avg.f1,
            metrics.accuracy,
            trained.best_epoch
        );
        variants.push(Variant {
            ablation,
            trained,
            metrics,
        });
    }
    let majority = majority_class(&train_y);
    let baseline = metrics_from_predictions(&test_y, &vec![majority; test_y.len()], N_CLASSES)?;
    Ok(ClassifyOutput {
        train_nodes: train_rows.iter().map(|&i| emb.nodes()[i].clone()).collect(),
        test_nodes: test_rows.iter().map(|&i| emb.nodes()[i].clone()).collect(),
        variants,
        baseline,
    })
}

/// Test-set metrics of a stored model against labelled features.
pub fn evaluate_model(model: &RoleModel, table: &FeatureTable, labels: &LabelSet) -> Result<Metrics> {
    let role_of = labels.role_of();
    let index: std::collections::HashMap<&str, usize> =
        table.nodes().iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for n in &model.test_nodes {
        let (&i, role) = index
            .get(n.as_str())
            .zip(role_of.get(n.as_str()))
            .ok_or_else(|| Error::MisalignedInputs(format!("test node `{n}` lacks features or a label")))?;
        rows.push(i);
        y.push(role.index());
    }
    evaluate(model, &table.select(&rows), &y)
}

pub fn write_classified(out: &Path, emb: &NodeMatrix, features: &Features, c: &ClassifyOutput) -> Result<()> {
    write_metrics(create(&out.join(files::METRICS))?, &c.metrics_rows())?;
    if let Some(full) = c.variants.first() {
        write_class_report(create(&out.join(files::CLASS_REPORT))?, &full.metrics)?;
        let model = &full.trained.model;
        fs::write(out.join(files::MODEL), model.to_json()?).map_err(|e| Error::io(out.join(files::MODEL), e))?;
        let table = assemble_features(emb, features.walk.as_ref(), Some(&features.hier), model.ablation)?;
        write_predictions(
            create(&out.join(files::PREDICTIONS))?,
            table.nodes(),
            &model.predict_proba(&table)?,
        )?;
    }
    Ok(())
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub classify: ClassifyOutput,
}

/// ingest → embed → refine → features → classify, writing every stage's
/// artefacts to `out`. The first evaluated variant is the configured ablation;
/// the remaining ablations and the majority baseline follow.
pub fn run_all(config: &PipelineConfig, transactions: &Path, labels: &Path, out: &Path) -> Result<RunSummary> {
    let config = config.resolved()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let loaded = load_graph(transactions, &config)?;
    write_ingested(out, &loaded.records)?;
    let graph = &loaded.graph;

    let roles = RoleRuleSet::resolve(&config.rules.roles)?;
    let label_set = load_labels(labels, &roles)?;
    crate::txgraph::write_labels(create(&out.join(files::LABELS))?, &label_set.labels)?;
    let counts = label_set.role_counts();
    info!(
        "labels: {}",
        RoleLabel::ALL
            .iter()
            .map(|r| format!("{}={}", r.as_str(), counts[r.index()]))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for line in validate_dataset_profile(&loaded.records, &label_set.labels).to_string().lines() {
        info!("profile: {line}");
    }

    let trained = embed_stage(graph, &config)?;
    write_embedded(out, &trained)?;
    let refined = refine_stage(graph, &trained.embedding, &config)?;
    write_refined(out, graph, &refined)?;
    let z = refined.refined.embedding.matrix();
    let features = feature_stage(graph, &refined.refined.embedding, &config, true)?;
    write_features(out, graph, &features)?;

    let primary = config.classifier.ablation();
    let mut ablations = vec![primary];
    ablations.extend(Ablation::ALL.iter().copied().filter(|a| *a != primary));
    let classify = classify_stage(z, &features, &label_set, &config, &ablations)?;
    write_classified(out, z, &features, &classify)?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        classify,
    })
}
