use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperrole::bucketing::{function_chain_report, write_bucketed, write_report, BucketRuleSet, RoleRuleSet};
use hyperrole::embed::{train, EmbeddingMatrix, TrainConfig};
use hyperrole::error::{Error, ErrorKind, Result};
use hyperrole::io::{create, NodeMatrix};
use hyperrole::pipeline::{self, files, Features};
use hyperrole::roleclf::{assemble_features, write_class_report, write_metrics, write_predictions, MetricsRow, RoleModel};
use hyperrole::synth::{
    build_tree, check_radius_monotonicity, generate_planted_graph, ideal_tree_embedding, read_depths, write_depths,
    Spearman,
};
use hyperrole::txgraph::{load_labels, write_labels, write_name_tags, write_transactions, LabelSet, TxGraph};
use hyperrole::PipelineConfig;
use log::{info, warn};

#[derive(Parser)]
#[command(name = "hyperrole", version, about = "Hyperbolic address-role inference for token transaction graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bitwise-reproducible outputs. Every stage is deterministic; `false` is accepted but changes nothing.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
    /// Transaction column names, overriding the config's `[schema]`.
    #[arg(long, global = true, help_heading = "Column names")]
    col_chain: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_token: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_tx_id: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_timestamp: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_from: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_to: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_value: Option<String>,
    #[arg(long, global = true, help_heading = "Column names")]
    col_function: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalise a transaction CSV and summarise it per token and chain.
    Ingest(TxArg),
    /// Append a functional bucket to every transaction.
    Bucket(BucketArgs),
    /// Function-bucket × chain counts, value totals and date range.
    Report(BucketArgs),
    /// Assign roles to name-tagged addresses.
    Label(LabelArg),
    /// Train the ball embedding.
    Embed(TxArg),
    /// Trust-weighted refinement of an embedding.
    Refine(RefineArgs),
    /// Hierarchical radius features and random-walk vectors.
    Features(FeatureArgs),
    /// Train, apply or evaluate the role classifier.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Synthetic fixtures and the radius–depth check.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// ingest → embed → refine → features → classify eval.
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct TxArg {
    /// Transaction CSV (defaults to `inputs.transactions` from the config).
    #[arg(long)]
    transactions: Option<PathBuf>,
}

#[derive(Args)]
struct BucketArgs {
    #[command(flatten)]
    tx: TxArg,
    /// `buidl`, `usdy`, `benji`, or a rule file path.
    #[arg(long)]
    rules: Option<String>,
}

#[derive(Args)]
struct LabelArg {
    /// Name-tag CSV (`address,name`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// `default` or a role rule file path.
    #[arg(long)]
    role_rules: Option<String>,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    tx: TxArg,
    #[arg(long)]
    embedding: PathBuf,
}

#[derive(Args)]
struct FeatureArgs {
    #[command(flatten)]
    tx: TxArg,
    /// Usually the refined embedding.
    #[arg(long)]
    embedding: PathBuf,
    /// Skip the random-walk vectors.
    #[arg(long)]
    no_walk: bool,
}

#[derive(Args)]
struct FeatureInputs {
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long)]
    hier: PathBuf,
    #[arg(long)]
    walk: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ClassifyCommand {
    /// Split the labelled addresses, train, and store the model.
    Train {
        #[command(flatten)]
        inputs: FeatureInputs,
        #[command(flatten)]
        labels: LabelArg,
        #[arg(long)]
        no_hier: bool,
        #[arg(long)]
        no_walk: bool,
    },
    /// Role probabilities for every address.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        inputs: FeatureInputs,
    },
    /// Metrics on the model's held-out addresses.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        inputs: FeatureInputs,
        #[command(flatten)]
        labels: LabelArg,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// k-ary tree fixture with its ideal embedding.
    Tree {
        #[arg(long)]
        branching: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        step_length: Option<f64>,
        #[arg(long, default_value_t = 8)]
        dim: usize,
    },
    /// Hub/relay/trader transaction graph with planted roles.
    Roles {
        #[arg(long)]
        hubs: Option<usize>,
        #[arg(long)]
        relays: Option<usize>,
        #[arg(long)]
        traders: Option<usize>,
        #[arg(long)]
        transfers: Option<usize>,
    },
    /// Depth–radius rank correlation of an embedding.
    CheckLemma {
        /// `node,depth` CSV; without it the configured tree is generated.
        #[arg(long, requires = "embedding")]
        depths: Option<PathBuf>,
        #[arg(long, requires = "depths")]
        embedding: Option<PathBuf>,
        /// Also train an embedding of the generated tree and report its correlation.
        #[arg(long)]
        trained: bool,
        #[arg(long, default_value_t = 8)]
        dim: usize,
    },
}

#[derive(Args)]
struct RunAllArgs {
    #[command(flatten)]
    tx: TxArg,
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    let s = &mut c.schema;
    for (flag, field) in [
        (&g.col_chain, &mut s.chain),
        (&g.col_token, &mut s.token),
        (&g.col_tx_id, &mut s.tx_id),
        (&g.col_timestamp, &mut s.timestamp),
        (&g.col_from, &mut s.from),
        (&g.col_to, &mut s.to),
        (&g.col_value, &mut s.value),
        (&g.col_function, &mut s.function_name),
    ] {
        if let Some(v) = flag {
            *field = v.clone();
        }
    }
    c.resolved()
}

fn input(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::InvalidConfig(format!("no {what} file given (flag or [inputs] in the config)")))
}

fn out_dir(g: &Global) -> Result<&Path> {
    fs::create_dir_all(&g.out).map_err(|e| Error::Io {
        path: g.out.clone(),
        source: e,
    })?;
    Ok(&g.out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn graph_for(tx: &TxArg, c: &PipelineConfig) -> Result<pipeline::Loaded> {
    pipeline::load_graph(&input(&tx.transactions, &c.inputs.transactions, "transactions")?, c)
}

fn label_set(arg: &LabelArg, c: &PipelineConfig) -> Result<LabelSet> {
    let rules = RoleRuleSet::resolve(arg.role_rules.as_deref().unwrap_or(&c.rules.roles))?;
    load_labels(&input(&arg.labels, &c.inputs.labels, "labels")?, &rules)
}

fn load_features(inputs: &FeatureInputs) -> Result<(NodeMatrix, Features)> {
    let emb = EmbeddingMatrix::load(&inputs.embedding)?.into_matrix();
    let hier = NodeMatrix::load(&inputs.hier)?;
    let walk = inputs.walk.as_deref().map(NodeMatrix::load).transpose()?;
    Ok((emb, Features { hier, walk }))
}

fn print_spearman(label: &str, s: &Spearman) {
    println!("{label}: spearman_rho={} degenerate={} n={}", s.rho, s.degenerate, s.n);
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    if !g.deterministic {
        warn!("all stages are deterministic; --deterministic false has no effect");
    }
    let c = load_config(g)?;

    match &cli.command {
        Command::Ingest(tx) => {
            let loaded = graph_for(tx, &c)?;
            pipeline::write_ingested(out_dir(g)?, &loaded.records)?;
            println!(
                "records={} skipped={} addresses={}",
                loaded.records.len(),
                loaded.skipped,
                loaded.graph.node_count()
            );
        }
        Command::Bucket(a) | Command::Report(a) => {
            let ing = hyperrole::txgraph::ingest_transactions(&input(&a.tx.transactions, &c.inputs.transactions, "transactions")?, &c.schema)?;
            let rules = BucketRuleSet::resolve(a.rules.as_deref().unwrap_or(&c.rules.buckets))?;
            for s in rules.shadowed_patterns() {
                warn!("{s:?}");
            }
            let out = out_dir(g)?;
            if matches!(cli.command, Command::Bucket(_)) {
                write_bucketed(create(&out.join("bucketed.csv"))?, &ing.records, &rules)?;
            } else {
                let rows = function_chain_report(&ing.records, &rules);
                write_report(create(&out.join("report.csv"))?, &rows)?;
                println!("rows={}", rows.len());
            }
        }
        Command::Label(a) => {
            let set = label_set(a, &c)?;
            write_labels(create(&out_dir(g)?.join(files::LABELS))?, &set.labels)?;
            let counts = set.role_counts();
            let parts: Vec<String> = hyperrole::RoleLabel::ALL
                .iter()
                .map(|r| format!("{}={}", r.as_str(), counts[r.index()]))
                .collect();
            println!("{} duplicates={}", parts.join(" "), set.duplicates);
        }
        Command::Embed(tx) => {
            let loaded = graph_for(tx, &c)?;
            let trained = pipeline::embed_stage(&loaded.graph, &c)?;
            pipeline::write_embedded(out_dir(g)?, &trained)?;
        }
        Command::Refine(a) => {
            let loaded = graph_for(&a.tx, &c)?;
            let emb = EmbeddingMatrix::load(&a.embedding)?;
            let r = pipeline::refine_stage(&loaded.graph, &emb, &c)?;
            pipeline::write_refined(out_dir(g)?, &loaded.graph, &r)?;
        }
        Command::Features(a) => {
            let loaded = graph_for(&a.tx, &c)?;
            let emb = EmbeddingMatrix::load(&a.embedding)?;
            let f = pipeline::feature_stage(&loaded.graph, &emb, &c, !a.no_walk)?;
            pipeline::write_features(out_dir(g)?, &loaded.graph, &f)?;
        }
        Command::Classify(cmd) => classify(g, &c, cmd)?,
        Command::Synth(cmd) => synth(g, &c, cmd)?,
        Command::RunAll(a) => {
            let tx = input(&a.tx.transactions, &c.inputs.transactions, "transactions")?;
            let labels = input(&a.labels, &c.inputs.labels, "labels")?;
            let summary = pipeline::run_all(&c, &tx, &labels, out_dir(g)?)?;
            for row in summary.classify.metrics_rows() {
                println!(
                    "{:<12} macro_f1={:.4} accuracy={:.4}",
                    row.variant, row.metrics.macro_avg.f1, row.metrics.accuracy
                );
            }
        }
    }
    Ok(())
}

fn classify(g: &Global, c: &PipelineConfig, cmd: &ClassifyCommand) -> Result<()> {
    match cmd {
        ClassifyCommand::Train {
            inputs,
            labels,
            no_hier,
            no_walk,
        } => {
            let (emb, features) = load_features(inputs)?;
            let set = label_set(labels, c)?;
            let mut ablation = c.classifier.ablation();
            ablation.use_hier &= !no_hier;
            ablation.use_walk &= !no_walk && features.walk.is_some();
            let out = pipeline::classify_stage(&emb, &features, &set, c, &[ablation])?;
            let model = &out.variants[0].trained.model;
            write_text(&out_dir(g)?.join(files::MODEL), &model.to_json()?)?;
            println!(
                "train={} test={} best_epoch={}",
                out.train_nodes.len(),
                out.test_nodes.len(),
                out.variants[0].trained.best_epoch
            );
        }
        ClassifyCommand::Predict { model, inputs } => {
            let model = RoleModel::from_json(&read_text(model)?)?;
            let (emb, f) = load_features(inputs)?;
            let table = assemble_features(&emb, f.walk.as_ref(), Some(&f.hier), model.ablation)?;
            write_predictions(
                create(&out_dir(g)?.join(files::PREDICTIONS))?,
                table.nodes(),
                &model.predict_proba(&table)?,
            )?;
        }
        ClassifyCommand::Eval { model, inputs, labels } => {
            let model = RoleModel::from_json(&read_text(model)?)?;
            let (emb, f) = load_features(inputs)?;
            let set = label_set(labels, c)?;
            let table = assemble_features(&emb, f.walk.as_ref(), Some(&f.hier), model.ablation)?;
            let metrics = pipeline::evaluate_model(&model, &table, &set)?;
            let out = out_dir(g)?;
            write_class_report(create(&out.join(files::CLASS_REPORT))?, &metrics)?;
            println!("macro_f1={:.4} accuracy={:.4}", metrics.macro_avg.f1, metrics.accuracy);
            write_metrics(
                create(&out.join(files::METRICS))?,
                &[MetricsRow {
                    variant: model.ablation.name(),
                    metrics,
                }],
            )?;
        }
    }
    Ok(())
}

fn synth(g: &Global, c: &PipelineConfig, cmd: &SynthCommand) -> Result<()> {
    let mut tree_spec = c.synth.tree;
    match cmd {
        SynthCommand::Tree {
            branching,
            depth,
            step_length,
            dim,
        } => {
            tree_spec.branching = branching.unwrap_or(tree_spec.branching);
            tree_spec.depth = depth.unwrap_or(tree_spec.depth);
            tree_spec.step_length = step_length.unwrap_or(tree_spec.step_length);
            let (tree, emb) = ideal_tree_embedding(&tree_spec, *dim, c.seed)?;
            let out = out_dir(g)?;
            write_transactions(create(&out.join("tree_transactions.csv"))?, &tree.records())?;
            write_depths(create(&out.join("tree_depths.csv"))?, &tree.nodes, &tree.depths)?;
            emb.save(&out.join("tree_ideal_embedding.csv"))?;
            println!("nodes={} edges={}", tree.nodes.len(), tree.edges.len());
        }
        SynthCommand::Roles {
            hubs,
            relays,
            traders,
            transfers,
        } => {
            let mut spec = c.synth.roles.clone();
            spec.n_hubs = hubs.unwrap_or(spec.n_hubs);
            spec.n_relays = relays.unwrap_or(spec.n_relays);
            spec.n_traders = traders.unwrap_or(spec.n_traders);
            spec.transfers = transfers.unwrap_or(spec.transfers);
            let planted = generate_planted_graph(&spec)?;
            let out = out_dir(g)?;
            write_transactions(create(&out.join(files::TRANSACTIONS))?, &planted.records)?;
            write_name_tags(create(&out.join("name_tags.csv"))?, &planted.labels)?;
            println!("records={} addresses={}", planted.records.len(), planted.labels.len());
        }
        SynthCommand::CheckLemma {
            depths,
            embedding,
            trained,
            dim,
        } => {
            let mut report = vec![];
            if let (Some(dp), Some(ep)) = (depths, embedding) {
                let emb = EmbeddingMatrix::load(ep)?;
                let pairs = read_depths(fs::File::open(dp).map_err(|e| Error::Io {
                    path: dp.clone(),
                    source: e,
                })?)?;
                let index: std::collections::HashMap<&str, usize> =
                    pairs.iter().map(|(n, d)| (n.as_str(), *d)).collect();
                let d: Vec<usize> = emb
                    .nodes()
                    .iter()
                    .map(|n| {
                        index
                            .get(n.as_str())
                            .copied()
                            .ok_or_else(|| Error::MisalignedInputs(format!("node `{n}` has no depth")))
                    })
                    .collect::<Result<_>>()?;
                report.push(("input", check_radius_monotonicity(&emb, &d)?));
            } else {
                let (tree, ideal) = ideal_tree_embedding(&tree_spec, *dim, c.seed)?;
                report.push(("ideal", check_radius_monotonicity(&ideal, &tree.depths)?));
                if *trained {
                    let tree = build_tree(&tree_spec)?;
                    let graph: TxGraph = tree.graph()?;
                    let cfg = TrainConfig {
                        dim: *dim,
                        ..c.embed.clone()
                    };
                    let emb = train(&graph, &cfg)?.embedding;
                    report.push(("trained", check_radius_monotonicity(&emb, &tree.depths_for(&graph))?));
                }
            }
            let mut text = String::from("embedding,spearman_rho,degenerate,n\n");
            for (label, s) in &report {
                print_spearman(label, s);
                text.push_str(&format!("{label},{},{},{}\n", s.rho, s.degenerate, s.n));
            }
            write_text(&out_dir(g)?.join("lemma_report.csv"), &text)?;
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.code());
            info!("exiting with {:?} failure", e.kind());
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
