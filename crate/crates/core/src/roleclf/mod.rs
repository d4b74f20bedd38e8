//! Role classification over concatenated ball, walk, and radius features.

mod features;
mod metrics;
mod mlp;
mod profile;
mod split;

use std::io::Write;

pub use features::{assemble_features, Ablation, FeatureTable, Standardizer};
pub use metrics::{
    metrics_from_confusion, metrics_from_predictions, write_class_report, write_metrics, Averages, ClassMetrics,
    ConfusionMatrix, Metrics, MetricsRow,
};
pub use mlp::{
    argmax, cross_entropy, softmax, train_classifier, ClassifierConfig, ClassifierEpoch, Mlp, RoleModel,
    TrainedClassifier, N_CLASSES,
};
pub use profile::{
    validate_dataset_profile, ProfileLine, ProfileReport, REFERENCE_ADDRESSES, REFERENCE_ROLE_COUNTS,
    REFERENCE_TRANSACTIONS,
};
pub use split::{stratified_split, stratified_split_lenient, Split};

use crate::bucketing::RoleLabel;
use crate::error::{Error, Result};

pub fn evaluate(model: &RoleModel, table: &FeatureTable, labels: &[usize]) -> Result<Metrics> {
    if table.is_empty() {
        return Err(Error::EmptyTest);
    }
    let pred = model.predict(table)?;
    metrics_from_predictions(labels, &pred, N_CLASSES)
}

/// Most frequent training class, ties to the lower class id.
pub fn majority_class(train_labels: &[usize]) -> usize {
    let mut counts = [0usize; N_CLASSES];
    train_labels.iter().for_each(|&y| counts[y] += 1);
    let mut best = 0;
    for c in 1..N_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

pub fn write_predictions<W: Write>(writer: W, nodes: &[String], proba: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["node".to_string(), "predicted_role".into()];
    header.extend(RoleLabel::ALL.iter().map(|r| format!("prob_{}", r.as_str())));
    w.write_record(&header)?;
    for (node, p) in nodes.iter().zip(proba) {
        let role = RoleLabel::from_index(argmax(p)).expect("class index within range");
        let mut rec = vec![node.clone(), role.as_str().to_string()];
        rec.extend(p.iter().map(|x| format!("{x:.6}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
