use std::io::Write;

use serde::Serialize;

use crate::bucketing::RoleLabel;
use crate::error::{Error, Result};

/// `counts[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Self {
        let mut counts = vec![vec![0; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[t][p] += 1;
        }
        Self { counts }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn support(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> usize {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Macro averages run over classes with non-zero support only. A class that
/// is never predicted has precision 0.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyTest);
    }
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| {
            let tp = cm.counts[c][c];
            let precision = ratio(tp, cm.predicted(c));
            let recall = ratio(tp, cm.support(c));
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1: f1(precision, recall),
                support: cm.support(c),
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let k = present.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / k;
    let wmean = |f: fn(&ClassMetrics) -> f64| {
        present.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let correct: usize = (0..cm.n_classes()).map(|c| cm.counts[c][c]).sum();
    Ok(Metrics {
        accuracy: correct as f64 / total as f64,
        macro_avg: Averages {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        },
        weighted_avg: Averages {
            precision: wmean(|m| m.precision),
            recall: wmean(|m| m.recall),
            f1: wmean(|m| m.f1),
        },
        per_class,
        confusion: cm.clone(),
    })
}

pub fn metrics_from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Metrics> {
    metrics_from_confusion(&ConfusionMatrix::from_predictions(truth, predicted, n_classes))
}

/// One named evaluation, written as two rows (macro and weighted).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub variant: String,
    pub metrics: Metrics,
}

pub fn write_metrics<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variant", "average", "precision", "recall", "f1", "accuracy"])?;
    for r in rows {
        for (name, avg) in [("macro", r.metrics.macro_avg), ("weighted", r.metrics.weighted_avg)] {
            w.write_record([
                r.variant.clone(),
                name.to_string(),
                format!("{:.6}", avg.precision),
                format!("{:.6}", avg.recall),
                format!("{:.6}", avg.f1),
                format!("{:.6}", r.metrics.accuracy),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Per-class rows plus the confusion matrix, one row per true class.
pub fn write_class_report<W: Write>(writer: W, metrics: &Metrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["class".to_string(), "precision".into(), "recall".into(), "f1".into(), "support".into()];
    header.extend(RoleLabel::ALL.iter().map(|r| format!("pred_{}", r.as_str())));
    w.write_record(&header)?;
    for m in &metrics.per_class {
        let name = RoleLabel::from_index(m.class).map_or_else(|| m.class.to_string(), |r| r.as_str().to_string());
        let mut rec = vec![
            name,
            format!("{:.6}", m.precision),
            format!("{:.6}", m.recall),
            format!("{:.6}", m.f1),
            m.support.to_string(),
        ];
        rec.extend(metrics.confusion.counts[m.class].iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
