use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierfeat::HIER_COLUMNS;
use crate::io::NodeMatrix;

/// Which optional blocks enter the feature vector. The ball coordinates are always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub use_hier: bool,
    pub use_walk: bool,
}

impl Ablation {
    pub const FULL: Self = Self {
        use_hier: true,
        use_walk: true,
    };
    pub const BARE: Self = Self {
        use_hier: false,
        use_walk: false,
    };
    pub const ALL: [Self; 4] = [
        Self::FULL,
        Self {
            use_hier: true,
            use_walk: false,
        },
        Self {
            use_hier: false,
            use_walk: true,
        },
        Self::BARE,
    ];

    pub fn name(&self) -> String {
        let flag = |on: bool, c: char| if on { format!("w/{c}") } else { format!("w/o-{c}") };
        format!("{},{}", flag(self.use_hier, 'H'), flag(self.use_walk, 'T'))
    }
}

impl Default for Ablation {
    fn default() -> Self {
        Self::FULL
    }
}

/// Row-major feature matrix in `[z ‖ r ‖ h]` column order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub matrix: NodeMatrix,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn nodes(&self) -> &[String] {
        self.matrix.nodes()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// A table of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let nodes = rows.iter().map(|&i| self.nodes()[i].clone()).collect();
        let data = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            columns: self.columns.clone(),
            matrix: NodeMatrix::new(nodes, self.dim(), data).expect("row shape preserved"),
        }
    }
}

fn block_rows<'a>(
    name: &str,
    block: &'a NodeMatrix,
    nodes: &[String],
) -> Result<Vec<&'a [f64]>> {
    if block.nodes() == nodes {
        return Ok(block.rows().collect());
    }
    let index: HashMap<&str, usize> = block
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    nodes
        .iter()
        .map(|n| {
            index
                .get(n.as_str())
                .map(|&i| block.row(i))
                .ok_or_else(|| Error::MisalignedInputs(format!("node `{n}` missing from {name} features")))
        })
        .collect()
}

/// Concatenates the blocks selected by `ablation`, keyed on the embedding's node order.
/// Disabled blocks are dropped entirely and may be `None`.
pub fn assemble_features(
    emb: &NodeMatrix,
    walk: Option<&NodeMatrix>,
    hier: Option<&NodeMatrix>,
    ablation: Ablation,
) -> Result<FeatureTable> {
    let nodes = emb.nodes();
    let mut columns: Vec<String> = (0..emb.dim()).map(|k| format!("z_{k}")).collect();
    let mut blocks: Vec<Vec<&[f64]>> = vec![emb.rows().collect()];

    if ablation.use_walk {
        let w = walk.ok_or_else(|| Error::MisalignedInputs("walk features required but absent".into()))?;
        blocks.push(block_rows("walk", w, nodes)?);
        columns.extend((0..w.dim()).map(|k| format!("r_{k}")));
    }
    if ablation.use_hier {
        let h = hier.ok_or_else(|| Error::MisalignedInputs("hierarchical features required but absent".into()))?;
        if h.dim() != HIER_COLUMNS.len() {
            return Err(Error::MisalignedInputs(format!(
                "hierarchical features have {} columns, expected {}",
                h.dim(),
                HIER_COLUMNS.len()
            )));
        }
        blocks.push(block_rows("hierarchical", h, nodes)?);
        columns.extend(HIER_COLUMNS.iter().map(|c| format!("h_{c}")));
    }

    let dim = columns.len();
    let mut data = Vec::with_capacity(nodes.len() * dim);
    for i in 0..nodes.len() {
        for b in &blocks {
            data.extend_from_slice(b[i]);
        }
    }
    Ok(FeatureTable {
        columns,
        matrix: NodeMatrix::new(nodes.to_vec(), dim, data)?,
    })
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on all rows of `table`. Columns with zero variance keep their raw values.
    pub fn fit(table: &FeatureTable) -> Self {
        let n = table.len().max(1) as f64;
        let d = table.dim();
        let mut mean = vec![0.0; d];
        for row in table.matrix.rows() {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in table.matrix.rows() {
            for k in 0..d {
                var[k] += (row[k] - mean[k]).powi(2);
            }
        }
        let mut scale = vec![1.0; d];
        for k in 0..d {
            let sd = (var[k] / n).sqrt();
            if sd > 1e-12 * mean[k].abs().max(1.0) {
                scale[k] = sd;
            } else {
                mean[k] = 0.0;
            }
        }
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}
