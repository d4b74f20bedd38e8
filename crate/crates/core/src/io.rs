//! Node-indexed matrices and their CSV form (`node,dim_0,...,dim_{d-1}`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::txgraph::TxGraph;

/// Row-major `n × dim` matrix keyed by node address.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMatrix {
    nodes: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl NodeMatrix {
    pub fn new(nodes: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nodes.len() * dim {
            return Err(Error::MisalignedInputs(format!(
                "{} values for {} nodes of dimension {dim}",
                data.len(),
                nodes.len()
            )));
        }
        Ok(Self { nodes, dim, data })
    }

    pub fn zeros(nodes: Vec<String>, dim: usize) -> Self {
        let data = vec![0.0; nodes.len() * dim];
        Self { nodes, dim, data }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.nodes.len())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reorders rows to the graph's node order; every graph node must be present.
    pub fn align_to(&self, graph: &TxGraph) -> Result<Self> {
        let index: std::collections::HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut data = Vec::with_capacity(graph.node_count() * self.dim);
        for addr in graph.nodes() {
            let &i = index.get(addr.as_str()).ok_or_else(|| {
                Error::MisalignedInputs(format!("node `{addr}` has no row"))
            })?;
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            nodes: graph.nodes().to_vec(),
            dim: self.dim,
            data,
        })
    }

    pub fn is_aligned_with(&self, graph: &TxGraph) -> bool {
        self.nodes == graph.nodes()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("dim_{k}")).collect();
        write_node_rows(writer, &header, &self.nodes, self.rows())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
    }

    /// Reads any `node,<col>,...` CSV with numeric value columns.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("node") {
            return Err(Error::MissingColumn("node".into()));
        }
        let dim = headers.len() - 1;
        let mut nodes = Vec::new();
        let mut data = Vec::new();
        for row in rdr.records() {
            let row = row?;
            if row.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row for `{}` has {} fields, expected {}",
                    row.get(0).unwrap_or(""),
                    row.len(),
                    dim + 1
                )));
            }
            nodes.push(row[0].trim().to_string());
            for field in row.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("non-numeric value `{field}`")))?;
                data.push(v);
            }
        }
        Self::new(nodes, dim, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

/// 17 significant digits, enough to round-trip every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_node_rows<'a, W: Write>(
    writer: W,
    columns: &[String],
    nodes: &[String],
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["node".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (node, row) in nodes.iter().zip(rows) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(node.clone());
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
