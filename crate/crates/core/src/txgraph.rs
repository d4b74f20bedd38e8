//! Transaction ingestion, the address graph, and label files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::bucketing::{RoleRuleSet, RoleLabel};
use crate::error::{Error, Result};

/// One decoded on-chain transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub chain: String,
    pub token: String,
    pub tx_id: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub sender: String,
    pub recipient: String,
    pub value: f64,
    pub function_name: String,
}

/// Column names of the transaction CSV. Every field must be present in the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub chain: String,
    pub token: String,
    pub tx_id: String,
    pub timestamp: String,
    pub from: String,
    pub to: String,
    pub value: String,
    pub function_name: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            chain: "chain".into(),
            token: "token".into(),
            tx_id: "tx_id".into(),
            timestamp: "timestamp".into(),
            from: "from".into(),
            to: "to".into(),
            value: "value".into(),
            function_name: "function_name".into(),
        }
    }
}

impl ColumnSchema {
    fn names(&self) -> [&str; 8] {
        [
            &self.chain,
            &self.token,
            &self.tx_id,
            &self.timestamp,
            &self.from,
            &self.to,
            &self.value,
            &self.function_name,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub records: Vec<TransactionRecord>,
    /// Rows dropped for an unparseable value, timestamp or empty address.
    pub skipped: usize,
}

/// EVM hex addresses are case-insensitive; fold them so checksummed and
/// lowercase spellings meet. Other address formats are kept verbatim.
pub fn normalize_address(raw: &str) -> String {
    let a = raw.trim();
    if a.len() > 2 && (a.starts_with("0x") || a.starts_with("0X")) {
        a.to_ascii_lowercase()
    } else {
        a.to_string()
    }
}

/// Accepts integer epoch seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` or a bare date (UTC).
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| ts.to_string())
}

fn parse_value(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

pub fn ingest_transactions(path: &Path, schema: &ColumnSchema) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ingested = ingest_reader(file, schema)?;
    if ingested.records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if ingested.skipped > 0 {
        warn!(
            "{}: skipped {} unparseable rows",
            path.display(),
            ingested.skipped
        );
    }
    Ok(ingested)
}

/// Reader form of [`ingest_transactions`]; an empty result is not an error here.
pub fn ingest_reader<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(schema.names()) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let [c_chain, c_token, c_tx, c_ts, c_from, c_to, c_value, c_fn] = idx;

    let mut records = Vec::new();
    let mut skipped = 0;
    for row in rdr.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let (Some(timestamp), Some(value)) = (parse_timestamp(get(c_ts)), parse_value(get(c_value)))
        else {
            skipped += 1;
            continue;
        };
        let sender = normalize_address(get(c_from));
        let recipient = normalize_address(get(c_to));
        if sender.is_empty() || recipient.is_empty() {
            skipped += 1;
            continue;
        }
        records.push(TransactionRecord {
            chain: get(c_chain).trim().to_string(),
            token: get(c_token).trim().to_string(),
            tx_id: get(c_tx).trim().to_string(),
            timestamp,
            sender,
            recipient,
            value,
            function_name: get(c_fn).trim().to_string(),
        });
    }
    Ok(Ingested { records, skipped })
}

/// Writes records in the default schema.
pub fn write_transactions<W: Write>(writer: W, records: &[TransactionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ColumnSchema::default().names())?;
    for r in records {
        w.write_record([
            r.chain.as_str(),
            &r.token,
            &r.tx_id,
            &r.timestamp.to_string(),
            &r.sender,
            &r.recipient,
            &r.value.to_string(),
            &r.function_name,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub value: f64,
    pub timestamp: i64,
}

/// Directed multigraph over addresses plus its simple-graph views.
///
/// Node ids follow lexicographic address order, so the graph does not depend
/// on the order records arrive in. Self-transfers are kept in `multi_edges`
/// (and therefore as simple edges) but never appear in neighbourhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct TxGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    multi_edges: BTreeMap<(usize, usize), Vec<Transfer>>,
    simple_edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    span: (i64, i64),
}

impl TxGraph {
    pub fn build(records: &[TransactionRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("no transaction records"));
        }
        let addresses: BTreeSet<&str> = records
            .iter()
            .flat_map(|r| [r.sender.as_str(), r.recipient.as_str()])
            .collect();
        let nodes: Vec<String> = addresses.into_iter().map(str::to_string).collect();
        let index: HashMap<String, usize> =
            nodes.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();

        let mut multi_edges: BTreeMap<(usize, usize), Vec<Transfer>> = BTreeMap::new();
        let mut span = (i64::MAX, i64::MIN);
        for r in records {
            let key = (index[&r.sender], index[&r.recipient]);
            multi_edges.entry(key).or_default().push(Transfer {
                value: r.value,
                timestamp: r.timestamp,
            });
            span.0 = span.0.min(r.timestamp);
            span.1 = span.1.max(r.timestamp);
        }
        for list in multi_edges.values_mut() {
            list.sort_by(|a, b| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then(a.value.total_cmp(&b.value))
            });
        }

        let n = nodes.len();
        let simple_edges: Vec<(usize, usize)> = multi_edges.keys().copied().collect();
        let mut neighbor_sets = vec![BTreeSet::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (e, &(u, v)) in simple_edges.iter().enumerate() {
            out_edges[u].push(e);
            in_edges[v].push(e);
            if u != v {
                neighbor_sets[u].insert(v);
                neighbor_sets[v].insert(u);
            }
        }
        let neighbors = neighbor_sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();

        Ok(Self {
            nodes,
            index,
            multi_edges,
            simple_edges,
            neighbors,
            out_edges,
            in_edges,
            span,
        })
    }

    /// A graph over explicit nodes and unit-value directed edges, for synthetic structures.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let records: Vec<TransactionRecord> = edges
            .iter()
            .map(|&(u, v)| TransactionRecord {
                chain: String::new(),
                token: String::new(),
                tx_id: String::new(),
                timestamp: 0,
                sender: nodes[u].clone(),
                recipient: nodes[v].clone(),
                value: 1.0,
                function_name: String::new(),
            })
            .collect();
        let g = Self::build(&records)?;
        if g.node_count() != nodes.len() {
            return Err(Error::DegenerateGraph(
                "every node needs at least one incident edge".into(),
            ));
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn address(&self, id: usize) -> &str {
        &self.nodes[id]
    }

    pub fn id_of(&self, address: &str) -> Option<usize> {
        self.index.get(address).copied()
    }

    /// Distinct directed (sender, recipient) pairs, sorted; includes self-loops.
    pub fn simple_edges(&self) -> &[(usize, usize)] {
        &self.simple_edges
    }

    pub fn multi_edges(&self) -> &BTreeMap<(usize, usize), Vec<Transfer>> {
        &self.multi_edges
    }

    pub fn transfers(&self, u: usize, v: usize) -> &[Transfer] {
        self.multi_edges
            .get(&(u, v))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Simple edges that are not self-loops.
    pub fn proper_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.simple_edges.iter().copied().filter(|&(u, v)| u != v)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Indices into [`Self::simple_edges`] leaving `v`.
    pub fn out_edge_ids(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edge_ids(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    /// First and last observed timestamp.
    pub fn time_span(&self) -> (i64, i64) {
        self.span
    }

    pub fn transfer_count(&self) -> usize {
        self.multi_edges.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenChainSummary {
    pub token: String,
    pub chain: String,
    pub transactions: usize,
    pub addresses: usize,
    pub first_timestamp: i64,
    pub last_timestamp: i64,
}

/// Per-(token, chain) counts; addresses are senders ∪ recipients.
pub fn summarize(records: &[TransactionRecord]) -> Vec<TokenChainSummary> {
    struct Acc<'a> {
        count: usize,
        addrs: BTreeSet<&'a str>,
        first: i64,
        last: i64,
    }
    let mut groups: BTreeMap<(&str, &str), Acc> = BTreeMap::new();
    for r in records {
        let acc = groups
            .entry((r.token.as_str(), r.chain.as_str()))
            .or_insert_with(|| Acc {
                count: 0,
                addrs: BTreeSet::new(),
                first: i64::MAX,
                last: i64::MIN,
            });
        acc.count += 1;
        acc.addrs.insert(&r.sender);
        acc.addrs.insert(&r.recipient);
        acc.first = acc.first.min(r.timestamp);
        acc.last = acc.last.max(r.timestamp);
    }
    groups
        .into_iter()
        .map(|((token, chain), acc)| TokenChainSummary {
            token: token.to_string(),
            chain: chain.to_string(),
            transactions: acc.count,
            addresses: acc.addrs.len(),
            first_timestamp: acc.first,
            last_timestamp: acc.last,
        })
        .collect()
}

pub fn write_summary<W: Write>(writer: W, summary: &[TokenChainSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["token", "chain", "transactions", "addresses", "start", "end"])?;
    for s in summary {
        w.write_record([
            s.token.as_str(),
            &s.chain,
            &s.transactions.to_string(),
            &s.addresses.to_string(),
            &format_timestamp(s.first_timestamp),
            &format_timestamp(s.last_timestamp),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledAddress {
    pub address: String,
    pub role: RoleLabel,
    pub source_name_tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub labels: Vec<LabeledAddress>,
    pub duplicates: usize,
}

impl LabelSet {
    pub fn role_of(&self) -> HashMap<&str, RoleLabel> {
        self.labels
            .iter()
            .map(|l| (l.address.as_str(), l.role))
            .collect()
    }

    /// Count per role in [`RoleLabel::ALL`] order.
    pub fn role_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for l in &self.labels {
            counts[l.role.index()] += 1;
        }
        counts
    }
}

pub fn load_labels(path: &Path, rules: &RoleRuleSet) -> Result<LabelSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let set = load_labels_reader(file, rules)?;
    if set.duplicates > 0 {
        warn!(
            "{}: {} duplicate addresses ignored",
            path.display(),
            set.duplicates
        );
    }
    Ok(set)
}

/// Reads either name tags (`address,name`, roles assigned by `rules`) or
/// already-labelled rows (`address,role[,source_name_tag]`). The first
/// occurrence of an address wins.
pub fn load_labels_reader<R: Read>(reader: R, rules: &RoleRuleSet) -> Result<LabelSet> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let c_addr = find("address").ok_or_else(|| Error::MissingColumn("address".into()))?;
    let c_role = find("role");
    let c_name = match (find("name"), find("source_name_tag"), c_role) {
        (Some(c), _, _) | (None, Some(c), Some(_)) => Some(c),
        (None, _, Some(_)) => None,
        (None, _, None) => return Err(Error::MissingColumn("name".into())),
    };
    let mut seen = BTreeSet::new();
    let mut labels = Vec::new();
    let mut duplicates = 0;
    for row in rdr.records() {
        let row = row?;
        let address = normalize_address(row.get(c_addr).unwrap_or(""));
        if address.is_empty() {
            continue;
        }
        if !seen.insert(address.clone()) {
            duplicates += 1;
            continue;
        }
        let name = c_name.and_then(|c| row.get(c)).unwrap_or("").trim().to_string();
        let role = match c_role {
            Some(c) => row.get(c).unwrap_or("").trim().parse()?,
            None => rules.assign(&name),
        };
        labels.push(LabeledAddress {
            address,
            role,
            source_name_tag: name,
        });
    }
    Ok(LabelSet { labels, duplicates })
}

pub fn write_labels<W: Write>(writer: W, labels: &[LabeledAddress]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["address", "role", "source_name_tag"])?;
    for l in labels {
        w.write_record([l.address.as_str(), l.role.as_str(), &l.source_name_tag])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes `address,name` rows that [`load_labels`] reads back through the role rules.
pub fn write_name_tags<W: Write>(writer: W, labels: &[LabeledAddress]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["address", "name"])?;
    for l in labels {
        w.write_record([l.address.as_str(), &l.source_name_tag])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(from: &str, to: &str, value: f64, ts: i64) -> TransactionRecord {
        TransactionRecord {
            chain: "Ethereum".into(),
            token: "USDY".into(),
            tx_id: format!("{from}-{to}-{ts}"),
            timestamp: ts,
            sender: from.into(),
            recipient: to.into(),
            value,
            function_name: "transfer".into(),
        }
    }

    const HEADER: &str = "chain,token,tx_id,timestamp,from,to,value,function_name\n";

    #[test]
    fn ingest_single_row() {
        let csv = format!("{HEADER}Ethereum,USDY,0x1,1700000000,0xA,0xB,12.5,transfer\n");
        let out = ingest_reader(csv.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped, 0);
        assert_eq!(out.records[0].sender, "0xa");
        assert_eq!(out.records[0].value, 12.5);
    }

    #[test]
    fn ingest_skips_bad_value() {
        let csv = format!(
            "{HEADER}Ethereum,USDY,0x1,1700000000,0xA,0xB,12.5,transfer\n\
             Ethereum,USDY,0x2,1700000001,0xA,0xB,abc,transfer\n"
        );
        let out = ingest_reader(csv.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!((out.records.len(), out.skipped), (1, 1));
    }

    #[test]
    fn ingest_skips_missing_timestamp_and_negative_value() {
        let csv = format!(
            "{HEADER}Ethereum,USDY,0x1,,0xA,0xB,1,transfer\n\
             Ethereum,USDY,0x2,1700000001,0xA,0xB,-4,transfer\n\
             Ethereum,USDY,0x3,2024-03-04 10:00:00,0xA,,4,transfer\n"
        );
        let out = ingest_reader(csv.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!((out.records.len(), out.skipped), (0, 3));
    }

    #[test]
    fn ingest_missing_column() {
        let csv = "chain,token,tx_id,timestamp,from,value,function_name\n";
        let err = ingest_reader(csv.as_bytes(), &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "to"));
    }

    #[test]
    fn ingest_with_renamed_columns_and_quotes() {
        let csv = "network,asset,hash,block_time,sender,receiver,amount,method\n\
                   Arbitrum,BENJI,h1,2024-11-20T10:00:00Z,0xAA,0xBB,\"1000.5\",\"signedDataExecution\"\n";
        let schema = ColumnSchema {
            chain: "network".into(),
            token: "asset".into(),
            tx_id: "hash".into(),
            timestamp: "block_time".into(),
            from: "sender".into(),
            to: "receiver".into(),
            value: "amount".into(),
            function_name: "method".into(),
        };
        let out = ingest_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(out.records[0].timestamp, 1_732_096_800);
        assert_eq!(out.records[0].function_name, "signedDataExecution");
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, HEADER).unwrap();
        assert!(matches!(
            ingest_transactions(&p, &ColumnSchema::default()),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("0"), Some(0));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400));
        assert_eq!(parse_timestamp("1970-01-01 00:01:00"), Some(60));
        assert_eq!(parse_timestamp("1970-01-01T00:00:10+00:00"), Some(10));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn parallel_transfers_collapse_to_one_simple_edge() {
        let g = TxGraph::build(&[rec("A", "B", 1.0, 3), rec("A", "B", 2.0, 1), rec("A", "B", 3.0, 2)])
            .unwrap();
        assert_eq!(g.simple_edges(), &[(0, 1)]);
        let ts: Vec<i64> = g.transfers(0, 1).iter().map(|t| t.timestamp).collect();
        assert_eq!(ts, vec![1, 2, 3]);
        assert_eq!((g.degree(0), g.degree(1)), (1, 1));
    }

    #[test]
    fn reciprocal_edges_count_one_neighbour() {
        let g = TxGraph::build(&[rec("A", "B", 1.0, 1), rec("B", "A", 1.0, 2)]).unwrap();
        assert_eq!(g.simple_edges().len(), 2);
        assert_eq!((g.degree(0), g.degree(1)), (1, 1));
    }

    #[test]
    fn self_loops_are_kept_but_not_neighbours() {
        let g = TxGraph::build(&[rec("A", "A", 1.0, 1)]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.degree(0), 0);
        assert_eq!(g.simple_edges(), &[(0, 0)]);
        assert_eq!(g.proper_edges().count(), 0);
        assert!(TxGraph::build(&[]).is_err());
    }

    #[test]
    fn summary_counts() {
        assert!(summarize(&[]).is_empty());
        let s = summarize(&[rec("A", "B", 1.0, 5), rec("A", "C", 2.0, 9)]);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].transactions, s[0].addresses), (2, 3));
        assert_eq!((s[0].first_timestamp, s[0].last_timestamp), (5, 9));
    }

    #[test]
    fn labels_resolve_roles_and_duplicates() {
        let rules = RoleRuleSet::default();
        let csv = "address,name\n0xabc,Gnosis Safe owner\n0xdef,weather station\n0xABC,MEV bot\n";
        let set = load_labels_reader(csv.as_bytes(), &rules).unwrap();
        assert_eq!(set.labels.len(), 2);
        assert_eq!(set.duplicates, 1);
        assert_eq!(set.labels[0].role, RoleLabel::Treasury);
        assert_eq!(set.labels[1].role, RoleLabel::Other);
        let err = load_labels_reader("addr,name\n".as_bytes(), &rules).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }
}
