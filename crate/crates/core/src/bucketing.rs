//! Substring rule engines: function name → functional bucket, name tag → role,
//! and the function × chain aggregation report.
//!
//! Rule files are plain text, one rule per line:
//!
//! ```text
//! # comment
//! bucket<TAB>pattern1,pattern2,...
//! ```
//!
//! Matching is case-insensitive substring containment. For buckets the first
//! line with any matching pattern wins, so longer patterns that collide with a
//! shorter one (`swapandstartbridge` vs `swap`) must sit on an earlier line.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txgraph::{format_timestamp, TransactionRecord};

pub const BUIDL_RULES: &str = include_str!("../rules/buidl.tsv");
pub const USDY_RULES: &str = include_str!("../rules/usdy.tsv");
pub const BENJI_RULES: &str = include_str!("../rules/benji.tsv");
pub const ROLE_RULES: &str = include_str!("../rules/roles.tsv");

pub const DEFAULT_FALLBACK_BUCKET: &str = "unknown";

fn parse_rule_lines(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (name, patterns) = line.split_once('\t').ok_or_else(|| Error::RuleSyntax {
            line: i + 1,
            msg: "expected `name<TAB>patterns`".into(),
        })?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::RuleSyntax {
                line: i + 1,
                msg: "empty rule name".into(),
            });
        }
        let patterns: Vec<String> = patterns
            .split(',')
            .map(|p| p.trim().to_lowercase())
            .collect();
        if patterns.is_empty() || patterns.iter().any(String::is_empty) {
            return Err(Error::RuleSyntax {
                line: i + 1,
                msg: format!("rule `{name}` has an empty pattern"),
            });
        }
        rules.push((name.to_string(), patterns));
    }
    Ok(rules)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketRule {
    pub bucket: String,
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketRuleSet {
    rules: Vec<BucketRule>,
    fallback: String,
}

/// A pattern that can never fire because an earlier rule catches every name containing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shadowed {
    pub bucket: String,
    pub pattern: String,
    pub by_bucket: String,
    pub by_pattern: String,
}

impl BucketRuleSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules: Vec<BucketRule> = Vec::new();
        for (bucket, patterns) in parse_rule_lines(text)? {
            if rules.iter().any(|r| r.bucket == bucket) {
                return Err(Error::RuleSyntax {
                    line: 0,
                    msg: format!("bucket `{bucket}` defined twice"),
                });
            }
            rules.push(BucketRule { bucket, patterns });
        }
        Ok(Self {
            rules,
            fallback: DEFAULT_FALLBACK_BUCKET.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// One of the shipped rule sets: `buidl`, `usdy` or `benji`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "buidl" => BUIDL_RULES,
            "usdy" => USDY_RULES,
            "benji" => BENJI_RULES,
            _ => return None,
        };
        Some(Self::parse(text).expect("shipped rule file parses"))
    }

    /// Builtin name or a path to a rule file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match Self::builtin(spec) {
            Some(r) => Ok(r),
            None => Self::from_file(Path::new(spec)),
        }
    }

    pub fn with_fallback(mut self, fallback: impl Into<String>) -> Self {
        self.fallback = fallback.into();
        self
    }

    pub fn rules(&self) -> &[BucketRule] {
        &self.rules
    }

    pub fn fallback(&self) -> &str {
        &self.fallback
    }

    pub fn assign(&self, function_name: &str) -> &str {
        let name = function_name.to_lowercase();
        self.rules
            .iter()
            .find(|r| r.patterns.iter().any(|p| name.contains(p.as_str())))
            .map_or(self.fallback.as_str(), |r| r.bucket.as_str())
    }

    pub fn shadowed_patterns(&self) -> Vec<Shadowed> {
        let mut out = Vec::new();
        for (i, rule) in self.rules.iter().enumerate() {
            for pattern in &rule.patterns {
                let hit = self.rules[..i].iter().find_map(|earlier| {
                    earlier
                        .patterns
                        .iter()
                        .find(|q| pattern.contains(q.as_str()))
                        .map(|q| (earlier.bucket.clone(), q.clone()))
                });
                if let Some((by_bucket, by_pattern)) = hit {
                    out.push(Shadowed {
                        bucket: rule.bucket.clone(),
                        pattern: pattern.clone(),
                        by_bucket,
                        by_pattern,
                    });
                }
            }
        }
        out
    }
}

pub fn assign_bucket<'a>(function_name: &str, rules: &'a BucketRuleSet) -> &'a str {
    rules.assign(function_name)
}

/// Coarse economic role of an address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoleLabel {
    Trader,
    Bot,
    Treasury,
    Other,
}

impl RoleLabel {
    /// Class-index order used by models and prediction files.
    pub const ALL: [RoleLabel; 4] = [
        RoleLabel::Trader,
        RoleLabel::Bot,
        RoleLabel::Treasury,
        RoleLabel::Other,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoleLabel::Trader => "Trader",
            RoleLabel::Bot => "Bot",
            RoleLabel::Treasury => "Treasury",
            RoleLabel::Other => "Other",
        }
    }

    fn priority(self) -> u8 {
        match self {
            RoleLabel::Bot => 0,
            RoleLabel::Treasury => 1,
            RoleLabel::Trader => 2,
            RoleLabel::Other => 3,
        }
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trader" => Ok(RoleLabel::Trader),
            "bot" => Ok(RoleLabel::Bot),
            "treasury" => Ok(RoleLabel::Treasury),
            "other" => Ok(RoleLabel::Other),
            other => Err(Error::Parse(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleRuleSet {
    rules: Vec<(RoleLabel, Vec<String>)>,
}

impl Default for RoleRuleSet {
    fn default() -> Self {
        Self::parse(ROLE_RULES).expect("shipped role rules parse")
    }
}

impl RoleRuleSet {
    /// Rules are reordered to Bot, Treasury, Trader regardless of file order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules: Vec<(RoleLabel, Vec<String>)> = Vec::new();
        for (name, patterns) in parse_rule_lines(text)? {
            let role: RoleLabel = name.parse()?;
            if role == RoleLabel::Other {
                return Err(Error::RuleSyntax {
                    line: 0,
                    msg: "Other is the fallback and takes no patterns".into(),
                });
            }
            match rules.iter_mut().find(|(r, _)| *r == role) {
                Some((_, existing)) => existing.extend(patterns),
                None => rules.push((role, patterns)),
            }
        }
        rules.sort_by_key(|(r, _)| r.priority());
        Ok(Self { rules })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// `default` or a path to a rule file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if spec.eq_ignore_ascii_case("default") {
            Ok(Self::default())
        } else {
            Self::from_file(Path::new(spec))
        }
    }

    pub fn rules(&self) -> &[(RoleLabel, Vec<String>)] {
        &self.rules
    }

    pub fn assign(&self, name_tag: &str) -> RoleLabel {
        let tag = name_tag.to_lowercase();
        self.rules
            .iter()
            .find(|(_, pats)| pats.iter().any(|p| tag.contains(p.as_str())))
            .map_or(RoleLabel::Other, |(r, _)| *r)
    }
}

pub fn assign_role(name_tag: &str, rules: &RoleRuleSet) -> RoleLabel {
    rules.assign(name_tag)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionChainRow {
    pub bucket: String,
    pub chain: String,
    pub tx_count: usize,
    pub total_value: f64,
    pub first_seen: i64,
    pub last_seen: i64,
}

/// One row per (bucket, chain), sorted by bucket then chain.
pub fn function_chain_report(
    records: &[TransactionRecord],
    rules: &BucketRuleSet,
) -> Vec<FunctionChainRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<&TransactionRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((rules.assign(&r.function_name), r.chain.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((bucket, chain), mut rows)| {
            // Sum in a record-order-independent sequence.
            rows.sort_by(|a, b| a.value.total_cmp(&b.value));
            FunctionChainRow {
                bucket: bucket.to_string(),
                chain: chain.to_string(),
                tx_count: rows.len(),
                total_value: rows.iter().map(|r| r.value).sum(),
                first_seen: rows.iter().map(|r| r.timestamp).min().unwrap_or(0),
                last_seen: rows.iter().map(|r| r.timestamp).max().unwrap_or(0),
            }
        })
        .collect()
}

pub fn write_report<W: Write>(writer: W, rows: &[FunctionChainRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "bucket",
        "chain",
        "tx_count",
        "total_value",
        "first_seen",
        "last_seen",
    ])?;
    for r in rows {
        w.write_record([
            r.bucket.as_str(),
            &r.chain,
            &r.tx_count.to_string(),
            &r.total_value.to_string(),
            &format_timestamp(r.first_seen),
            &format_timestamp(r.last_seen),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Records with their bucket appended, for the `bucket` subcommand.
pub fn write_bucketed<W: Write>(
    writer: W,
    records: &[TransactionRecord],
    rules: &BucketRuleSet,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "chain",
        "token",
        "tx_id",
        "timestamp",
        "from",
        "to",
        "value",
        "function_name",
        "bucket",
    ])?;
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
            rules.assign(&r.function_name),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
