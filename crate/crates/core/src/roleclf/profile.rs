//! Informational comparison of a dataset against the reference RWA profile.

use std::collections::BTreeSet;
use std::fmt;

use crate::bucketing::RoleLabel;
use crate::txgraph::{LabeledAddress, TransactionRecord};

pub const REFERENCE_TRANSACTIONS: usize = 10_055;
pub const REFERENCE_ADDRESSES: usize = 815;
/// Trader, Bot, Treasury, Other.
pub const REFERENCE_ROLE_COUNTS: [usize; 4] = [520, 33, 44, 218];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileLine {
    pub name: String,
    pub observed: usize,
    pub reference: usize,
}

impl ProfileLine {
    pub fn matches(&self) -> bool {
        self.observed == self.reference
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileReport {
    pub lines: Vec<ProfileLine>,
}

impl ProfileReport {
    pub fn is_match(&self) -> bool {
        self.lines.iter().all(ProfileLine::matches)
    }

    pub fn discrepancies(&self) -> impl Iterator<Item = &ProfileLine> {
        self.lines.iter().filter(|l| !l.matches())
    }
}

impl fmt::Display for ProfileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            let mark = if l.matches() { "ok" } else { "differs" };
            writeln!(f, "{:<14} observed {:>7}  reference {:>7}  {mark}", l.name, l.observed, l.reference)?;
        }
        if self.is_match() {
            writeln!(f, "profile match")
        } else {
            writeln!(f, "profile mismatch ({} discrepancies)", self.discrepancies().count())
        }
    }
}

/// Address count is the number of distinct endpoints across all records.
pub fn validate_dataset_profile(records: &[TransactionRecord], labels: &[LabeledAddress]) -> ProfileReport {
    let addresses: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| [r.sender.as_str(), r.recipient.as_str()])
        .collect();
    let mut roles = [0usize; 4];
    for l in labels {
        roles[l.role.index()] += 1;
    }
    let mut lines = vec![
        ProfileLine {
            name: "transactions".into(),
            observed: records.len(),
            reference: REFERENCE_TRANSACTIONS,
        },
        ProfileLine {
            name: "addresses".into(),
            observed: addresses.len(),
            reference: REFERENCE_ADDRESSES,
        },
    ];
    for r in RoleLabel::ALL {
        lines.push(ProfileLine {
            name: r.as_str().to_string(),
            observed: roles[r.index()],
            reference: REFERENCE_ROLE_COUNTS[r.index()],
        });
    }
    ProfileReport { lines }
}
