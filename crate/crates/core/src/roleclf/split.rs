use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row indices into the labelled set, each list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

fn split_groups(groups: Vec<Vec<usize>>, fraction: f64, seed: u64, strict: bool) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        let n = g.len();
        if n == 0 {
            continue;
        }
        g.shuffle(&mut rng);
        let k = if n < 2 {
            debug_assert!(!strict);
            0
        } else {
            ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
        };
        test.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )))
    }
}

/// Per class, `round(n_c · fraction)` items go to test, clamped so that both
/// sides keep at least one item. Every present class needs two members.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    check_fraction(test_fraction)?;
    let groups = by_class(labels);
    if let Some((c, g)) = groups.iter().enumerate().find(|(_, g)| g.len() == 1) {
        return Err(Error::ClassTooSmall(format!(
            "class {c} has {} member(s), at least 2 required",
            g.len()
        )));
    }
    Ok(split_groups(groups, test_fraction, seed, true))
}

/// Like [`stratified_split`], but singleton classes stay entirely on the
/// training side instead of failing. Used for the early-stopping carve-out.
pub fn stratified_split_lenient(labels: &[usize], fraction: f64, seed: u64) -> Result<Split> {
    check_fraction(fraction)?;
    Ok(split_groups(by_class(labels), fraction, seed, false))
}
