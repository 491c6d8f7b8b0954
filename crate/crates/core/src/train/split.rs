use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// `(train, val, test)`.
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            ratios: (train, val, test),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.ratios;
        if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios ({a}, {b}, {c}) must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: (0.6, 0.2, 0.2),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(Error::invalid(format!("unknown partition '{other}'"))),
        }
    }
}

impl Split {
    pub fn get(&self, p: Partition) -> &[usize] {
        match p {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }

    /// Partition of every index `0..n`.
    pub fn assignment(&self, n: usize) -> Vec<Partition> {
        let mut out = vec![Partition::Train; n];
        for &i in &self.val {
            out[i] = Partition::Val;
        }
        for &i in &self.test {
            out[i] = Partition::Test;
        }
        out
    }
}

/// Seeded shuffle of groups, then a contiguous cut: test first, then
/// validation, the remainder to training.
///
/// Target sizes are `⌊n·r_test⌋` and `⌊n·r_val⌋` samples. With
/// `group_keys`, whole groups are assigned, so a group straddling a
/// boundary lands entirely in the earlier partition. Index lists are sorted.
pub fn split_dataset(n: usize, group_keys: Option<&[String]>, spec: &SplitSpec) -> Result<Split> {
    if n == 0 {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    spec.validate()?;
    let groups: Vec<Vec<usize>> = match group_keys {
        None => (0..n).map(|i| vec![i]).collect(),
        Some(keys) => {
            if keys.len() != n {
                return Err(Error::shape(format!("{} group keys for {n} samples", keys.len())));
            }
            let mut order: Vec<Vec<usize>> = Vec::new();
            let mut slot: HashMap<&str, usize> = HashMap::new();
            for (i, k) in keys.iter().enumerate() {
                let g = *slot.entry(k.as_str()).or_insert_with(|| {
                    order.push(Vec::new());
                    order.len() - 1
                });
                order[g].push(i);
            }
            order
        }
    };
    let mut perm: Vec<usize> = (0..groups.len()).collect();
    Rng::new(spec.seed).shuffle(&mut perm);

    let target = |r: f64| (n as f64 * r + 1e-9).floor() as usize;
    let (test_target, val_target) = (target(spec.ratios.2), target(spec.ratios.1));
    let mut split = Split::default();
    for g in perm {
        let members = &groups[g];
        let dst = if split.test.len() < test_target {
            &mut split.test
        } else if split.val.len() < val_target {
            &mut split.val
        } else {
            &mut split.train
        };
        dst.extend_from_slice(members);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
