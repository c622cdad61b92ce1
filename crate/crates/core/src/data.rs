//! Pairwise comparison observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One query: did `user` prefer `item_a` over `item_b`?
///
/// All indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub user: usize,
    pub item_a: usize,
    pub item_b: usize,
    /// `true` when the user preferred `item_a`.
    pub outcome: bool,
}

impl ComparisonRecord {
    pub fn new(user: usize, item_a: usize, item_b: usize, outcome: bool) -> Result<Self> {
        if item_a == item_b {
            return Err(Error::input(format!(
                "comparison must involve two distinct items, got {item_a} twice"
            )));
        }
        Ok(ComparisonRecord {
            user,
            item_a,
            item_b,
            outcome,
        })
    }

    /// The outcome as the 0/1 response `y`.
    pub fn y(&self) -> f64 {
        if self.outcome {
            1.0
        } else {
            0.0
        }
    }

    pub fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        if self.item_a == self.item_b {
            return Err(Error::input(format!(
                "comparison must involve two distinct items, got {} twice",
                self.item_a
            )));
        }
        if self.user >= d1 {
            return Err(Error::input(format!(
                "user index {} out of bounds for {d1} users",
                self.user
            )));
        }
        if self.item_a >= d2 || self.item_b >= d2 {
            return Err(Error::input(format!(
                "item indices ({}, {}) out of bounds for {d2} items",
                self.item_a, self.item_b
            )));
        }
        Ok(())
    }
}

/// An ordered sample of comparisons over a `d1 x d2` user-item grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDataset {
    d1: usize,
    d2: usize,
    records: Vec<ComparisonRecord>,
}

impl ComparisonDataset {
    pub fn new(d1: usize, d2: usize, records: Vec<ComparisonRecord>) -> Result<Self> {
        if d1 == 0 || d2 < 2 {
            return Err(Error::input(format!(
                "need at least one user and two items, got {d1}x{d2}"
            )));
        }
        for (i, rec) in records.iter().enumerate() {
            rec.validate(d1, d2)
                .map_err(|e| Error::input(format!("record {i}: {e}")))?;
        }
        Ok(ComparisonDataset { d1, d2, records })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    /// Sample size.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ComparisonRecord] {
        &self.records
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::input("dataset contains no comparisons"));
        }
        Ok(())
    }
}
