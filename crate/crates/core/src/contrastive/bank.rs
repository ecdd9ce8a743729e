use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BankEntry {
    pub z: Vec<f64>,
    /// Index of the account in the training set.
    pub account: usize,
    pub counter: u64,
}

/// Bounded first-in first-out store of projected representations.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank {
    capacity: usize,
    entries: VecDeque<BankEntry>,
    next_counter: u64,
}

impl MemoryBank {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("memory bank capacity must be positive"));
        }
        Ok(MemoryBank {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            next_counter: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &BankEntry {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.iter()
    }

    /// Appends a batch of `(z, account)` pairs, first evicting the
    /// `len + batch - capacity` oldest entries when the batch would overflow.
    pub fn update(&mut self, batch: impl IntoIterator<Item = (Vec<f64>, usize)>) {
        for (z, account) in batch {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(BankEntry {
                z,
                account,
                counter: self.next_counter,
            });
            self.next_counter += 1;
        }
    }
}
