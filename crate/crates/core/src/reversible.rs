//! Trailed integer array.
//!
//! Each slot is trailed at most once per level: a slot's stamp records the
//! level epoch of its last trail entry. Epochs are never reused, so a slot
//! written at a level that was since undone is trailed again when written at
//! a fresh level of the same depth.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("restore without a matching save")]
pub struct UnderflowError;

#[derive(Debug, Clone)]
pub(crate) struct RevArray {
    values: Vec<u32>,
    stamps: Vec<u64>,
    trail: Vec<(u32, u32)>,
    marks: Vec<(usize, u64)>,
    epoch: u64,
    next_epoch: u64,
}

impl RevArray {
    pub fn new(values: Vec<u32>) -> Self {
        let n = values.len();
        RevArray {
            values,
            stamps: vec![0; n],
            trail: Vec::new(),
            marks: Vec::new(),
            epoch: 0,
            next_epoch: 0,
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.values[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u32) {
        if self.values[i] == v {
            return;
        }
        // nothing to undo at the root
        if self.stamps[i] != self.epoch && !self.marks.is_empty() {
            self.trail.push((i as u32, self.values[i]));
            self.stamps[i] = self.epoch;
        }
        self.values[i] = v;
    }

    pub fn save(&mut self) {
        self.marks.push((self.trail.len(), self.epoch));
        self.next_epoch += 1;
        self.epoch = self.next_epoch;
    }

    pub fn restore(&mut self) -> Result<(), UnderflowError> {
        let (len, epoch) = self.marks.pop().ok_or(UnderflowError)?;
        for (i, v) in self.trail.drain(len..).rev() {
            self.values[i as usize] = v;
        }
        self.epoch = epoch;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.marks.len()
    }

    #[cfg(test)]
    pub fn values(&self) -> &[u32] {
        &self.values
    }
}
