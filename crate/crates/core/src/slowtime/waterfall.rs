use std::collections::VecDeque;

use super::{SlowTimeError, VibrationSpectrum};
use crate::Real;

/// Bounded history of spectrum magnitudes, oldest row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfall<T> {
    rows: VecDeque<Vec<T>>,
    capacity: usize,
}

impl<T: Real> Waterfall<T> {
    pub fn new(capacity: usize) -> Result<Self, SlowTimeError> {
        if capacity == 0 {
            return Err(SlowTimeError::ZeroCapacity);
        }
        Ok(Self { rows: VecDeque::with_capacity(capacity), capacity })
    }

    /// Append a spectrum, evicting the oldest row once full. Every row must
    /// have the same number of bins.
    pub fn push(&mut self, spectrum: &VibrationSpectrum<T>) -> Result<(), SlowTimeError> {
        self.push_row(spectrum.magnitudes())
    }

    pub fn push_row(&mut self, row: Vec<T>) -> Result<(), SlowTimeError> {
        if let Some(first) = self.rows.front() {
            if first.len() != row.len() {
                return Err(SlowTimeError::RowLength { got: row.len(), expected: first.len() });
            }
        }
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(row);
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = &Vec<T>> {
        self.rows.iter()
    }

    pub fn newest(&self) -> Option<&Vec<T>> {
        self.rows.back()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Drop all rows, e.g. after the pack size changes.
    pub fn clear(&mut self) {
        self.rows.clear();
    }
}
