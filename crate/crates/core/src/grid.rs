use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform wavenumber grid `min, min + dk, ..., max` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl KGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let grid = Self { min, max, count };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "k-grid must be strictly positive, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count == 0 || (self.count > 1 && self.max <= self.min) {
            return Err(Error::InvalidConfig(format!(
                "k-grid needs count >= 1 and max > min, got ({}, {}, {})",
                self.min, self.max, self.count
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max.max(self.min)
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// Uniform position grid on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl XGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo || count < 5 {
            return Err(Error::InvalidConfig(format!(
                "x-grid needs hi > lo and at least 5 points, got ({lo}, {hi}, {count})"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    /// Grid on `[lo, hi]` with spacing as close as possible to `step`.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let cells = ((hi - lo) / step).round().max(4.0) as usize;
        Self::new(lo, hi, cells + 1)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + i as f64 * h
                }
            })
            .collect()
    }
}
