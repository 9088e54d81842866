//! Losses, the toy multi-task classifier and its trainer.

pub mod checkpoint;
pub mod loss;
pub mod mlp;
pub mod train;

pub use loss::{
    cls_loss, hag_loss, total_loss, HagLossKind, LossConfig, LossEval, OneHotTarget, ProbVector,
};
pub use mlp::{Gradients, LossBreakdown, ToyClassifier, GROUND_CLASS, NON_GROUND_CLASS};
pub use train::{train_toy, EpochStats, StepRule, TrainConfig, TrainReport};

use crate::error::{Error, Result};

/// Dense row-major feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(dim);
        for r in rows {
            m.push(r)?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn extend(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.dim != self.dim && other.rows() > 0 {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut m = Self::new(self.dim);
        for &i in indices {
            m.data.extend_from_slice(self.row(i));
        }
        m
    }
}

/// Training samples: features with a class target (0 non-ground, 1 ground) and a HAG bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub classes: Vec<usize>,
    pub bins: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            features: FeatureMatrix::new(dim),
            classes: Vec::new(),
            bins: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn push(&mut self, row: &[f64], class: usize, bin: usize) -> Result<()> {
        self.features.push(row)?;
        self.classes.push(class);
        self.bins.push(bin);
        Ok(())
    }

    pub fn append(&mut self, other: &Dataset) -> Result<()> {
        self.features.extend(&other.features)?;
        self.classes.extend_from_slice(&other.classes);
        self.bins.extend_from_slice(&other.bins);
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(indices),
            classes: indices.iter().map(|&i| self.classes[i]).collect(),
            bins: indices.iter().map(|&i| self.bins[i]).collect(),
        }
    }
}
