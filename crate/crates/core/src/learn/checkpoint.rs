//! Versioned little-endian checkpoint for [`ToyClassifier`].
//!
//! Layout: `GFCK`, u32 version, u64 input dim, u64 hidden layer count and widths,
//! u64 bin count, binning boundaries and weights (f64), u64 feature recipe hash,
//! input shift and scale (f64 per input), then the flat parameters (f64).

use std::path::Path;

use super::mlp::{Dense, ToyClassifier};
use crate::error::{Error, Result};
use crate::hag::HagBinning;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub classifier: ToyClassifier,
    pub binning: HagBinning,
    pub recipe_hash: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.classifier;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let put_u64 = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        put_u64(&mut out, c.input_dim as u64);
        put_u64(&mut out, c.hidden.len() as u64);
        for w in c.hidden_widths() {
            put_u64(&mut out, w as u64);
        }
        put_u64(&mut out, self.binning.num_bins() as u64);
        let floats = self
            .binning
            .boundaries
            .iter()
            .chain(&self.binning.weights)
            .copied()
            .collect::<Vec<_>>();
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_u64(&mut out, self.recipe_hash);
        for v in c
            .input_shift
            .iter()
            .chain(&c.input_scale)
            .copied()
            .chain(c.flat_params())
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a classifier checkpoint".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let input_dim = r.len_field()?;
        let n_hidden = r.len_field()?;
        let widths = (0..n_hidden).map(|_| r.len_field()).collect::<Result<Vec<_>>>()?;
        let bins = r.len_field()?;
        if bins < 2 {
            return Err(Error::Format(format!("checkpoint declares {bins} HAG bins")));
        }
        let boundaries = r.f64s(bins - 1)?;
        let weights = r.f64s(bins)?;
        let binning = HagBinning { boundaries, weights };
        binning
            .validate()
            .map_err(|e| Error::Format(format!("checkpoint binning: {e}")))?;
        let recipe_hash = r.u64()?;
        let input_shift = r.f64s(input_dim)?;
        let input_scale = r.f64s(input_dim)?;

        let mut fan_in = input_dim;
        let mut hidden = Vec::with_capacity(widths.len());
        for &w in &widths {
            hidden.push(r.dense(fan_in, w)?);
            fan_in = w;
        }
        let cls_head = r.dense(fan_in, 2)?;
        let hag_head = r.dense(fan_in, bins)?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in checkpoint",
                bytes.len() - r.pos
            )));
        }
        let classifier =
            ToyClassifier::from_parts(input_dim, hidden, cls_head, hag_head, input_shift, input_scale)?;
        Ok(Self {
            classifier,
            binning,
            recipe_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A size field, bounded so corrupt files cannot request huge allocations.
    fn len_field(&mut self) -> Result<usize> {
        let v = self.u64()?;
        if v > (self.bytes.len() as u64) {
            return Err(Error::Format(format!("implausible size {v} in checkpoint")));
        }
        Ok(v as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn dense(&mut self, inputs: usize, outputs: usize) -> Result<Dense> {
        Ok(Dense {
            inputs,
            outputs,
            weights: self.f64s(inputs * outputs)?,
            bias: self.f64s(outputs)?,
        })
    }
}
