//! Height-above-ground targets: reference surface, HAG values and bins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{LabeledCloud, Point3};
use crate::error::{Error, Result};
use crate::tin::Tin;

/// Heights within this distance of the ground surface count as exactly zero.
pub const GROUND_TOLERANCE: f64 = 1e-6;

/// Bin layout for HAG classification.
///
/// Bin 0 holds HAG exactly 0. Bin `c` for `c >= 1` holds `(boundaries[c-1], boundaries[c]]`
/// and the last bin is open above. With the default layout the bins are
/// `{0}, (0, 0.2], (0.2, 0.5], (0.5, 1], (1, 3], (3, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HagBinning {
    pub boundaries: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Default for HagBinning {
    fn default() -> Self {
        Self {
            boundaries: vec![0.0, 0.2, 0.5, 1.0, 3.0],
            weights: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        }
    }
}

impl HagBinning {
    pub fn num_bins(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Layout with `bins` classes whose positive boundaries are spread over the
    /// default height range (0.2 m to 3 m) by piecewise-linear interpolation of
    /// the default boundaries; weights rise linearly from 1 to `bins`.
    /// `with_bins(6)` reproduces the default.
    pub fn with_bins(bins: usize) -> Result<Self> {
        if bins < 4 {
            return Err(Error::Config(format!("need at least 4 HAG bins, got {bins}")));
        }
        let anchors = [0.2, 0.5, 1.0, 3.0];
        let positive = bins - 2;
        let mut boundaries = vec![0.0];
        for k in 0..positive {
            let t = k as f64 / (positive - 1) as f64 * (anchors.len() - 1) as f64;
            let seg = (t.floor() as usize).min(anchors.len() - 2);
            let frac = t - seg as f64;
            boundaries.push(anchors[seg] + frac * (anchors[seg + 1] - anchors[seg]));
        }
        let weights = (1..=bins).map(|w| w as f64).collect();
        let b = Self { boundaries, weights };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.first() != Some(&0.0) {
            return Err(Error::Config("first HAG boundary must be 0".into()));
        }
        if self.boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("HAG boundaries must be strictly ascending".into()));
        }
        if self.weights.len() != self.num_bins() {
            return Err(Error::Config(format!(
                "{} HAG weights for {} bins",
                self.weights.len(),
                self.num_bins()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("HAG weights must be positive".into()));
        }
        if self.weights.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("HAG weights must be nondecreasing".into()));
        }
        Ok(())
    }

    /// Bin index of a nonnegative HAG value.
    pub fn bin_of(&self, hag: f64) -> Result<usize> {
        if !(hag >= 0.0) {
            return Err(Error::Validation(format!("negative or NaN HAG {hag}")));
        }
        if hag == 0.0 {
            return Ok(0);
        }
        Ok(self
            .boundaries
            .iter()
            .skip(1)
            .position(|&b| hag <= b)
            .map_or(self.num_bins() - 1, |c| c + 1))
    }
}

/// Free-function form of [`HagBinning::bin_of`].
pub fn bin_of(hag: f64, binning: &HagBinning) -> Result<usize> {
    binning.bin_of(hag)
}

/// Reference ground surface: a TIN over the ground-labeled points.
#[derive(Debug)]
pub struct GroundSurface {
    tin: Tin,
}

impl GroundSurface {
    pub fn from_points(ground: &[Point3]) -> Result<Self> {
        Ok(Self {
            tin: Tin::build(ground)?,
        })
    }

    pub fn tin(&self) -> &Tin {
        &self.tin
    }

    /// Surface elevation; nearest vertex elevation outside the hull.
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        self.tin.elevation(x, y)
    }
}

pub fn build_ground_surface(cloud: &LabeledCloud) -> Result<GroundSurface> {
    GroundSurface::from_points(&cloud.ground_points())
}

/// Height above the surface, clamped at 0 and snapped to 0 within [`GROUND_TOLERANCE`].
pub fn hag_of(p: &Point3, surf: &GroundSurface) -> f64 {
    let h = p.z - surf.elevation(p.x, p.y);
    if h < GROUND_TOLERANCE {
        0.0
    } else {
        h
    }
}

/// Fills the `hag_meters` and `hag_bin` channels from the cloud's own ground labels.
pub fn annotate_hag(cloud: &mut LabeledCloud, binning: &HagBinning) -> Result<()> {
    binning.validate()?;
    let surf = build_ground_surface(cloud)?;
    let hags: Vec<f64> = cloud.points.par_iter().map(|p| hag_of(p, &surf)).collect();
    let bins = hags
        .iter()
        .map(|&h| binning.bin_of(h).map(|b| b as u8))
        .collect::<Result<Vec<u8>>>()?;
    cloud.channels.hag_meters = Some(hags);
    cloud.channels.hag_bin = Some(bins);
    Ok(())
}
