//! Overlapping cylindrical tiling with central-region index masks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{horizontal_distance, Bounds2, LabeledCloud};
use crate::error::{Error, Result};
use crate::index::GridIndex2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionConfig {
    /// Radius of each cylindrical patch, meters.
    pub outer_radius: f64,
    /// Spacing of the patch-center grid, meters.
    pub step: f64,
    /// Radius of the central (classified) region, meters.
    pub inner_radius: f64,
    /// Fail instead of warn when the central disks cannot cover the plane.
    pub strict_coverage: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            outer_radius: 150.0,
            step: 50.0,
            inner_radius: 25.0 * std::f64::consts::SQRT_2,
            strict_coverage: false,
        }
    }
}

impl PartitionConfig {
    /// Smallest inner radius for which central disks on the center grid cover the plane.
    pub fn min_covering_inner_radius(&self) -> f64 {
        self.step * std::f64::consts::SQRT_2 / 2.0
    }

    pub fn covers(&self) -> bool {
        self.inner_radius >= self.min_covering_inner_radius()
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.outer_radius, self.step, self.inner_radius]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("partition radii and step must be finite".into()));
        }
        if !(self.inner_radius > 0.0 && self.inner_radius < self.outer_radius) {
            return Err(Error::Config(format!(
                "partition needs 0 < inner_radius ({}) < outer_radius ({})",
                self.inner_radius, self.outer_radius
            )));
        }
        if self.step <= 0.0 {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !self.covers() {
            let msg = format!(
                "inner_radius {} is below step*sqrt(2)/2 = {}; some points may never be central",
                self.inner_radius,
                self.min_covering_inner_radius()
            );
            if self.strict_coverage {
                return Err(Error::Config(msg));
            }
            log::warn!("{msg}");
        }
        Ok(())
    }
}

/// One cylindrical tile of the source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub center: (f64, f64),
    /// Source-cloud indices of points within the outer radius, ascending.
    pub member_indices: Vec<usize>,
    /// Per member: horizontal distance to center `<=` inner radius.
    pub central_mask: Vec<bool>,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    /// Source-cloud indices of the central members.
    pub fn central_indices(&self) -> Vec<usize> {
        self.member_indices
            .iter()
            .zip(&self.central_mask)
            .filter(|(_, &c)| c)
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn central_count(&self) -> usize {
        self.central_mask.iter().filter(|&&c| c).count()
    }
}

/// Regular grid of patch centers anchored at the bounds minimum.
///
/// Each axis holds `ceil(extent / step) + 1` centers so the last center sits at
/// or past the maximum. Ordering is x-major: all y for the first x, then the next x.
pub fn make_centers(bounds: &Bounds2, cfg: &PartitionConfig) -> Vec<(f64, f64)> {
    let count = |extent: f64| (extent / cfg.step).ceil().max(0.0) as usize + 1;
    let nx = count(bounds.width());
    let ny = count(bounds.height());
    let mut centers = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            centers.push((
                bounds.min_x + ix as f64 * cfg.step,
                bounds.min_y + iy as f64 * cfg.step,
            ));
        }
    }
    centers
}

pub fn partition(cloud: &LabeledCloud, cfg: &PartitionConfig) -> Result<Vec<Patch>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::Validation("cannot partition an empty cloud".into()));
    }
    let bounds = cloud.bounds()?;
    let centers = make_centers(&bounds, cfg);
    let index = GridIndex2::build(&cloud.points, cfg.step);

    let patches: Vec<(usize, (f64, f64), Vec<usize>, Vec<bool>)> = centers
        .par_iter()
        .enumerate()
        .map(|(ci, &center)| {
            let members = index.within(&cloud.points, center, cfg.outer_radius);
            let mask = members
                .iter()
                .map(|&i| horizontal_distance(&cloud.points[i], center) <= cfg.inner_radius)
                .collect();
            (ci, center, members, mask)
        })
        .collect();

    Ok(patches
        .into_iter()
        .filter(|(_, _, m, _)| !m.is_empty())
        .enumerate()
        .map(|(id, (_, center, member_indices, central_mask))| Patch {
            id,
            center,
            member_indices,
            central_mask,
        })
        .collect())
}
