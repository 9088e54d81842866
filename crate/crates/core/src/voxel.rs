//! Sparse voxelization of patch points and voxel-to-point projection.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cloud::Point3;
use crate::error::{Error, Result};

/// Voxel edge length used for the compressed configuration.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.5;
/// Voxel edge length of the uncompressed baseline configuration.
pub const BASELINE_VOXEL_SIZE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelFeatures {
    pub count: u32,
    pub mean_z: f64,
    pub min_z: f64,
    pub max_z: f64,
}

impl VoxelFeatures {
    pub fn z_range(&self) -> f64 {
        self.max_z - self.min_z
    }
}

#[derive(Debug, Clone)]
pub struct SparseVoxelGrid {
    pub voxel_size: f64,
    /// Minimum corner of the input points snapped down to the voxel lattice.
    pub origin: Point3,
    pub cells: HashMap<VoxelKey, VoxelFeatures>,
    /// Containing voxel of every input point, in input order.
    pub point_to_voxel: Vec<VoxelKey>,
}

impl SparseVoxelGrid {
    pub fn key_of(&self, p: &Point3) -> VoxelKey {
        key_for(p, &self.origin, self.voxel_size)
    }

    pub fn features_of_point(&self, index: usize) -> &VoxelFeatures {
        &self.cells[&self.point_to_voxel[index]]
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    /// Center of a voxel in world coordinates.
    pub fn voxel_center(&self, key: &VoxelKey) -> Point3 {
        let h = self.voxel_size;
        Point3::new(
            self.origin.x + (key.i as f64 + 0.5) * h,
            self.origin.y + (key.j as f64 + 0.5) * h,
            self.origin.z + (key.k as f64 + 0.5) * h,
        )
    }

    /// Text dump `i j k count mean_z min_z max_z`, sorted by key.
    pub fn dump_text(&self) -> String {
        let mut keys: Vec<&VoxelKey> = self.cells.keys().collect();
        keys.sort();
        let mut out = format!(
            "# voxel_size {} origin {} {} {}\n",
            self.voxel_size, self.origin.x, self.origin.y, self.origin.z
        );
        for k in keys {
            let f = &self.cells[k];
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                k.i, k.j, k.k, f.count, f.mean_z, f.min_z, f.max_z
            );
        }
        out
    }
}

fn key_for(p: &Point3, origin: &Point3, size: f64) -> VoxelKey {
    VoxelKey {
        i: ((p.x - origin.x) / size).floor() as i64,
        j: ((p.y - origin.y) / size).floor() as i64,
        k: ((p.z - origin.z) / size).floor() as i64,
    }
}

pub fn voxelize(points: &[Point3], voxel_size: f64) -> Result<SparseVoxelGrid> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Config(format!("voxel size must be positive, got {voxel_size}")));
    }
    let origin = match points.first() {
        None => Point3::new(0.0, 0.0, 0.0),
        Some(first) => {
            let mut min = *first;
            for p in points {
                min.x = min.x.min(p.x);
                min.y = min.y.min(p.y);
                min.z = min.z.min(p.z);
            }
            let snap = |v: f64| (v / voxel_size).floor() * voxel_size;
            Point3::new(snap(min.x), snap(min.y), snap(min.z))
        }
    };

    struct Acc {
        count: u32,
        sum: f64,
        min: f64,
        max: f64,
    }
    let mut acc: HashMap<VoxelKey, Acc> = HashMap::new();
    let mut point_to_voxel = Vec::with_capacity(points.len());
    for p in points {
        if !p.is_finite() {
            return Err(Error::Validation("voxelize received a non-finite point".into()));
        }
        let key = key_for(p, &origin, voxel_size);
        point_to_voxel.push(key);
        let a = acc.entry(key).or_insert(Acc {
            count: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        });
        a.count += 1;
        a.sum += p.z;
        a.min = a.min.min(p.z);
        a.max = a.max.max(p.z);
    }
    let cells = acc
        .into_iter()
        .map(|(k, a)| {
            // Rounding in sum/count can step just outside [min, max].
            let mean = (a.sum / f64::from(a.count)).clamp(a.min, a.max);
            (
                k,
                VoxelFeatures {
                    count: a.count,
                    mean_z: mean,
                    min_z: a.min,
                    max_z: a.max,
                },
            )
        })
        .collect();
    Ok(SparseVoxelGrid {
        voxel_size,
        origin,
        cells,
        point_to_voxel,
    })
}

/// Containing-voxel features for every mask-true point, as `(patch-local index, features)`.
///
/// Peripheral points contribute to voxel statistics but never appear in the output.
pub fn project_to_central(
    grid: &SparseVoxelGrid,
    central_mask: &[bool],
) -> Result<Vec<(usize, VoxelFeatures)>> {
    if central_mask.len() != grid.point_to_voxel.len() {
        return Err(Error::LengthMismatch {
            expected: grid.point_to_voxel.len(),
            actual: central_mask.len(),
        });
    }
    Ok(central_mask
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(i, _)| (i, *grid.features_of_point(i)))
        .collect())
}
