//! Per-point classifier features for the central points of a compressed patch.
//!
//! For every voxel size in the recipe: `z - voxel min_z`, `ln(1 + voxel count)` and the
//! voxel z range. Then `z - patch min z`, `ln(1 + neighbours within neighbor_radius)`
//! and, for every context size `s`, `z - min z` over the square `s x s` column
//! window around the point, measured in compressed coordinates so peripheral
//! context reaches further than its compressed footprint suggests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compress::CompressedPatch;
use crate::error::{Error, Result};
use crate::index::GridIndex2;
use crate::learn::FeatureMatrix;
use crate::voxel::{project_to_central, voxelize, DEFAULT_VOXEL_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureRecipe {
    pub voxel_sizes: Vec<f64>,
    pub neighbor_radius: f64,
    /// Edge length of the column raster used by the context windows.
    pub column_cell: f64,
    pub context_sizes: Vec<f64>,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        Self {
            voxel_sizes: vec![DEFAULT_VOXEL_SIZE],
            neighbor_radius: 2.0,
            column_cell: 1.0,
            context_sizes: vec![4.0, 16.0, 48.0],
        }
    }
}

impl FeatureRecipe {
    pub fn dim(&self) -> usize {
        3 * self.voxel_sizes.len() + 2 + self.context_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.voxel_sizes.is_empty() {
            return Err(Error::Config("feature recipe needs at least one voxel size".into()));
        }
        let positive = |v: &f64| *v > 0.0 && v.is_finite();
        if !self.voxel_sizes.iter().all(positive)
            || !self.context_sizes.iter().all(positive)
            || !positive(&self.neighbor_radius)
            || !positive(&self.column_cell)
        {
            return Err(Error::Config("feature recipe sizes must be positive".into()));
        }
        Ok(())
    }

    /// Stable identifier stored in checkpoints so a model is never fed features it was not trained on.
    pub fn hash(&self) -> u64 {
        let canonical = format!(
            "voxel={:?};neighbor={:?};column={:?};context={:?}",
            self.voxel_sizes, self.neighbor_radius, self.column_cell, self.context_sizes
        );
        let digest = Sha256::digest(canonical.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Features of the central points of `patch`.
///
/// Returns the patch-local indices of the central points (ascending) and one row per index.
pub fn patch_features(
    patch: &CompressedPatch,
    recipe: &FeatureRecipe,
) -> Result<(Vec<usize>, FeatureMatrix)> {
    recipe.validate()?;
    let points = &patch.cloud.points;
    let central: Vec<usize> = (0..points.len()).filter(|&i| patch.central_mask[i]).collect();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for &size in &recipe.voxel_sizes {
        let grid = voxelize(points, size)?;
        let projected = project_to_central(&grid, &patch.central_mask)?;
        columns.push(projected.iter().map(|(i, f)| points[*i].z - f.min_z).collect());
        columns.push(projected.iter().map(|(_, f)| f64::from(f.count).ln_1p()).collect());
        columns.push(projected.iter().map(|(_, f)| f.z_range()).collect());
    }

    let min_z = points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    columns.push(central.iter().map(|&i| points[i].z - min_z).collect());

    let index = GridIndex2::build(points, recipe.neighbor_radius);
    columns.push(
        central
            .par_iter()
            .map(|&i| {
                let p = &points[i];
                let n = index.count_within(points, (p.x, p.y), recipe.neighbor_radius);
                ((n - 1) as f64).ln_1p()
            })
            .collect(),
    );

    if !central.is_empty() && !recipe.context_sizes.is_empty() {
        let raster = ColumnRaster::build(points, recipe.column_cell);
        for &s in &recipe.context_sizes {
            let half = ((s / 2.0) / recipe.column_cell).round() as usize;
            let window = raster.window_min(half);
            columns.push(
                central
                    .iter()
                    .map(|&i| {
                        let p = &points[i];
                        p.z - window[raster.cell_of(p.x, p.y)]
                    })
                    .collect(),
            );
        }
    }

    let mut m = FeatureMatrix::new(recipe.dim());
    let mut row = vec![0.0; recipe.dim()];
    for r in 0..central.len() {
        for (c, col) in columns.iter().enumerate() {
            row[c] = col[r];
        }
        m.push(&row)?;
    }
    Ok((central, m))
}

/// Minimum z per XY cell over a patch.
struct ColumnRaster {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    min_z: Vec<f64>,
}

impl ColumnRaster {
    fn build(points: &[crate::cloud::Point3], cell: f64) -> Self {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let nx = ((x1 - x0) / cell).floor() as usize + 1;
        let ny = ((y1 - y0) / cell).floor() as usize + 1;
        let mut r = Self {
            x0,
            y0,
            cell,
            nx,
            ny,
            min_z: vec![f64::INFINITY; nx * ny],
        };
        for p in points {
            let c = r.cell_of(p.x, p.y);
            r.min_z[c] = r.min_z[c].min(p.z);
        }
        r
    }

    fn cell_of(&self, x: f64, y: f64) -> usize {
        let ix = (((x - self.x0) / self.cell).floor() as usize).min(self.nx - 1);
        let iy = (((y - self.y0) / self.cell).floor() as usize).min(self.ny - 1);
        iy * self.nx + ix
    }

    /// Minimum over the `(2 half + 1)^2` window around each cell, as two 1D passes.
    fn window_min(&self, half: usize) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut rows = vec![f64::INFINITY; nx * ny];
        for y in 0..ny {
            let line = &self.min_z[y * nx..(y + 1) * nx];
            for x in 0..nx {
                let lo = x.saturating_sub(half);
                let hi = (x + half).min(nx - 1);
                rows[y * nx + x] = line[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
            }
        }
        let mut out = vec![f64::INFINITY; nx * ny];
        for x in 0..nx {
            for y in 0..ny {
                let lo = y.saturating_sub(half);
                let hi = (y + half).min(ny - 1);
                out[y * nx + x] = (lo..=hi).map(|yy| rows[yy * nx + x]).fold(f64::INFINITY, f64::min);
            }
        }
        out
    }
}
