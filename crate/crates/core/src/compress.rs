//! Radial context compression of cylindrical patches.
//!
//! Points inside the inner radius are left untouched. Points in the annulus
//! between the inner and outer radius are pulled toward the center along
//! their own ray so that the outer boundary lands on the compressed radius:
//!
//! ```text
//! r' = r_in + (r - r_in) * (r_oc - r_in) / (r_oo - r_in)
//! ```
//!
//! Elevation is never modified.

use serde::{Deserialize, Serialize};

use crate::cloud::{horizontal_distance, LabeledCloud, Point3};
use crate::error::{Error, Result};
use crate::partition::{PartitionConfig, Patch};

/// Slack allowed on the compressed-radius bound when inverting.
pub const RADIUS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressConfig {
    pub outer_radius: f64,
    pub compressed_radius: f64,
    pub inner_radius: f64,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            outer_radius: 150.0,
            compressed_radius: 44.0,
            inner_radius: 25.0 * std::f64::consts::SQRT_2,
        }
    }
}

impl CompressConfig {
    pub fn from_partition(p: &PartitionConfig, compressed_radius: f64) -> Self {
        Self {
            outer_radius: p.outer_radius,
            compressed_radius,
            inner_radius: p.inner_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.inner_radius > 0.0
            && self.inner_radius < self.compressed_radius
            && self.compressed_radius < self.outer_radius
            && self.outer_radius.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "compression needs 0 < inner ({}) < compressed ({}) < outer ({})",
                self.inner_radius, self.compressed_radius, self.outer_radius
            )));
        }
        Ok(())
    }

    /// Radial scale factor of the compression zone, `(r_oc - r_in) / (r_oo - r_in)`.
    pub fn ratio(&self) -> f64 {
        (self.compressed_radius - self.inner_radius) / (self.outer_radius - self.inner_radius)
    }

    /// Scalar radial map on `[0, r_oo]`.
    pub fn compress_radius(&self, r: f64) -> f64 {
        if r <= self.inner_radius {
            r
        } else {
            self.inner_radius + (r - self.inner_radius) * self.ratio()
        }
    }

    /// Inverse of [`compress_radius`](Self::compress_radius) on `[0, r_oc]`.
    pub fn decompress_radius(&self, r: f64) -> f64 {
        if r <= self.inner_radius {
            r
        } else {
            self.inner_radius
                + (r - self.inner_radius) * (self.outer_radius - self.inner_radius)
                    / (self.compressed_radius - self.inner_radius)
        }
    }
}

fn rescale(p: &Point3, center: (f64, f64), r: f64, r_new: f64) -> Point3 {
    let s = r_new / r;
    Point3::new(
        center.0 + (p.x - center.0) * s,
        center.1 + (p.y - center.1) * s,
        p.z,
    )
}

pub fn compress_point(p: &Point3, center: (f64, f64), cfg: &CompressConfig) -> Result<Point3> {
    let r = horizontal_distance(p, center);
    if r <= cfg.inner_radius {
        return Ok(*p);
    }
    if r > cfg.outer_radius {
        return Err(Error::OutOfDomain {
            radius: r,
            limit: cfg.outer_radius,
        });
    }
    Ok(rescale(p, center, r, cfg.compress_radius(r)))
}

pub fn decompress_point(p: &Point3, center: (f64, f64), cfg: &CompressConfig) -> Result<Point3> {
    let r = horizontal_distance(p, center);
    if r <= cfg.inner_radius {
        return Ok(*p);
    }
    if r > cfg.compressed_radius + RADIUS_TOLERANCE {
        return Err(Error::OutOfDomain {
            radius: r,
            limit: cfg.compressed_radius,
        });
    }
    Ok(rescale(p, center, r, cfg.decompress_radius(r)))
}

/// A patch after compression; labels, channels and the central mask follow the members.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPatch {
    pub patch_id: usize,
    pub center: (f64, f64),
    /// Compressed member points, in the order of `member_indices`.
    pub cloud: LabeledCloud,
    pub member_indices: Vec<usize>,
    pub central_mask: Vec<bool>,
}

impl CompressedPatch {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

pub fn compress_patch(
    patch: &Patch,
    cloud: &LabeledCloud,
    cfg: &CompressConfig,
) -> Result<CompressedPatch> {
    cfg.validate()?;
    let mut members = cloud.select(&patch.member_indices);
    for p in &mut members.points {
        *p = compress_point(p, patch.center, cfg)?;
    }
    Ok(CompressedPatch {
        patch_id: patch.id,
        center: patch.center,
        cloud: members,
        member_indices: patch.member_indices.clone(),
        central_mask: patch.central_mask.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::ClassLabel;
    use proptest::prelude::*;

    fn small() -> CompressConfig {
        CompressConfig {
            outer_radius: 100.0,
            compressed_radius: 20.0,
            inner_radius: 10.0,
        }
    }

    #[test]
    fn outer_boundary_maps_to_compressed_radius() {
        let q = compress_point(&Point3::new(100.0, 0.0, 7.0), (0.0, 0.0), &small()).unwrap();
        assert!((q.x - 20.0).abs() < 1e-12);
        assert_eq!(q.y, 0.0);
        assert_eq!(q.z, 7.0);
    }

    #[test]
    fn inner_boundary_is_identity() {
        let p = Point3::new(10.0, 0.0, 7.0);
        assert_eq!(compress_point(&p, (0.0, 0.0), &small()).unwrap(), p);
    }

    #[test]
    fn annulus_point_matches_scalar_oracle() {
        // r' = 10 + (50 - 10) * (20 - 10) / (100 - 10)
        let expected = 10.0 + 40.0 * (10.0 / 90.0);
        let q = compress_point(&Point3::new(50.0, 0.0, 5.0), (0.0, 0.0), &small()).unwrap();
        assert!((q.x - 14.444_444_444_444_445).abs() < 1e-12);
        assert!((q.x - expected).abs() < 1e-12);
        assert_eq!(q.z, 5.0);

        let back = decompress_point(&q, (0.0, 0.0), &small()).unwrap();
        assert!((back.x - 50.0).abs() < 1e-9);
        assert_eq!(back.z, 5.0);
    }

    #[test]
    fn decompress_examples() {
        let cfg = small();
        let inside = Point3::new(3.0, -4.0, 1.0);
        assert_eq!(decompress_point(&inside, (0.0, 0.0), &cfg).unwrap(), inside);
        let edge = decompress_point(&Point3::new(0.0, 20.0, 1.0), (0.0, 0.0), &cfg).unwrap();
        assert!((edge.y - 100.0).abs() < 1e-9);
        assert!(matches!(
            decompress_point(&Point3::new(0.0, 21.0, 1.0), (0.0, 0.0), &cfg),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn beyond_outer_radius_is_error() {
        assert!(matches!(
            compress_point(&Point3::new(100.5, 0.0, 0.0), (0.0, 0.0), &small()),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn center_point_unchanged() {
        let p = Point3::new(4.0, 5.0, 6.0);
        assert_eq!(compress_point(&p, (4.0, 5.0), &small()).unwrap(), p);
    }

    #[test]
    fn config_ordering_enforced() {
        let mut c = small();
        c.inner_radius = 20.0;
        assert!(c.validate().is_err());
        assert!(CompressConfig::default().validate().is_ok());
    }

    #[test]
    fn patch_compression_copies_by_index() {
        let cfg = small();
        let cloud = LabeledCloud::new(
            vec![
                Point3::new(99.0, 99.0, 0.0),
                Point3::new(5.0, 0.0, 1.0),
                Point3::new(0.0, -100.0, 2.0),
            ],
            vec![ClassLabel::NonGround, ClassLabel::Ground, ClassLabel::NonGround],
        )
        .unwrap();
        let patch = Patch {
            id: 3,
            center: (0.0, 0.0),
            member_indices: vec![1, 2],
            central_mask: vec![true, false],
        };
        let cp = compress_patch(&patch, &cloud, &cfg).unwrap();
        assert_eq!(cp.cloud.points[0], cloud.points[1]);
        assert!((cp.cloud.points[1].y + 20.0).abs() < 1e-12);
        assert_eq!(cp.cloud.labels, vec![ClassLabel::Ground, ClassLabel::NonGround]);
        assert_eq!(cp.central_mask, vec![true, false]);
        assert_eq!(cp.patch_id, 3);
    }

    proptest! {
        #[test]
        fn radii_stay_ordered_and_bounded(
            r1 in 0.0f64..100.0,
            r2 in 0.0f64..100.0,
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let cfg = small();
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assume!(lo < hi);
            prop_assert!(cfg.compress_radius(lo) < cfg.compress_radius(hi));
            let p = Point3::new(hi * theta.cos(), hi * theta.sin(), -3.25);
            let q = compress_point(&p, (0.0, 0.0), &cfg).unwrap();
            prop_assert!(horizontal_distance(&q, (0.0, 0.0)) <= cfg.compressed_radius + 1e-9);
            prop_assert_eq!(q.z, p.z);
        }
    }
}
