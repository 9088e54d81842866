//! Triangulated irregular network over scattered elevation samples.

use spade::{DelaunayTriangulation, FloatTriangulation, HasPosition, Point2, Triangulation};

use crate::cloud::Point3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct TinVertex {
    x: f64,
    y: f64,
    z: f64,
}

impl HasPosition for TinVertex {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }
}

/// Delaunay TIN with linear interpolation per triangle.
pub struct Tin {
    tri: DelaunayTriangulation<TinVertex>,
}

impl std::fmt::Debug for Tin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tin")
            .field("vertices", &self.num_vertices())
            .field("triangles", &self.num_triangles())
            .finish()
    }
}

impl Tin {
    /// Triangulates the XY positions of `points`; needs three non-collinear samples.
    ///
    /// Samples sharing an XY position collapse into a single vertex.
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateSurface(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        let vertices = points
            .iter()
            .map(|p| TinVertex {
                x: p.x,
                y: p.y,
                z: p.z,
            })
            .collect();
        let tri = DelaunayTriangulation::<TinVertex>::bulk_load(vertices)
            .map_err(|e| Error::DegenerateSurface(format!("triangulation failed: {e:?}")))?;
        if tri.num_inner_faces() == 0 {
            return Err(Error::DegenerateSurface("all points are collinear".into()));
        }
        Ok(Self { tri })
    }

    pub fn num_vertices(&self) -> usize {
        self.tri.num_vertices()
    }

    pub fn num_triangles(&self) -> usize {
        self.tri.num_inner_faces()
    }

    /// Linear interpolation inside the convex hull; `None` outside.
    pub fn interpolate(&self, x: f64, y: f64) -> Option<f64> {
        self.tri
            .barycentric()
            .interpolate(|v| v.data().z, Point2::new(x, y))
    }

    /// Elevation of the vertex nearest to `(x, y)`.
    pub fn nearest_elevation(&self, x: f64, y: f64) -> f64 {
        self.tri
            .nearest_neighbor(Point2::new(x, y))
            .map(|v| v.data().z)
            .expect("a built TIN always has vertices")
    }

    /// Interpolated elevation, falling back to the nearest vertex outside the hull.
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        self.interpolate(x, y)
            .unwrap_or_else(|| self.nearest_elevation(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let tin = Tin::build(&[
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(tin.num_triangles(), 1);
        assert_eq!(tin.interpolate(0.2, 0.2), Some(1.0));
        assert_eq!(tin.interpolate(2.0, 2.0), None);
        assert_eq!(tin.elevation(2.0, 2.0), 1.0);
    }

    #[test]
    fn collinear_and_too_few_rejected() {
        let line: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(Tin::build(&line), Err(Error::DegenerateSurface(_))));
        assert!(matches!(Tin::build(&line[..2]), Err(Error::DegenerateSurface(_))));
    }

    #[test]
    fn reproduces_plane() {
        let pts: Vec<Point3> = (0..50)
            .map(|i| {
                let x = (i as f64 * 7.13) % 20.0;
                let y = (i as f64 * 3.91) % 20.0;
                Point3::new(x, y, 2.0 * x - 0.5 * y + 3.0)
            })
            .collect();
        let tin = Tin::build(&pts).unwrap();
        for (x, y) in [(5.0, 5.0), (10.1, 12.7), (3.3, 15.2)] {
            if let Some(z) = tin.interpolate(x, y) {
                assert!((z - (2.0 * x - 0.5 * y + 3.0)).abs() < 1e-9);
            }
        }
    }
}
