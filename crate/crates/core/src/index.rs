//! Uniform XY grid hash for radius queries.

use std::collections::HashMap;

use crate::cloud::{horizontal_distance, Point3};

pub struct GridIndex2 {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex2 {
    pub fn build(points: &[Point3], cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell size must be positive");
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(cell, p.x, p.y)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(cell: f64, x: f64, y: f64) -> (i64, i64) {
        ((x / cell).floor() as i64, (y / cell).floor() as i64)
    }

    /// Indices of points with horizontal distance `<= radius` from `center`, ascending.
    pub fn within(&self, points: &[Point3], center: (f64, f64), radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(points, center, radius, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, points: &[Point3], center: (f64, f64), radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(points, center, radius, |_| n += 1);
        n
    }

    fn for_each_within(
        &self,
        points: &[Point3],
        center: (f64, f64),
        radius: f64,
        mut f: impl FnMut(usize),
    ) {
        // One extra cell of slack on each side absorbs floor() rounding at cell edges.
        let (ix0, iy0) = Self::key(self.cell, center.0 - radius, center.1 - radius);
        let (ix1, iy1) = Self::key(self.cell, center.0 + radius, center.1 + radius);
        for ix in ix0 - 1..=ix1 + 1 {
            for iy in iy0 - 1..=iy1 + 1 {
                if let Some(bucket) = self.buckets.get(&(ix, iy)) {
                    for &i in bucket {
                        if horizontal_distance(&points[i], center) <= radius {
                            f(i);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let pts: Vec<Point3> = (0..400)
            .map(|i| {
                let t = i as f64;
                Point3::new((t * 7.31) % 40.0 - 20.0, (t * 3.77) % 40.0 - 20.0, 0.0)
            })
            .collect();
        let idx = GridIndex2::build(&pts, 3.0);
        for &(c, r) in &[((0.0, 0.0), 5.0), ((-19.0, 7.5), 11.0), ((3.3, -2.2), 0.0)] {
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&i| horizontal_distance(&pts[i], c) <= r)
                .collect();
            assert_eq!(idx.within(&pts, c, r), brute);
            assert_eq!(idx.count_within(&pts, c, r), brute.len());
        }
    }
}
