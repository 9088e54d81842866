//! Seeded synthetic scenes with analytic terrain.
//!
//! Ground points are drawn uniformly over the extent (thinned under canopies and
//! removed inside building footprints) and perturbed by Gaussian noise. Buildings
//! are flat-roofed boxes whose roof sits `height` above the highest terrain inside
//! the footprint, with sparse wall points. Canopies are ellipsoidal crowns
//! (upper shell plus some lower-shell returns) over a layer of understory points
//! between 0.2 m and 3 m above the terrain.
//!
//! Every component draws from its own [`SeededRng::derived`] stream: stream 0 for
//! ground, stream `k + 1` for object `k`, and stream `u64::MAX` for preset layout.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cloud::{Bounds2, ClassLabel, LabeledCloud, Point3};
use crate::error::{Error, Result};
use crate::evaluate::{DtmRaster, GridSpec};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terrain {
    Flat { z0: f64 },
    /// Plane rising by `tan(slope)` per meter towards `azimuth` (degrees counter-clockwise from +x).
    Inclined { z0: f64, slope_deg: f64, azimuth_deg: f64 },
    /// `z0 + amplitude * sin(2 pi x / wavelength) * cos(2 pi y / wavelength)`.
    Undulating { z0: f64, amplitude: f64, wavelength: f64 },
}

impl Terrain {
    /// Elevation at scene-local coordinates.
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        match *self {
            Terrain::Flat { z0 } => z0,
            Terrain::Inclined {
                z0,
                slope_deg,
                azimuth_deg,
            } => {
                let a = azimuth_deg.to_radians();
                z0 + slope_deg.to_radians().tan() * (x * a.cos() + y * a.sin())
            }
            Terrain::Undulating {
                z0,
                amplitude,
                wavelength,
            } => z0 + amplitude * (TAU * x / wavelength).sin() * (TAU * y / wavelength).cos(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Terrain::Flat { .. } => Ok(()),
            Terrain::Inclined { slope_deg, .. } if (0.0..=60.0).contains(&slope_deg) => Ok(()),
            Terrain::Inclined { slope_deg, .. } => Err(Error::Config(format!(
                "slope must lie in [0, 60] degrees, got {slope_deg}"
            ))),
            Terrain::Undulating { wavelength, .. } if wavelength > 0.0 => Ok(()),
            Terrain::Undulating { .. } => Err(Error::Config("wavelength must be positive".into())),
        }
    }
}

/// Object positions are scene-local centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneObject {
    Box {
        x: f64,
        y: f64,
        width: f64,
        length: f64,
        height: f64,
    },
    Canopy {
        x: f64,
        y: f64,
        radius: f64,
        height: f64,
        understory_density: f64,
    },
}

impl SceneObject {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SceneObject::Box {
                width,
                length,
                height,
                ..
            } => width > 0.0 && length > 0.0 && height > 0.0,
            SceneObject::Canopy {
                radius,
                height,
                understory_density,
                ..
            } => radius > 0.0 && height > 3.0 && understory_density >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scene object {self:?}")))
        }
    }

    /// Radius of a circle around the center enclosing the footprint.
    fn reach(&self) -> f64 {
        match *self {
            SceneObject::Box { width, length, .. } => 0.5 * width.hypot(length),
            SceneObject::Canopy { radius, .. } => radius,
        }
    }

    fn center(&self) -> (f64, f64) {
        match *self {
            SceneObject::Box { x, y, .. } | SceneObject::Canopy { x, y, .. } => (x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    /// Scene size along x and y in meters.
    pub extent: (f64, f64),
    /// World coordinates of the scene's local (0, 0).
    pub origin: (f64, f64),
    pub terrain: Terrain,
    pub objects: Vec<SceneObject>,
    /// Ground points per square meter in the open.
    pub ground_density: f64,
    /// Ground points per square meter under canopies.
    pub canopy_ground_density: f64,
    /// Roof and crown points per square meter of footprint.
    pub object_density: f64,
    pub noise_sigma: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.0 > 0.0 && self.extent.1 > 0.0) {
            return Err(Error::Config(format!("scene extent {:?} has zero area", self.extent)));
        }
        if !(self.ground_density > 0.0 && self.object_density > 0.0) {
            return Err(Error::Config("densities must be positive".into()));
        }
        if !(self.canopy_ground_density >= 0.0 && self.canopy_ground_density <= self.ground_density) {
            return Err(Error::Config(
                "canopy ground density must lie in [0, ground density]".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise sigma must be nonnegative".into()));
        }
        self.terrain.validate()?;
        self.objects.iter().try_for_each(SceneObject::validate)
    }
}

/// The generating terrain in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticTerrain {
    pub terrain: Terrain,
    pub origin: (f64, f64),
    pub extent: (f64, f64),
}

impl AnalyticTerrain {
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        self.terrain.elevation(x - self.origin.0, y - self.origin.1)
    }

    pub fn bounds(&self) -> Bounds2 {
        Bounds2 {
            min_x: self.origin.0,
            min_y: self.origin.1,
            max_x: self.origin.0 + self.extent.0,
            max_y: self.origin.1 + self.extent.1,
        }
    }

    /// Analytic elevation at every cell center of `spec`.
    pub fn raster(&self, spec: GridSpec) -> DtmRaster {
        DtmRaster::from_fn(spec, |x, y| Some(self.elevation(x, y)))
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: LabeledCloud,
    pub terrain: AnalyticTerrain,
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let terrain = AnalyticTerrain {
        terrain: spec.terrain,
        origin: spec.origin,
        extent: spec.extent,
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let (w, l) = spec.extent;
    let inside_extent = |x: f64, y: f64| (0.0..=w).contains(&x) && (0.0..=l).contains(&y);

    let mut rng = SeededRng::derived(spec.seed, 0);
    let n_ground = (spec.ground_density * w * l).round() as usize;
    let keep_under_canopy = spec.canopy_ground_density / spec.ground_density;
    for _ in 0..n_ground {
        let x = rng.range(0.0, w);
        let y = rng.range(0.0, l);
        let noise = spec.noise_sigma * rng.normal();
        let thin = rng.uniform();
        let mut keep = true;
        for o in &spec.objects {
            match *o {
                SceneObject::Box {
                    x: cx,
                    y: cy,
                    width,
                    length,
                    ..
                } => {
                    if (x - cx).abs() <= width / 2.0 && (y - cy).abs() <= length / 2.0 {
                        keep = false;
                    }
                }
                SceneObject::Canopy {
                    x: cx,
                    y: cy,
                    radius,
                    ..
                } => {
                    if (x - cx).hypot(y - cy) <= radius && thin >= keep_under_canopy {
                        keep = false;
                    }
                }
            }
        }
        if keep {
            points.push(Point3::new(x, y, spec.terrain.elevation(x, y) + noise));
            labels.push(ClassLabel::Ground);
        }
    }

    for (k, o) in spec.objects.iter().enumerate() {
        let mut rng = SeededRng::derived(spec.seed, k as u64 + 1);
        let mut emit = |p: Point3| {
            // Object points must stay strictly above the terrain.
            if inside_extent(p.x, p.y) && p.z > spec.terrain.elevation(p.x, p.y) {
                points.push(p);
                labels.push(ClassLabel::NonGround);
            }
        };
        match *o {
            SceneObject::Box {
                x,
                y,
                width,
                length,
                height,
            } => {
                let roof = box_roof(&spec.terrain, x, y, width, length, height);
                let n_roof = (spec.object_density * width * length).round() as usize;
                for _ in 0..n_roof {
                    let px = x + rng.range(-width / 2.0, width / 2.0);
                    let py = y + rng.range(-length / 2.0, length / 2.0);
                    emit(Point3::new(px, py, roof));
                }
                let perimeter = 2.0 * (width + length);
                let n_wall = (0.25 * spec.object_density * perimeter * height).round() as usize;
                for _ in 0..n_wall {
                    let s = rng.range(0.0, perimeter);
                    let (px, py) = perimeter_point(x, y, width, length, s);
                    let base = spec.terrain.elevation(px, py) + 0.5;
                    emit(Point3::new(px, py, rng.range(base, roof)));
                }
            }
            SceneObject::Canopy {
                x,
                y,
                radius,
                height,
                understory_density,
            } => {
                let depth = (height / 3.0).min(radius);
                let zc = spec.terrain.elevation(x, y) + height - depth;
                let n_crown = (spec.object_density * PI * radius * radius).round() as usize;
                for _ in 0..n_crown {
                    let (px, py, d) = disk_point(&mut rng, x, y, radius);
                    let dz = depth * (1.0 - d * d).max(0.0).sqrt();
                    let lower = rng.uniform() < 0.3;
                    emit(Point3::new(px, py, if lower { zc - dz } else { zc + dz }));
                }
                let n_under = (understory_density * PI * radius * radius).round() as usize;
                for _ in 0..n_under {
                    let (px, py, _) = disk_point(&mut rng, x, y, radius);
                    let hag = rng.range(0.2, 3.0);
                    emit(Point3::new(px, py, spec.terrain.elevation(px, py) + hag));
                }
            }
        }
    }

    for p in &mut points {
        p.x += spec.origin.0;
        p.y += spec.origin.1;
    }
    Ok(Scene {
        cloud: LabeledCloud::new(points, labels)?,
        terrain,
    })
}

/// Highest terrain over the footprint (sampled on a 1 m lattice plus corners) plus `height`.
fn box_roof(terrain: &Terrain, x: f64, y: f64, width: f64, length: f64, height: f64) -> f64 {
    let nx = width.ceil() as usize;
    let ny = length.ceil() as usize;
    let mut top = f64::NEG_INFINITY;
    for i in 0..=nx {
        for j in 0..=ny {
            let px = x - width / 2.0 + width * i as f64 / nx as f64;
            let py = y - length / 2.0 + length * j as f64 / ny as f64;
            top = top.max(terrain.elevation(px, py));
        }
    }
    top + height
}

fn perimeter_point(x: f64, y: f64, width: f64, length: f64, s: f64) -> (f64, f64) {
    let (x0, y0) = (x - width / 2.0, y - length / 2.0);
    if s < width {
        (x0 + s, y0)
    } else if s < width + length {
        (x0 + width, y0 + s - width)
    } else if s < 2.0 * width + length {
        (x0 + width - (s - width - length), y0 + length)
    } else {
        (x0, y0 + length - (s - 2.0 * width - length))
    }
}

/// Uniform point in a disk; returns its position and normalized radius.
fn disk_point(rng: &mut SeededRng, x: f64, y: f64, radius: f64) -> (f64, f64, f64) {
    let d = rng.uniform().sqrt();
    let a = rng.range(0.0, TAU);
    (x + radius * d * a.cos(), y + radius * d * a.sin(), d)
}

/// Places objects from `candidates` at random positions without footprint overlap.
fn scatter(
    rng: &mut SeededRng,
    extent: (f64, f64),
    placed: &mut Vec<SceneObject>,
    candidates: impl IntoIterator<Item = SceneObject>,
    margin: f64,
) {
    for cand in candidates {
        let r = cand.reach();
        for _ in 0..200 {
            let x = rng.range(r + margin, extent.0 - r - margin);
            let y = rng.range(r + margin, extent.1 - r - margin);
            let clear = placed.iter().all(|o| {
                let (ox, oy) = o.center();
                (x - ox).hypot(y - oy) > r + o.reach() + margin
            });
            if clear {
                placed.push(cand.moved_to(x, y));
                break;
            }
        }
    }
}

impl SceneObject {
    fn moved_to(self, x: f64, y: f64) -> Self {
        match self {
            SceneObject::Box {
                width,
                length,
                height,
                ..
            } => SceneObject::Box {
                x,
                y,
                width,
                length,
                height,
            },
            SceneObject::Canopy {
                radius,
                height,
                understory_density,
                ..
            } => SceneObject::Canopy {
                x,
                y,
                radius,
                height,
                understory_density,
            },
        }
    }
}

fn random_box(rng: &mut SeededRng, side: (f64, f64), height: (f64, f64)) -> SceneObject {
    SceneObject::Box {
        x: 0.0,
        y: 0.0,
        width: rng.range(side.0, side.1),
        length: rng.range(side.0, side.1),
        height: rng.range(height.0, height.1),
    }
}

fn random_canopy(
    rng: &mut SeededRng,
    radius: (f64, f64),
    height: (f64, f64),
    understory: f64,
) -> SceneObject {
    SceneObject::Canopy {
        x: 0.0,
        y: 0.0,
        radius: rng.range(radius.0, radius.1),
        height: rng.range(height.0, height.1),
        understory_density: understory,
    }
}

/// 240 m urban block on a 2 degree incline: one 60 x 40 x 12 m building, smaller
/// buildings of 8 to 25 m and a few street trees.
pub fn urban_preset(seed: u64) -> SceneSpec {
    let extent = (240.0, 240.0);
    let mut rng = SeededRng::derived(seed, u64::MAX);
    let mut objects = Vec::new();
    let big = SceneObject::Box {
        x: 0.0,
        y: 0.0,
        width: 60.0,
        length: 40.0,
        height: 12.0,
    };
    scatter(&mut rng, extent, &mut objects, [big], 10.0);
    let small: Vec<_> = (0..10).map(|_| random_box(&mut rng, (8.0, 25.0), (4.0, 20.0))).collect();
    scatter(&mut rng, extent, &mut objects, small, 6.0);
    let trees: Vec<_> = (0..8).map(|_| random_canopy(&mut rng, (2.5, 4.5), (6.0, 12.0), 0.1)).collect();
    scatter(&mut rng, extent, &mut objects, trees, 3.0);
    SceneSpec {
        seed,
        extent,
        origin: (500_000.0, 4_000_000.0),
        terrain: Terrain::Inclined {
            z0: 100.0,
            slope_deg: 2.0,
            azimuth_deg: 30.0,
        },
        objects,
        ground_density: 1.0,
        canopy_ground_density: 0.5,
        object_density: 1.0,
        noise_sigma: 0.02,
    }
}

/// 200 m rolling terrain (3 m amplitude, 150 m wavelength) with buildings and vegetation.
pub fn mixed_preset(seed: u64) -> SceneSpec {
    let extent = (200.0, 200.0);
    let mut rng = SeededRng::derived(seed, u64::MAX);
    let mut objects = Vec::new();
    let buildings: Vec<_> = (0..5).map(|_| random_box(&mut rng, (10.0, 25.0), (6.0, 15.0))).collect();
    scatter(&mut rng, extent, &mut objects, buildings, 6.0);
    let trees: Vec<_> = (0..14).map(|_| random_canopy(&mut rng, (3.0, 6.0), (8.0, 18.0), 0.3)).collect();
    scatter(&mut rng, extent, &mut objects, trees, 2.0);
    SceneSpec {
        seed,
        extent,
        origin: (500_000.0, 4_000_000.0),
        terrain: Terrain::Undulating {
            z0: 200.0,
            amplitude: 3.0,
            wavelength: 150.0,
        },
        objects,
        ground_density: 1.0,
        canopy_ground_density: 0.6,
        object_density: 1.0,
        noise_sigma: 0.05,
    }
}

/// 200 m forest on a 35 degree slope with dense crowns and 0.5 pts/m2 ground under canopy.
pub fn steep_forest_preset(seed: u64) -> SceneSpec {
    let extent = (200.0, 200.0);
    let mut rng = SeededRng::derived(seed, u64::MAX);
    let mut objects = Vec::new();
    let trees: Vec<_> = (0..120).map(|_| random_canopy(&mut rng, (4.0, 7.0), (12.0, 25.0), 0.5)).collect();
    scatter(&mut rng, extent, &mut objects, trees, 0.5);
    SceneSpec {
        seed,
        extent,
        origin: (500_000.0, 4_000_000.0),
        terrain: Terrain::Inclined {
            z0: 800.0,
            slope_deg: 35.0,
            azimuth_deg: 90.0,
        },
        objects,
        ground_density: 2.0,
        canopy_ground_density: 0.5,
        object_density: 2.0,
        noise_sigma: 0.05,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Urban,
    Mixed,
    SteepForest,
}

impl Preset {
    pub fn spec(self, seed: u64) -> SceneSpec {
        match self {
            Preset::Urban => urban_preset(seed),
            Preset::Mixed => mixed_preset(seed),
            Preset::SteepForest => steep_forest_preset(seed),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "urban" => Some(Preset::Urban),
            "mixed" => Some(Preset::Mixed),
            "steep_forest" | "steep-forest" => Some(Preset::SteepForest),
            _ => None,
        }
    }
}
