//! Point cloud types and label conventions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Horizontal (XY-plane) distance between a point and a center.
///
/// Every radius comparison in partitioning and compression goes through this
/// function so that membership decisions agree bit-for-bit across stages.
#[inline]
pub fn horizontal_distance(p: &Point3, center: (f64, f64)) -> f64 {
    let dx = p.x - center.0;
    let dy = p.y - center.1;
    (dx * dx + dy * dy).sqrt()
}

/// Per-point class code: 0 outlier, 1 non-ground, 2 ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ClassLabel {
    Outlier = 0,
    NonGround = 1,
    Ground = 2,
}

impl ClassLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ClassLabel::Outlier),
            1 => Ok(ClassLabel::NonGround),
            2 => Ok(ClassLabel::Ground),
            other => Err(Error::Validation(format!("unknown label code {other}"))),
        }
    }

    pub fn is_ground(self) -> bool {
        self == ClassLabel::Ground
    }
}

/// Optional per-point channels carried alongside coordinates and labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    HagMeters,
    HagBin,
    GroundProb,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::HagMeters, Channel::HagBin, Channel::GroundProb];

    pub fn name(self) -> &'static str {
        match self {
            Channel::HagMeters => "hag_meters",
            Channel::HagBin => "hag_bin",
            Channel::GroundProb => "ground_prob",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Channels {
    pub hag_meters: Option<Vec<f64>>,
    pub hag_bin: Option<Vec<u8>>,
    pub ground_prob: Option<Vec<f64>>,
}

impl Channels {
    pub fn present(&self) -> Vec<Channel> {
        let mut out = Vec::new();
        if self.hag_meters.is_some() {
            out.push(Channel::HagMeters);
        }
        if self.hag_bin.is_some() {
            out.push(Channel::HagBin);
        }
        if self.ground_prob.is_some() {
            out.push(Channel::GroundProb);
        }
        out
    }

    /// Channel value at `index` widened to f64; `None` if the channel is absent.
    pub fn value(&self, channel: Channel, index: usize) -> Option<f64> {
        match channel {
            Channel::HagMeters => self.hag_meters.as_ref().map(|v| v[index]),
            Channel::HagBin => self.hag_bin.as_ref().map(|v| f64::from(v[index])),
            Channel::GroundProb => self.ground_prob.as_ref().map(|v| v[index]),
        }
    }

    /// Gathers the channels at `indices` into a new set.
    pub fn select(&self, indices: &[usize]) -> Channels {
        Channels {
            hag_meters: self
                .hag_meters
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            hag_bin: self
                .hag_bin
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            ground_prob: self
                .ground_prob
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Points with labels and optional channels, all of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub points: Vec<Point3>,
    pub labels: Vec<ClassLabel>,
    pub channels: Channels,
}

impl LabeledCloud {
    pub fn new(points: Vec<Point3>, labels: Vec<ClassLabel>) -> Result<Self> {
        let cloud = Self {
            points,
            labels,
            channels: Channels::default(),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        let check_len = |len: usize| {
            if len != n {
                Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                })
            } else {
                Ok(())
            }
        };
        check_len(self.labels.len())?;
        if let Some((i, _)) = self.points.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::Validation(format!("point {i} has non-finite coordinates")));
        }
        if let Some(h) = &self.channels.hag_meters {
            check_len(h.len())?;
            if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation("hag_meters must be finite and >= 0".into()));
            }
        }
        if let Some(b) = &self.channels.hag_bin {
            check_len(b.len())?;
        }
        if let Some(p) = &self.channels.ground_prob {
            check_len(p.len())?;
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Validation("ground_prob must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Replaces every `Outlier` label with `NonGround`.
    pub fn relabel_outliers(&mut self) -> usize {
        let mut n = 0;
        for label in &mut self.labels {
            if *label == ClassLabel::Outlier {
                *label = ClassLabel::NonGround;
                n += 1;
            }
        }
        n
    }

    pub fn select(&self, indices: &[usize]) -> LabeledCloud {
        LabeledCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            channels: self.channels.select(indices),
        }
    }

    pub fn ground_points(&self) -> Vec<Point3> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.is_ground())
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn bounds(&self) -> Result<Bounds2> {
        Bounds2::of_points(&self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds2 {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds2 {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        if !(min_x <= max_x && min_y <= max_y) {
            return Err(Error::Validation(format!(
                "bounds min ({min_x}, {min_y}) exceeds max ({max_x}, {max_y})"
            )));
        }
        Ok(Self {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    /// Tight XY bounding box of a non-empty point set.
    pub fn of_points(points: &[Point3]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Validation("bounds of an empty cloud".into()))?;
        let mut b = Bounds2 {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in &points[1..] {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// Free-function form of [`LabeledCloud::bounds`].
pub fn bounds(cloud: &LabeledCloud) -> Result<Bounds2> {
    cloud.bounds()
}
