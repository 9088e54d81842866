//! Classification metrics, DTM rasters and elevation RMSE.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Bounds2, ClassLabel, Point3};
use crate::error::{Error, Result};
use crate::tin::Tin;

/// Class 1 is non-ground and class 2 is ground. `FP_c` counts points predicted
/// as class `c` whose true label is the other class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp1: u64,
    pub fp1: u64,
    pub tp2: u64,
    pub fp2: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp1 + self.fp1 + self.tp2 + self.fp2
    }
}

pub fn confusion(pred: &[ClassLabel], truth: &[ClassLabel]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        match (p, t) {
            (ClassLabel::Outlier, _) | (_, ClassLabel::Outlier) => {
                return Err(Error::Validation(format!("outlier label at point {i}")));
            }
            (ClassLabel::NonGround, ClassLabel::NonGround) => c.tp1 += 1,
            (ClassLabel::NonGround, ClassLabel::Ground) => c.fp1 += 1,
            (ClassLabel::Ground, ClassLabel::Ground) => c.tp2 += 1,
            (ClassLabel::Ground, ClassLabel::NonGround) => c.fp2 += 1,
        }
    }
    Ok(c)
}

/// IoU values are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub iou1: Option<f64>,
    pub iou2: Option<f64>,
    pub oa: f64,
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Validation("metrics over zero points".into()));
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        iou1: ratio(c.tp1, c.tp1 + c.fp1 + c.fp2),
        iou2: ratio(c.tp2, c.tp2 + c.fp1 + c.fp2),
        oa: (c.tp1 + c.tp2) as f64 / total as f64,
    })
}

/// Regular raster layout. Cell `(col, row)` has its center at
/// `(origin_x + (col + 0.5) * cell_size, origin_y + (row + 0.5) * cell_size)`; row 0 is the southern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    /// Smallest grid anchored at the bounds minimum whose cells cover the bounds.
    pub fn covering(bounds: &Bounds2, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Config(format!("DTM cell size must be positive, got {cell_size}")));
        }
        let cells = |extent: f64| ((extent / cell_size).ceil() as usize).max(1);
        Ok(Self {
            origin_x: bounds.min_x,
            origin_y: bounds.min_y,
            cell_size,
            width: cells(bounds.width()),
            height: cells(bounds.height()),
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, index: usize) -> (f64, f64) {
        let (col, row) = (index % self.width, index / self.width);
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtmRaster {
    pub spec: GridSpec,
    /// Row-major from the southern row; invalid cells hold NaN.
    pub elevation: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DtmRaster {
    /// Evaluates `f` at every cell center; non-finite results mark the cell invalid.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> Option<f64> + Sync) -> Self {
        let elevation: Vec<f64> = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = spec.center(i);
                f(x, y).filter(|z| z.is_finite()).unwrap_or(f64::NAN)
            })
            .collect();
        let valid = elevation.iter().map(|z| !z.is_nan()).collect();
        Self {
            spec,
            elevation,
            valid,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn write_esri_ascii(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_esri_ascii()).map_err(|e| Error::io(path, e))
    }

    /// ESRI ASCII grid text, northern row first, NODATA -9999.
    pub fn to_esri_ascii(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            s.width, s.height, s.origin_x, s.origin_y, s.cell_size, NODATA
        );
        for row in (0..s.height).rev() {
            let line: Vec<String> = (0..s.width)
                .map(|col| {
                    let i = row * s.width + col;
                    if self.valid[i] {
                        format!("{}", self.elevation[i])
                    } else {
                        format!("{NODATA}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn read_esri_ascii(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_esri_ascii(&text)
    }

    pub fn from_esri_ascii(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut header = std::collections::HashMap::new();
        for key in ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"] {
            let (n, line) = lines.next().ok_or_else(|| Error::Format("truncated ASCII grid header".into()))?;
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap_or("").to_ascii_lowercase();
            if name != key {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected `{key}`, found `{name}`"),
                });
            }
            let value: f64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("bad value for `{key}`"),
            })?;
            header.insert(key, value);
        }
        let spec = GridSpec {
            origin_x: header["xllcorner"],
            origin_y: header["yllcorner"],
            cell_size: header["cellsize"],
            width: header["ncols"] as usize,
            height: header["nrows"] as usize,
        };
        let nodata = header["nodata_value"];
        let mut elevation = vec![f64::NAN; spec.len()];
        let mut valid = vec![false; spec.len()];
        for r in 0..spec.height {
            let (n, line) = lines.next().ok_or_else(|| Error::Format("missing ASCII grid rows".into()))?;
            let row = spec.height - 1 - r;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != spec.width {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected {} values, found {}", spec.width, values.len()),
                });
            }
            for (col, v) in values.iter().enumerate() {
                let z: f64 = v.parse().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("bad elevation `{v}`"),
                })?;
                if z != nodata {
                    elevation[row * spec.width + col] = z;
                    valid[row * spec.width + col] = true;
                }
            }
        }
        Ok(Self {
            spec,
            elevation,
            valid,
        })
    }
}

const NODATA: f64 = -9999.0;

/// TIN interpolation of the ground points at every cell center; cells outside the hull are invalid.
pub fn rasterize_dtm(ground: &[Point3], spec: GridSpec) -> Result<DtmRaster> {
    let tin = Tin::build(ground)?;
    Ok(DtmRaster::from_fn(spec, |x, y| tin.interpolate(x, y)))
}

/// RMSE over the cells valid in both rasters.
pub fn dtm_rmse(pred: &DtmRaster, reference: &DtmRaster) -> Result<f64> {
    if pred.spec != reference.spec {
        return Err(Error::Validation("DTM rasters have different grids".into()));
    }
    let (sum, n) = pred
        .elevation
        .iter()
        .zip(&reference.elevation)
        .zip(pred.valid.iter().zip(&reference.valid))
        .filter(|(_, (a, b))| **a && **b)
        .fold((0.0, 0usize), |(s, n), ((p, r), _)| (s + (p - r).powi(2), n + 1));
    if n == 0 {
        return Err(Error::Validation("DTM rasters share no valid cell".into()));
    }
    Ok((sum / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinErrors {
    pub bin: usize,
    pub points: u64,
    pub misclassified: u64,
}

/// Misclassification counts per true HAG bin.
pub fn bin_error_table(
    pred: &[ClassLabel],
    truth: &[ClassLabel],
    bins: &[u8],
    num_bins: usize,
) -> Result<Vec<BinErrors>> {
    if pred.len() != truth.len() || bins.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len().min(bins.len()),
        });
    }
    let mut table: Vec<BinErrors> = (0..num_bins)
        .map(|bin| BinErrors {
            bin,
            points: 0,
            misclassified: 0,
        })
        .collect();
    for ((p, t), &b) in pred.iter().zip(truth).zip(bins) {
        let row = table
            .get_mut(usize::from(b))
            .ok_or_else(|| Error::Validation(format!("HAG bin {b} out of range")))?;
        row.points += 1;
        row.misclassified += u64::from(p != t);
    }
    Ok(table)
}
