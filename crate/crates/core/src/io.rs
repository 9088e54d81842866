//! Reading and writing labeled clouds.
//!
//! Two formats are supported:
//!
//! * `.xyzl` text: an optional header line `#xyzl` or `#xyzl:<channel>,<channel>`
//!   followed by one whitespace-separated record `x y z label [channel values]`
//!   per line. Floats are written in shortest round-trip form, so text
//!   round-trips are exact as well.
//! * `.gfb` binary, all little-endian: magic `GFB1`, `u64` point count, a
//!   channel directory (`u8` entry count, then per entry `u8` name length,
//!   name bytes, `u8` dtype where 0 = f64 and 1 = u8), then `3n` f64
//!   coordinates interleaved as x,y,z, `n` u8 labels, and finally each
//!   channel's `n` values in directory order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{Channel, ClassLabel, LabeledCloud, Point3};
use crate::error::{Error, Result};

pub const GFB_MAGIC: &[u8; 4] = b"GFB1";
const DTYPE_F64: u8 = 0;
const DTYPE_U8: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzlText,
    PackedBinary,
}

impl CloudFormat {
    /// Picks the format from the file extension (`.gfb` is binary, anything else text).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("gfb") => CloudFormat::PackedBinary,
            _ => CloudFormat::XyzlText,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    /// Map label code 0 (outlier) to 1 (non-ground) on ingestion.
    pub relabel_outliers: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            relabel_outliers: true,
        }
    }
}

pub fn read_cloud(path: &Path, format: CloudFormat, opts: ReadOptions) -> Result<LabeledCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut cloud = match format {
        CloudFormat::XyzlText => parse_xyzl(&mut reader, path)?,
        CloudFormat::PackedBinary => decode_gfb(&mut reader, path)?,
    };
    if opts.relabel_outliers {
        let n = cloud.relabel_outliers();
        if n > 0 {
            log::debug!("{}: relabeled {n} outliers as non-ground", path.display());
        }
    }
    cloud.validate()?;
    Ok(cloud)
}

/// Reads a cloud, inferring the format from the extension and relabeling outliers.
pub fn read_cloud_auto(path: &Path) -> Result<LabeledCloud> {
    read_cloud(path, CloudFormat::from_path(path), ReadOptions::default())
}

pub fn write_cloud(cloud: &LabeledCloud, path: &Path, format: CloudFormat) -> Result<()> {
    cloud.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        CloudFormat::XyzlText => format_xyzl(cloud, &mut w),
        CloudFormat::PackedBinary => encode_gfb(cloud, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn write_cloud_auto(cloud: &LabeledCloud, path: &Path) -> Result<()> {
    write_cloud(cloud, path, CloudFormat::from_path(path))
}

fn parse_xyzl<R: BufRead>(reader: &mut R, path: &Path) -> Result<LabeledCloud> {
    let mut channels: Vec<Channel> = Vec::new();
    let mut cloud = LabeledCloud::default();
    let mut chan_values: Vec<Vec<f64>> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            if line_no == 1 {
                channels = parse_header(header, line_no)?;
                chan_values = vec![Vec::new(); channels.len()];
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let expected = 4 + channels.len();
        if fields.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let coord = |i: usize| -> Result<f64> {
            let v: f64 = fields[i].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number {:?}", fields[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate {:?}", fields[i]),
                });
            }
            Ok(v)
        };
        let point = Point3::new(coord(0)?, coord(1)?, coord(2)?);
        let code: u8 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label {:?}", fields[3]),
        })?;
        let label = ClassLabel::from_code(code)
            .map_err(|_| Error::Validation(format!("line {line_no}: unknown label code {code}")))?;
        cloud.points.push(point);
        cloud.labels.push(label);
        for (k, ch) in channels.iter().enumerate() {
            let raw = fields[4 + k];
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {} value {raw:?}", ch.name()),
            })?;
            chan_values[k].push(v);
        }
    }

    for (ch, values) in channels.into_iter().zip(chan_values) {
        match ch {
            Channel::HagMeters => cloud.channels.hag_meters = Some(values),
            Channel::GroundProb => cloud.channels.ground_prob = Some(values),
            Channel::HagBin => {
                let bins = values
                    .into_iter()
                    .map(|v| {
                        if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                            Ok(v as u8)
                        } else {
                            Err(Error::Validation(format!("hag_bin value {v} is not a small integer")))
                        }
                    })
                    .collect::<Result<Vec<u8>>>()?;
                cloud.channels.hag_bin = Some(bins);
            }
        }
    }
    Ok(cloud)
}

fn parse_header(header: &str, line: usize) -> Result<Vec<Channel>> {
    let rest = header.trim().strip_prefix("xyzl").ok_or_else(|| Error::Parse {
        line,
        message: format!("unrecognized header #{header}"),
    })?;
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let list = rest.strip_prefix(':').ok_or_else(|| Error::Parse {
        line,
        message: format!("unrecognized header #{header}"),
    })?;
    list.split(',')
        .filter(|s| !s.is_empty())
        .map(|name| {
            Channel::from_name(name.trim()).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown channel {name:?}"),
            })
        })
        .collect()
}

fn format_xyzl<W: Write>(cloud: &LabeledCloud, w: &mut W) -> std::io::Result<()> {
    let channels = cloud.channels.present();
    if channels.is_empty() {
        writeln!(w, "#xyzl")?;
    } else {
        let names: Vec<&str> = channels.iter().map(|c| c.name()).collect();
        writeln!(w, "#xyzl:{}", names.join(","))?;
    }
    for (i, (p, l)) in cloud.points.iter().zip(&cloud.labels).enumerate() {
        write!(w, "{} {} {} {}", p.x, p.y, p.z, l.code())?;
        for ch in &channels {
            match ch {
                Channel::HagBin => write!(w, " {}", cloud.channels.hag_bin.as_ref().unwrap()[i])?,
                _ => write!(w, " {}", cloud.channels.value(*ch, i).unwrap())?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

fn encode_gfb<W: Write>(cloud: &LabeledCloud, w: &mut W) -> std::io::Result<()> {
    w.write_all(GFB_MAGIC)?;
    w.write_all(&(cloud.len() as u64).to_le_bytes())?;
    let channels = cloud.channels.present();
    w.write_all(&[channels.len() as u8])?;
    for ch in &channels {
        let name = ch.name().as_bytes();
        w.write_all(&[name.len() as u8])?;
        w.write_all(name)?;
        w.write_all(&[if *ch == Channel::HagBin { DTYPE_U8 } else { DTYPE_F64 }])?;
    }
    for p in &cloud.points {
        for v in [p.x, p.y, p.z] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let labels: Vec<u8> = cloud.labels.iter().map(|l| l.code()).collect();
    w.write_all(&labels)?;
    for ch in &channels {
        match ch {
            Channel::HagBin => w.write_all(cloud.channels.hag_bin.as_ref().unwrap())?,
            Channel::HagMeters | Channel::GroundProb => {
                let values = if *ch == Channel::HagMeters {
                    cloud.channels.hag_meters.as_ref()
                } else {
                    cloud.channels.ground_prob.as_ref()
                };
                for v in values.unwrap() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn decode_gfb<R: Read>(reader: &mut R, path: &Path) -> Result<LabeledCloud> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut cur = ByteCursor { bytes: &bytes, pos: 0 };

    if cur.take(4)? != GFB_MAGIC {
        return Err(Error::Format("missing GFB1 magic".into()));
    }
    let n = cur.u64()? as usize;
    let n_channels = cur.u8()? as usize;
    let mut directory = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = cur.u8()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("channel name is not utf-8".into()))?;
        let ch = Channel::from_name(name)
            .ok_or_else(|| Error::Format(format!("unknown channel {name:?}")))?;
        let dtype = cur.u8()?;
        let expected = if ch == Channel::HagBin { DTYPE_U8 } else { DTYPE_F64 };
        if dtype != expected {
            return Err(Error::Format(format!("channel {name} has dtype {dtype}")));
        }
        directory.push(ch);
    }

    let mut cloud = LabeledCloud {
        points: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        ..Default::default()
    };
    for _ in 0..n {
        cloud.points.push(Point3::new(cur.f64()?, cur.f64()?, cur.f64()?));
    }
    for (i, &code) in cur.take(n)?.iter().enumerate() {
        let label = ClassLabel::from_code(code)
            .map_err(|_| Error::Validation(format!("record {i}: unknown label code {code}")))?;
        cloud.labels.push(label);
    }
    for ch in directory {
        match ch {
            Channel::HagBin => cloud.channels.hag_bin = Some(cur.take(n)?.to_vec()),
            Channel::HagMeters | Channel::GroundProb => {
                let values = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
                if ch == Channel::HagMeters {
                    cloud.channels.hag_meters = Some(values);
                } else {
                    cloud.channels.ground_prob = Some(values);
                }
            }
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after {n} records",
            bytes.len() - cur.pos
        )));
    }
    Ok(cloud)
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_text(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("c.xyzl");
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn single_ground_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "1.0 2.0 3.0 2\n");
        let c = read_cloud(&p, CloudFormat::XyzlText, ReadOptions::default()).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.labels, vec![ClassLabel::Ground]);
    }

    #[test]
    fn outlier_relabel_toggle() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "1.0 2.0 3.0 0\n");
        let on = read_cloud(&p, CloudFormat::XyzlText, ReadOptions::default()).unwrap();
        assert_eq!(on.labels, vec![ClassLabel::NonGround]);
        let off = read_cloud(
            &p,
            CloudFormat::XyzlText,
            ReadOptions {
                relabel_outliers: false,
            },
        )
        .unwrap();
        assert_eq!(off.labels, vec![ClassLabel::Outlier]);
    }

    #[test]
    fn nan_coordinate_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "#xyzl\n1.0 2.0 3.0 2\n1.0 2.0 nan 2\n");
        match read_cloud_auto(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "1 2 3 7\n");
        assert!(matches!(read_cloud_auto(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "1 2 3 2\n1 2 3\n");
        assert!(matches!(read_cloud_auto(&p), Err(Error::Parse { line: 2, .. })));
    }

    fn sample() -> LabeledCloud {
        LabeledCloud::new(
            vec![
                Point3::new(0.1, -2.5, 1e-7),
                Point3::new(500_000.123_456_789, 4_000_000.987_654_321, 123.456),
                Point3::new(-3.0, 7.0, 0.0),
            ],
            vec![ClassLabel::Ground, ClassLabel::NonGround, ClassLabel::Ground],
        )
        .unwrap()
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.gfb");
        let c = sample();
        write_cloud(&c, &path, CloudFormat::PackedBinary).unwrap();
        assert_eq!(read_cloud_auto(&path).unwrap(), c);
    }

    #[test]
    fn empty_cloud_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("e.xyzl");
        let bin = dir.path().join("e.gfb");
        write_cloud_auto(&LabeledCloud::default(), &text).unwrap();
        write_cloud_auto(&LabeledCloud::default(), &bin).unwrap();
        assert_eq!(std::fs::read_to_string(&text).unwrap(), "#xyzl\n");
        assert_eq!(std::fs::read(&bin).unwrap().len(), 4 + 8 + 1);
        assert!(read_cloud_auto(&text).unwrap().is_empty());
        assert!(read_cloud_auto(&bin).unwrap().is_empty());
    }

    #[test]
    fn channels_preserved_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = sample();
        c.channels.ground_prob = Some(vec![0.25, 1.0, 0.0]);
        c.channels.hag_meters = Some(vec![0.0, 3.5, 0.125]);
        c.channels.hag_bin = Some(vec![0, 5, 1]);
        for name in ["c.xyzl", "c.gfb"] {
            let path = dir.path().join(name);
            write_cloud_auto(&c, &path).unwrap();
            assert_eq!(read_cloud_auto(&path).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn truncated_binary_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.gfb");
        write_cloud_auto(&sample(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(read_cloud_auto(&path), Err(Error::Format(_))));
    }
}
