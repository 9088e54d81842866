//! Per-patch intermediates on disk.
//!
//! A stage directory holds `manifest.json` plus, per patch, `patch_NNNN.gfb` (the
//! member points) and `patch_NNNN.idx` (one `source_index central_flag` line per
//! member). Prediction directories hold `patch_NNNN.pred` files with one
//! `source_index ground_prob` line per central point. The manifest records the
//! SHA-256 of every file so later stages can detect stale or edited inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compress::CompressedPatch;
use crate::error::{Error, Result};
use crate::io::{read_cloud, write_cloud, CloudFormat, ReadOptions};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Partition,
    Compress,
    Predict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub id: usize,
    pub center: (f64, f64),
    pub members: usize,
    pub central: usize,
    pub files: Vec<String>,
    /// Hex SHA-256 of each entry of `files`, in the same order.
    pub sha256: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: StageKind,
    /// Point count of the source cloud the patches index into.
    pub source_points: usize,
    pub patches: Vec<PatchRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Verifies every recorded file against its hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for rec in &self.patches {
            for (file, expected) in rec.files.iter().zip(&rec.sha256) {
                let actual = file_sha256(&dir.join(file))?;
                if &actual != expected {
                    return Err(Error::Validation(format!(
                        "{file} does not match its manifest hash"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn patch_stem(id: usize) -> String {
    format!("patch_{id:04}")
}

/// Writes member clouds and index masks for a partition or compress stage.
pub fn write_patches(
    dir: &Path,
    stage: StageKind,
    source_points: usize,
    patches: &[CompressedPatch],
) -> Result<Manifest> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(patches.len());
    for p in patches {
        let stem = patch_stem(p.patch_id);
        let cloud_file = format!("{stem}.gfb");
        let idx_file = format!("{stem}.idx");
        write_cloud(&p.cloud, &dir.join(&cloud_file), CloudFormat::PackedBinary)?;
        let mut idx = String::with_capacity(p.member_indices.len() * 10);
        for (i, c) in p.member_indices.iter().zip(&p.central_mask) {
            let _ = writeln!(idx, "{i} {}", u8::from(*c));
        }
        let idx_path = dir.join(&idx_file);
        std::fs::write(&idx_path, idx).map_err(|e| Error::io(&idx_path, e))?;
        records.push(PatchRecord {
            id: p.patch_id,
            center: p.center,
            members: p.member_indices.len(),
            central: p.central_mask.iter().filter(|c| **c).count(),
            sha256: vec![
                file_sha256(&dir.join(&cloud_file))?,
                file_sha256(&idx_path)?,
            ],
            files: vec![cloud_file, idx_file],
        });
    }
    let manifest = Manifest {
        stage,
        source_points,
        patches: records,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

/// Reads a stage directory written by [`write_patches`], checking hashes.
pub fn read_patches(dir: &Path, expected: StageKind) -> Result<(Manifest, Vec<CompressedPatch>)> {
    let manifest = Manifest::load(dir)?;
    if manifest.stage != expected {
        return Err(Error::Validation(format!(
            "{} holds {:?} output, expected {expected:?}",
            dir.display(),
            manifest.stage
        )));
    }
    manifest.verify(dir)?;
    let mut patches = Vec::with_capacity(manifest.patches.len());
    for rec in &manifest.patches {
        let [cloud_file, idx_file] = rec.files.as_slice() else {
            return Err(Error::Format(format!("patch {} lists {} files", rec.id, rec.files.len())));
        };
        let cloud = read_cloud(
            &dir.join(cloud_file),
            CloudFormat::PackedBinary,
            ReadOptions {
                relabel_outliers: false,
            },
        )?;
        let (member_indices, central_mask) = read_index(&dir.join(idx_file), manifest.source_points)?;
        if member_indices.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                actual: member_indices.len(),
            });
        }
        patches.push(CompressedPatch {
            patch_id: rec.id,
            center: rec.center,
            cloud,
            member_indices,
            central_mask,
        });
    }
    Ok((manifest, patches))
}

fn read_index(path: &Path, source_points: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut members = Vec::new();
    let mut mask = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let bad = |message: String| Error::Parse {
            line: n + 1,
            message: format!("{}: {message}", path.display()),
        };
        let mut parts = line.split_whitespace();
        let idx: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad point index".into()))?;
        if idx >= source_points {
            return Err(bad(format!("index {idx} beyond source of {source_points}")));
        }
        let central = match parts.next() {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(bad("central flag must be 0 or 1".into())),
        };
        members.push(idx);
        mask.push(central);
    }
    Ok((members, mask))
}

/// Central-point predictions of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPrediction {
    pub patch_id: usize,
    pub center: (f64, f64),
    pub indices: Vec<usize>,
    pub ground_prob: Vec<f64>,
}

pub fn write_predictions(
    dir: &Path,
    source_points: usize,
    preds: &[PatchPrediction],
) -> Result<Manifest> {
    create_dir(dir)?;
    let mut records = Vec::with_capacity(preds.len());
    for p in preds {
        let file = format!("{}.pred", patch_stem(p.patch_id));
        let path = dir.join(&file);
        let mut body = String::with_capacity(p.indices.len() * 24);
        for (i, prob) in p.indices.iter().zip(&p.ground_prob) {
            let _ = writeln!(body, "{i} {prob}");
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        records.push(PatchRecord {
            id: p.patch_id,
            center: p.center,
            members: p.indices.len(),
            central: p.indices.len(),
            sha256: vec![file_sha256(&path)?],
            files: vec![file],
        });
    }
    let manifest = Manifest {
        stage: StageKind::Predict,
        source_points,
        patches: records,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

pub fn read_predictions(dir: &Path) -> Result<(Manifest, Vec<PatchPrediction>)> {
    let manifest = Manifest::load(dir)?;
    if manifest.stage != StageKind::Predict {
        return Err(Error::Validation(format!(
            "{} does not hold predictions",
            dir.display()
        )));
    }
    manifest.verify(dir)?;
    let mut out = Vec::with_capacity(manifest.patches.len());
    for rec in &manifest.patches {
        let path: PathBuf = dir.join(&rec.files[0]);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut indices = Vec::new();
        let mut ground_prob = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let parsed = (|| {
                let i: usize = parts.next()?.parse().ok()?;
                let p: f64 = parts.next()?.parse().ok()?;
                Some((i, p))
            })();
            let (i, p) = parsed.ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("{}: expected `index probability`", path.display()),
            })?;
            indices.push(i);
            ground_prob.push(p);
        }
        out.push(PatchPrediction {
            patch_id: rec.id,
            center: rec.center,
            indices,
            ground_prob,
        });
    }
    Ok((manifest, out))
}
