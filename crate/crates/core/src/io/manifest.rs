//! JSON sequence manifests pointing at per-frame tensor files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::convert::*;
use super::tensor::{read_tensor, write_tensor};
use crate::error::{Error, Result};
use crate::geometry::{Frame, FrameSequence};

pub const FRAME_RATES_HZ: [u32; 3] = [2, 5, 10];

/// Relative paths (from the manifest's directory) of one frame's tensors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point_map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_map: Option<String>,
}

impl FrameEntry {
    fn paths(&self) -> impl Iterator<Item = (&'static str, &String)> {
        [
            ("point_map", &self.point_map),
            ("pose", &self.pose),
            ("semantic", &self.semantic),
            ("confidence", &self.confidence),
            ("motion", &self.motion),
            ("depth", &self.depth),
            ("label_map", &self.label_map),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub num_observed: usize,
    pub num_future: usize,
    pub frame_rate_hz: u32,
    pub frames: Vec<FrameEntry>,
    /// Set by `normalize`: the mean point norm the geometry was divided by.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization_scale: Option<f64>,
}

impl SequenceManifest {
    /// Structural checks that do not touch the file system.
    pub fn validate(&self) -> Result<()> {
        if !FRAME_RATES_HZ.contains(&self.frame_rate_hz) {
            return Err(Error::Manifest(format!(
                "{}: frame_rate_hz must be one of {FRAME_RATES_HZ:?}, got {}",
                self.sequence_id, self.frame_rate_hz
            )));
        }
        if self.num_observed == 0 {
            return Err(Error::Manifest(format!(
                "{}: num_observed must be >= 1",
                self.sequence_id
            )));
        }
        if self.frames.len() != self.num_observed + self.num_future {
            return Err(Error::Manifest(format!(
                "{}: {} + {} frames declared but {} listed",
                self.sequence_id,
                self.num_observed,
                self.num_future,
                self.frames.len()
            )));
        }
        Ok(())
    }
}

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestFile {
    pub manifest: SequenceManifest,
    pub dir: PathBuf,
}

impl ManifestFile {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Reads and validates a manifest, including that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ManifestFile> {
    let path = path.as_ref();
    let manifest: SequenceManifest = read_json(path)?;
    manifest.validate()?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mf = ManifestFile { manifest, dir };
    for (i, f) in mf.manifest.frames.iter().enumerate() {
        for (kind, rel) in f.paths() {
            if !mf.resolve(rel).is_file() {
                return Err(Error::Manifest(format!(
                    "{}: frame {i} {kind} file {rel} not found",
                    mf.manifest.sequence_id
                )));
            }
        }
    }
    Ok(mf)
}

fn load_opt<T>(
    mf: &ManifestFile,
    rel: &Option<String>,
    f: impl Fn(&super::tensor::Tensor) -> Result<T>,
) -> Result<Option<T>> {
    rel.as_ref()
        .map(|r| read_tensor(mf.resolve(r)).and_then(|t| f(&t)))
        .transpose()
}

/// Loads every referenced tensor of a manifest into a frame sequence.
pub fn load_sequence(mf: &ManifestFile) -> Result<FrameSequence> {
    let mut frames = Vec::with_capacity(mf.manifest.frames.len());
    for e in &mf.manifest.frames {
        frames.push(Frame {
            pose: load_opt(mf, &e.pose, tensor_to_pose)?,
            point_map: load_opt(mf, &e.point_map, tensor_to_point_map)?,
            semantic: load_opt(mf, &e.semantic, tensor_to_semantic)?,
            confidence: load_opt(mf, &e.confidence, tensor_to_real_grid)?,
            motion: load_opt(mf, &e.motion, tensor_to_motion)?,
            depth: load_opt(mf, &e.depth, tensor_to_depth)?,
            labels: load_opt(mf, &e.label_map, tensor_to_labels)?,
        });
    }
    FrameSequence::new(mf.manifest.num_observed, mf.manifest.num_future, frames)
}

/// Writes every modality of `seq` as `frame_{i:04}_{kind}.lfgt` under `dir`
/// plus `manifest.json`, and returns the manifest path.
pub fn write_sequence(
    dir: impl AsRef<Path>,
    sequence_id: &str,
    frame_rate_hz: u32,
    seq: &FrameSequence,
    normalization_scale: Option<f64>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let mut e = FrameEntry::default();
        let put = |kind: &str, t: super::tensor::Tensor| -> Result<Option<String>> {
            let name = format!("frame_{i:04}_{kind}.lfgt");
            write_tensor(&t, dir.join(&name))?;
            Ok(Some(name))
        };
        if let Some(p) = &f.pose {
            e.pose = put("pose", pose_to_tensor(p))?;
        }
        if let Some(p) = &f.point_map {
            e.point_map = put("points", point_map_to_tensor(p))?;
        }
        if let Some(s) = &f.semantic {
            e.semantic = put("semantic", semantic_to_tensor(s))?;
        }
        if let Some(c) = &f.confidence {
            e.confidence = put("confidence", real_grid_to_tensor(c))?;
        }
        if let Some(m) = &f.motion {
            e.motion = put("motion", motion_to_tensor(m))?;
        }
        if let Some(d) = &f.depth {
            e.depth = put("depth", depth_to_tensor(d))?;
        }
        if let Some(l) = &f.labels {
            e.label_map = put("labels", labels_to_tensor(l))?;
        }
        entries.push(e);
    }
    let manifest = SequenceManifest {
        sequence_id: sequence_id.to_string(),
        num_observed: seq.num_observed(),
        num_future: seq.num_future(),
        frame_rate_hz,
        frames: entries,
        normalization_scale,
    };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    super::write_json(&path, &manifest)?;
    Ok(path)
}
