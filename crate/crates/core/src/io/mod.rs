//! File formats: the binary tensor container, tensor conversions for every
//! grid type, sequence manifests, run configuration and JSON documents.

pub mod config;
pub mod convert;
pub mod docs;
pub mod manifest;
pub mod tensor;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::Config;
pub use manifest::{
    load_manifest, load_sequence, write_sequence, FrameEntry, ManifestFile, SequenceManifest,
};
pub use tensor::{
    decode, encode, read_tensor, write_atomic, write_tensor, DType, Tensor, TensorData,
};

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same `f64`.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize result: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}
