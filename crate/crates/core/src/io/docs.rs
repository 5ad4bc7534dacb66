//! JSON documents consumed by the planning and motion subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::convert::tensor_to_mask;
use super::manifest::read_json;
use super::tensor::read_tensor;
use crate::error::{Error, Result};
use crate::motion::{InstanceTrack, Keypoint};
use crate::planning::{PlanTrajectory, SceneSpec};

/// One tracked instance; mask paths are relative to the tracks file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackEntry {
    pub instance_id: u32,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_masks: Option<Vec<String>>,
    /// `keypoints[t][k]`
    pub keypoints: Vec<Vec<Keypoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksFile {
    pub tracks: Vec<TrackEntry>,
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<InstanceTrack>> {
    let path = path.as_ref();
    let file: TracksFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mask = |rel: &str| read_tensor(dir.join(rel)).and_then(|t| tensor_to_mask(&t));
    file.tracks
        .into_iter()
        .map(|e| {
            let first = mask(&e.mask)?;
            let frames = e
                .frame_masks
                .map(|v| v.iter().map(|r| mask(r)).collect::<Result<Vec<_>>>())
                .transpose()?;
            InstanceTrack::new(e.instance_id, first, frames, e.keypoints)
        })
        .collect()
}

/// Ground-truth futures for anchor clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuturesFile {
    pub trajectories: Vec<PlanTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub plan: PlanTrajectory,
    pub scene: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioFile {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.scenarios.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "duplicate scenario id {}",
                w[0]
            )));
        }
        Ok(())
    }
}
