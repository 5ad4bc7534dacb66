//! Evaluation protocols: depth after scale/shift alignment, trajectory error
//! after similarity alignment, and confusion-matrix segmentation scores.

pub mod depth;
pub mod segmentation;
pub mod trajectory;

pub use depth::{align_depth_scale_shift, depth_metrics, DepthScores, ScaleShift};
pub use segmentation::{
    seg_scores, seg_scores_with, static_baseline, AbsentClassPolicy, ConfusionMatrix, SegScores,
};
pub use trajectory::{trajectory_scores, umeyama_align, Similarity, TrajScores};

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
