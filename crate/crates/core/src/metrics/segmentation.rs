use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, validate_labels, LabelMap, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub pa: f64,
    pub miou: f64,
    pub mdice: f64,
    pub fwiou: f64,
}

/// How classes that appear in neither prediction nor ground truth enter the
/// mIoU / mDice means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentClassPolicy {
    /// Skip them (the mean runs over present classes only).
    #[default]
    Exclude,
    /// Count them as IoU = Dice = 0.
    Zero,
    /// Count them as IoU = Dice = 1.
    One,
}

/// `counts[gt][pred]` pixel tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_maps(pred: &LabelMap, gt: &LabelMap) -> Result<Self> {
        let mut cm = Self::new();
        cm.accumulate(pred, gt)?;
        Ok(cm)
    }

    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        ensure_same_shape(pred, gt, "label maps")?;
        validate_labels(pred)?;
        validate_labels(gt)?;
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            self.counts[g as usize][p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for g in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                self.counts[g][p] += other.counts[g][p];
            }
        }
    }

    pub fn counts(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class `(tp, fp, fn)`.
    pub fn class_stats(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let gt_c: u64 = self.counts[c].iter().sum();
        let pred_c: u64 = self.counts.iter().map(|row| row[c]).sum();
        (tp, pred_c - tp, gt_c - tp)
    }

    /// IoU per class, `None` for classes absent from both maps.
    pub fn class_iou(&self) -> [Option<f64>; NUM_CLASSES] {
        std::array::from_fn(|c| {
            let (tp, fp, fn_) = self.class_stats(c);
            let union = tp + fp + fn_;
            (union > 0).then(|| tp as f64 / union as f64)
        })
    }

    pub fn scores(&self, policy: AbsentClassPolicy) -> Result<SegScores> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Degenerate("empty confusion matrix".into()));
        }
        let total_f = total as f64;
        let trace: u64 = (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum();

        let (mut iou_sum, mut dice_sum, mut n) = (0.0, 0.0, 0usize);
        let mut fwiou = 0.0;
        for c in 0..NUM_CLASSES {
            let (tp, fp, fn_) = self.class_stats(c);
            let union = tp + fp + fn_;
            if union == 0 {
                match policy {
                    AbsentClassPolicy::Exclude => {}
                    AbsentClassPolicy::Zero => n += 1,
                    AbsentClassPolicy::One => {
                        iou_sum += 1.0;
                        dice_sum += 1.0;
                        n += 1;
                    }
                }
                continue;
            }
            let iou = tp as f64 / union as f64;
            let dice = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
            iou_sum += iou;
            dice_sum += dice;
            n += 1;
            let gt_c = (tp + fn_) as f64;
            fwiou += gt_c * iou;
        }
        Ok(SegScores {
            pa: trace as f64 / total_f,
            miou: iou_sum / n as f64,
            mdice: dice_sum / n as f64,
            // one division at the end keeps a perfect prediction at exactly 1
            fwiou: fwiou / total_f,
        })
    }
}

pub fn seg_scores(pred: &LabelMap, gt: &LabelMap) -> Result<SegScores> {
    seg_scores_with(pred, gt, AbsentClassPolicy::default())
}

pub fn seg_scores_with(
    pred: &LabelMap,
    gt: &LabelMap,
    policy: AbsentClassPolicy,
) -> Result<SegScores> {
    ConfusionMatrix::from_maps(pred, gt)?.scores(policy)
}

/// Uses ground-truth frame `split_index - 1` as the prediction for every later
/// frame and scores the pooled confusion matrix.
pub fn static_baseline(seq_gt: &[LabelMap], split_index: usize) -> Result<SegScores> {
    if split_index == 0 || split_index >= seq_gt.len() {
        return Err(Error::InvalidInput(format!(
            "split index {split_index} must lie in [1, {})",
            seq_gt.len()
        )));
    }
    let last_seen = &seq_gt[split_index - 1];
    let mut cm = ConfusionMatrix::new();
    for later in &seq_gt[split_index..] {
        cm.accumulate(last_seen, later)?;
    }
    cm.scores(AbsentClassPolicy::default())
}
