//! Dense per-pixel containers shared by the metric, loss and motion modules.
//!
//! All grids are row-major: pixel `(x, y)` lives at `y * width + x`.

use crate::error::{Error, Result};

/// Number of semantic classes.
pub const NUM_CLASSES: usize = 7;

/// Class order used by every per-class table in the crate.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "road",
    "vehicle",
    "person",
    "traffic_light",
    "traffic_sign",
    "sky",
    "background",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }
}

impl<T> Grid<T> {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Per-pixel class index in `[0, 7)`.
pub type LabelMap = Grid<u8>;

/// Per-pixel reliability in `[0, 1]`.
pub type ConfidenceMap = Grid<f64>;

/// Per-pixel probability that the pixel belongs to an independently moving object.
pub type MotionMask = Grid<f64>;

/// Binary per-pixel mask.
pub type Mask = Grid<bool>;

pub fn validate_labels(labels: &LabelMap) -> Result<()> {
    if let Some(bad) = labels
        .as_slice()
        .iter()
        .find(|&&c| c as usize >= NUM_CLASSES)
    {
        return Err(Error::InvalidInput(format!(
            "label {bad} outside [0, {NUM_CLASSES})"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_shape<A, B>(a: &Grid<A>, b: &Grid<B>, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )))
    }
}

/// Per-pixel class probabilities, stored channel-last (`H x W x 7`).
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    height: usize,
    width: usize,
    probs: Vec<f64>,
}

impl SemanticMap {
    pub fn new(height: usize, width: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != height * width * NUM_CLASSES {
            return Err(Error::ShapeMismatch(format!(
                "semantic map {height}x{width}x{NUM_CLASSES} needs {} values, got {}",
                height * width * NUM_CLASSES,
                probs.len()
            )));
        }
        Ok(Self {
            height,
            width,
            probs,
        })
    }

    /// Hard one-hot encoding of a label map.
    pub fn one_hot(labels: &LabelMap) -> Result<Self> {
        validate_labels(labels)?;
        let mut probs = vec![0.0; labels.len() * NUM_CLASSES];
        for (i, &c) in labels.as_slice().iter().enumerate() {
            probs[i * NUM_CLASSES + c as usize] = 1.0;
        }
        Self::new(labels.height(), labels.width(), probs)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.probs[index * NUM_CLASSES..(index + 1) * NUM_CLASSES]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    /// Arg-max label per pixel; lowest class index wins ties.
    pub fn argmax(&self) -> LabelMap {
        let data = self
            .probs
            .chunks_exact(NUM_CLASSES)
            .map(|px| {
                let mut best = 0;
                for c in 1..NUM_CLASSES {
                    if px[c] > px[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        Grid {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// Metric depth with an explicit validity grid. Valid depths are finite and
/// strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, depth: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = height * width;
        if depth.len() != n || valid.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "depth map {height}x{width}: {} depths, {} validity flags",
                depth.len(),
                valid.len()
            )));
        }
        if let Some((i, d)) = depth
            .iter()
            .zip(&valid)
            .enumerate()
            .find_map(|(i, (&d, &v))| (v && !(d.is_finite() && d > 0.0)).then_some((i, d)))
        {
            return Err(Error::InvalidInput(format!(
                "valid depth at pixel {i} is {d}, must be finite and positive"
            )));
        }
        Ok(Self {
            height,
            width,
            depth,
            valid,
        })
    }

    /// Marks every finite, strictly positive entry valid.
    pub fn from_raw(height: usize, width: usize, depth: Vec<f64>) -> Result<Self> {
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Self::new(height, width, depth, valid)
    }

    /// Skips the positivity check. Used for aligned predictions, where a
    /// poor fit can legitimately push values to zero or below.
    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        depth: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(depth.len(), height * width);
        debug_assert_eq!(valid.len(), height * width);
        Self {
            height,
            width,
            depth,
            valid,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub(crate) fn ensure_same_shape(&self, other: &DepthMap) -> Result<()> {
        if self.height == other.height && self.width == other.width {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "depth maps {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )))
        }
    }
}
