//! Confusion matrices, IoU and the target-discrepancy curve.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::diffcore::{Graph, Scalar, Tensor};
use crate::losses;
use crate::models::CaliModel;
use crate::{Error, Result};

/// `K×K` counts; rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Builds from row-major counts.
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Dimension {
                op: "confusion matrix",
                axis: "entries",
                expected: classes * classes,
                got: counts.len(),
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one pixel pair per position.
    pub fn accumulate(&mut self, pred: &[u8], truth: &[u8]) -> Result<()> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension {
                op: "accumulate",
                axis: "pixels",
                expected: truth.len(),
                got: pred.len(),
            });
        }
        let k = self.classes;
        if let Some(bad) = pred.iter().chain(truth).find(|&&l| l as usize >= k) {
            return Err(Error::Validation(format!("label {bad} out of range for {k} classes")));
        }
        for (&p, &t) in pred.iter().zip(truth) {
            self.counts[t as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Dimension {
                op: "merge",
                axis: "classes",
                expected: self.classes,
                got: other.classes,
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `tp / (tp + fp + fn)`, or `None` when the class never occurs in
    /// either truth or prediction.
    pub fn iou(&self, class: usize) -> Option<f64> {
        let tp = self.get(class, class);
        let row: u64 = (0..self.classes).map(|p| self.get(class, p)).sum();
        let col: u64 = (0..self.classes).map(|t| self.get(t, class)).sum();
        let denom = row + col - tp;
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// Mean IoU over `evaluated`, skipping absent classes.
    pub fn miou_star(&self, evaluated: &[usize]) -> Result<f64> {
        if evaluated.is_empty() {
            return Err(Error::Usage("no classes to evaluate".into()));
        }
        let vals: Vec<f64> = evaluated.iter().filter_map(|&c| self.iou(c)).collect();
        if vals.is_empty() {
            return Err(Error::Undefined("every evaluated class is absent".into()));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// mIoU over every class.
    pub fn miou(&self) -> Result<f64> {
        let all: Vec<usize> = (0..self.classes).collect();
        self.miou_star(&all)
    }
}

/// Segments every labeled sample of `data` with the averaged heads.
pub fn evaluate<T: Scalar>(model: &CaliModel<T>, data: &Dataset) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.classes());
    for s in &data.samples {
        let truth = s
            .label
            .as_ref()
            .ok_or_else(|| Error::Usage("evaluation needs labeled samples".into()))?;
        let pred = model.segment(&s.image.cast())?;
        cm.accumulate(&pred, truth)?;
    }
    Ok(cm)
}

/// Average over `images` of the head discrepancy on each image.
pub fn mean_target_discrepancy<T: Scalar>(model: &CaliModel<T>, images: &[Tensor<f32>]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::Usage("empty target sample".into()));
    }
    let mut total = 0.0;
    for img in images {
        let (p1, p2) = model.infer_probs(&img.cast())?;
        let mut g = Graph::new();
        let a = g.constant(p1);
        let b = g.constant(p2);
        let d = losses::discrepancy(&mut g, a, b)?;
        total += losses::scalar(&g, d);
    }
    Ok(total / images.len() as f64)
}
