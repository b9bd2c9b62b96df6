//! Z-score standardization and a k-nearest-neighbor classifier.

use crate::control::features::{FeatureTuple, FEATURE_COUNT};
use crate::error::ModelError;
use crate::traffic::ClassLabel;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    /// Features whose training variance was zero; their std is set to 1.
    pub guarded: [bool; FEATURE_COUNT],
}

impl Standardizer {
    /// Per-feature mean and population standard deviation.
    pub fn fit(tuples: &[FeatureTuple]) -> Result<Self, ModelError> {
        if tuples.len() < 2 {
            return Err(ModelError::TooFewTuples {
                needed: 2,
                got: tuples.len(),
            });
        }
        let n = tuples.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for t in tuples {
            for (m, v) in mean.iter_mut().zip(t.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut var = [0.0; FEATURE_COUNT];
        for t in tuples {
            for ((s, v), m) in var.iter_mut().zip(t.values()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = [1.0; FEATURE_COUNT];
        let mut guarded = [false; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            let s = (var[i] / n).sqrt();
            if s > 0.0 && s.is_finite() {
                std[i] = s;
            } else {
                guarded[i] = true;
            }
        }
        Ok(Standardizer { mean, std, guarded })
    }

    pub fn from_parts(mean: [f64; FEATURE_COUNT], std: [f64; FEATURE_COUNT]) -> Self {
        let guarded = std.map(|s| s == 1.0);
        Standardizer { mean, std, guarded }
    }

    pub fn transform(&self, values: [f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            out[i] = (values[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// A standardized training point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPoint {
    pub z: [f64; FEATURE_COUNT],
    pub label: ClassLabel,
}

/// Instance-based model: the standardizer plus every standardized training tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    standardizer: Standardizer,
    points: Vec<TrainingPoint>,
}

impl KnnModel {
    pub fn fit(tuples: &[FeatureTuple], k: usize) -> Result<Self, ModelError> {
        let standardizer = Standardizer::fit(tuples)?;
        let points = tuples
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(TrainingPoint {
                    z: standardizer.transform(t.values()),
                    label: t.label.ok_or(ModelError::Unlabeled(i))?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        for class in [ClassLabel::Benign, ClassLabel::DDoS] {
            if !points.iter().any(|p| p.label == class) {
                return Err(ModelError::SingleClass(class));
            }
        }
        Self::from_parts(k, standardizer, points)
    }

    pub fn from_parts(
        k: usize,
        standardizer: Standardizer,
        points: Vec<TrainingPoint>,
    ) -> Result<Self, ModelError> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(ModelError::BadK(k));
        }
        if points.len() < k {
            return Err(ModelError::TooFewTuples {
                needed: k,
                got: points.len(),
            });
        }
        Ok(KnnModel {
            k,
            standardizer,
            points,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn points(&self) -> &[TrainingPoint] {
        &self.points
    }

    /// Indexes of the `k` nearest training points, nearest first. Equal
    /// distances resolve to the lower training index.
    pub fn neighbors(&self, t: &FeatureTuple) -> Vec<usize> {
        let q = self.standardizer.transform(t.values());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.iter().enumerate() {
            let d = squared_distance(&q, &p.z);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            // Insert after every entry at the same distance: earlier indexes win.
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, t: &FeatureTuple) -> ClassLabel {
        let nn = self.neighbors(t);
        let ddos = nn
            .iter()
            .filter(|&&i| self.points[i].label == ClassLabel::DDoS)
            .count();
        if 2 * ddos > nn.len() {
            ClassLabel::DDoS
        } else {
            ClassLabel::Benign
        }
    }

    /// Classifies a batch, in parallel when the `parallel` feature is on.
    pub fn predict_batch(&self, tuples: &[FeatureTuple]) -> Vec<ClassLabel> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            tuples.par_iter().map(|t| self.predict(t)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.predict_batch_sequential(tuples)
        }
    }

    pub fn predict_batch_sequential(&self, tuples: &[FeatureTuple]) -> Vec<ClassLabel> {
        tuples.iter().map(|t| self.predict(t)).collect()
    }
}

/// Free-function form of [`KnnModel::predict`].
pub fn knn_predict(model: &KnnModel, t: &FeatureTuple) -> ClassLabel {
    model.predict(t)
}

fn squared_distance(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
