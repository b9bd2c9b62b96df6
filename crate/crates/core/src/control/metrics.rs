//! Confusion counts and detection metrics. DDoS is the positive class.

use std::fmt;

use crate::traffic::ClassLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: ClassLabel, truth: ClassLabel) {
        *self = update_confusion(*self, predicted, truth);
    }
}

pub fn update_confusion(
    mut c: ConfusionCounts,
    predicted: ClassLabel,
    truth: ClassLabel,
) -> ConfusionCounts {
    match (predicted, truth) {
        (ClassLabel::DDoS, ClassLabel::DDoS) => c.tp += 1,
        (ClassLabel::Benign, ClassLabel::Benign) => c.tn += 1,
        (ClassLabel::DDoS, ClassLabel::Benign) => c.fp += 1,
        (ClassLabel::Benign, ClassLabel::DDoS) => c.fn_ += 1,
    }
    c
}

/// Each metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub selectivity: Option<f64>,
    pub f1_score: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: &ConfusionCounts) -> MetricsReport {
    MetricsReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        recall: ratio(c.tp, c.tp + c.fn_),
        selectivity: ratio(c.tn, c.tn + c.fp),
        f1_score: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

impl MetricsReport {
    /// `metrics,<acc>,<rec>,<sel>,<f1>`; undefined values print as `undefined`.
    pub fn machine_line(&self) -> String {
        format!(
            "metrics,{},{},{},{}",
            show(self.accuracy),
            show(self.recall),
            show(self.selectivity),
            show(self.f1_score)
        )
    }

    pub fn parse_machine_line(line: &str) -> Option<Self> {
        let mut parts = line.trim().split(',');
        if parts.next()? != "metrics" {
            return None;
        }
        let mut next = || -> Option<Option<f64>> {
            match parts.next()? {
                "undefined" => Some(None),
                v => v.parse().ok().map(Some),
            }
        };
        let report = MetricsReport {
            accuracy: next()?,
            recall: next()?,
            selectivity: next()?,
            f1_score: next()?,
        };
        parts.next().is_none().then_some(report)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy:    {}", show(self.accuracy))?;
        writeln!(f, "recall:      {}", show(self.recall))?;
        writeln!(f, "selectivity: {}", show(self.selectivity))?;
        write!(f, "f1-score:    {}", show(self.f1_score))
    }
}
