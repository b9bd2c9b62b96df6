//! Feature extraction from reported sums.
//!
//! The data plane only ships packet counts, sums and sums of squares. The
//! mean and standard deviation are recovered here through
//!
//! ```text
//! mean = Σx / (n - 1)
//! std  = sqrt((Σx² - 2·mean·Σx + n·mean²) / (n - 1))
//! ```
//!
//! Both use the `(n - 1)` denominator, including the mean. Flows with
//! `n <= 1` get 0 for the affected feature.

use crate::codec::FlowRecord;
use crate::traffic::{ClassLabel, FlowKey};

pub const FEATURE_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTuple {
    /// Flow duration, µs.
    pub f1_duration: f64,
    /// Standard deviation of inter-arrival times, µs.
    pub f2_iat_std: f64,
    /// Average payload size, bytes.
    pub f3_avg_pkt_size: f64,
    /// Standard deviation of BWD payload sizes, bytes.
    pub f4_bwd_len_std: f64,
    pub key: FlowKey,
    pub label: Option<ClassLabel>,
}

impl FeatureTuple {
    pub fn new(values: [f64; FEATURE_COUNT], label: Option<ClassLabel>) -> Self {
        FeatureTuple {
            f1_duration: values[0],
            f2_iat_std: values[1],
            f3_avg_pkt_size: values[2],
            f4_bwd_len_std: values[3],
            key: FlowKey::ZERO,
            label,
        }
    }

    pub fn values(&self) -> [f64; FEATURE_COUNT] {
        [
            self.f1_duration,
            self.f2_iat_std,
            self.f3_avg_pkt_size,
            self.f4_bwd_len_std,
        ]
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.label = Some(label);
        self
    }
}

/// Mean as computed from a sum over `n` values, `sum / (n - 1)`.
pub fn mean_from_sum(n: f64, sum: f64) -> Option<f64> {
    (n > 1.0).then(|| sum / (n - 1.0))
}

/// Standard deviation from `n`, `Σx` and `Σx²`; 0 when `n <= 1`.
pub fn std_from_sums(n: f64, sum: f64, sq_sum: f64) -> f64 {
    match mean_from_sum(n, sum) {
        None => 0.0,
        Some(mean) => {
            let radicand = (sq_sum - 2.0 * mean * sum + n * mean * mean) / (n - 1.0);
            radicand.max(0.0).sqrt()
        }
    }
}

pub fn compute_features(rec: &FlowRecord) -> FeatureTuple {
    let n_bidir = rec.total_pkts() as f64;
    let n_bwd = f64::from(rec.s3_tot_bwd_pkt);
    let len_total = f64::from(rec.s4_len_fwd) + f64::from(rec.s5_len_bwd);
    FeatureTuple {
        f1_duration: f64::from(rec.f1_duration_us),
        f2_iat_std: std_from_sums(
            n_bidir,
            f64::from(rec.s7_iat_sum),
            rec.s8_iat_sq_sum as f64,
        ),
        f3_avg_pkt_size: mean_from_sum(n_bidir, len_total).unwrap_or(0.0),
        f4_bwd_len_std: std_from_sums(
            n_bwd,
            f64::from(rec.s5_len_bwd),
            rec.s6_len_bwd_sq as f64,
        ),
        key: rec.key,
        label: None,
    }
}
