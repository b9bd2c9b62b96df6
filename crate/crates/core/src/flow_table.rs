//! Hash-indexed register matrix and register sizing.
//!
//! Each lane owns one [`MatrixState`]: `M` columns of per-direction counters,
//! bidirectional aggregates homed at a flow's forward column, and the key
//! that instantiated each column. Columns are addressed by the FNV-1a digest
//! of the 13-byte key serialization, masked to `M` (a power of two).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::RegisterError;
use crate::traffic::FlowKey;

const FNV_OFFSET: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterConfig {
    m_cells: usize,
}

impl RegisterConfig {
    pub const LANES: usize = 2;

    pub fn new(m_cells: usize) -> Result<Self, RegisterError> {
        if m_cells < 2 || !m_cells.is_power_of_two() {
            return Err(RegisterError::NotPowerOfTwo(m_cells));
        }
        Ok(RegisterConfig { m_cells })
    }

    pub fn m_cells(&self) -> usize {
        self.m_cells
    }

    fn mask(&self) -> u32 {
        (self.m_cells - 1) as u32
    }
}

/// Column index into a register, always `< M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowIndex(u32);

impl FlowIndex {
    pub fn value(self) -> usize {
        self.0 as usize
    }
}

pub fn fnv1a_32(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u32::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn hash_index(key: &FlowKey, cfg: RegisterConfig) -> FlowIndex {
    FlowIndex(fnv1a_32(&key.to_bytes()) & cfg.mask())
}

/// `(hash(key), hash(reverse(key)))`.
pub fn paired_indexes(key: &FlowKey, cfg: RegisterConfig) -> (FlowIndex, FlowIndex) {
    (hash_index(key, cfg), hash_index(&key.reverse(), cfg))
}

/// `C = 1 - (1 - 1/M)^N`: the chance that at least one of `n` keys lands in a
/// given cell of an `m`-cell register.
pub fn collision_probability(m: usize, n: u64) -> Result<f64, RegisterError> {
    if m == 0 {
        return Err(RegisterError::ZeroCells);
    }
    if n == 0 {
        return Ok(0.0);
    }
    let m = m as f64;
    // ln1p/exp_m1 keep precision for large M where 1/M underflows against 1.
    Ok(-((n as f64) * (-1.0 / m).ln_1p()).exp_m1())
}

/// Smallest power-of-two `M >= 2` with `collision_probability(M, n) <= c_max`.
pub fn required_register_size(n: u64, c_max: f64) -> Result<usize, RegisterError> {
    if !(c_max > 0.0 && c_max < 1.0) {
        return Err(RegisterError::BadTarget(c_max));
    }
    let mut m: usize = 2;
    loop {
        if collision_probability(m, n)? <= c_max {
            return Ok(m);
        }
        m = m
            .checked_mul(2)
            .ok_or(RegisterError::NotPowerOfTwo(usize::MAX))?;
    }
}

fn random_key<R: Rng>(rng: &mut R) -> FlowKey {
    FlowKey::from_bytes(&rng.random())
}

/// One Monte Carlo trial: does any of `n` fresh keys hit the cell of a
/// reference key?
fn fixed_cell_trial(cfg: RegisterConfig, n: u64, seed: u64, trial: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let target = hash_index(&random_key(&mut rng), cfg);
    (0..n).any(|_| hash_index(&random_key(&mut rng), cfg) == target)
}

/// Empirical counterpart of [`collision_probability`] over `trials` runs.
/// Each trial draws its keys from its own ChaCha stream, so the result does
/// not depend on how trials are scheduled.
pub fn simulate_collision_rate(cfg: RegisterConfig, n: u64, trials: u64, seed: u64) -> f64 {
    #[cfg(feature = "parallel")]
    let hits = {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .filter(|&t| fixed_cell_trial(cfg, n, seed, t))
            .count()
    };
    #[cfg(not(feature = "parallel"))]
    let hits = (0..trials)
        .filter(|&t| fixed_cell_trial(cfg, n, seed, t))
        .count();
    hits as f64 / trials.max(1) as f64
}

pub fn simulate_collision_rate_sequential(
    cfg: RegisterConfig,
    n: u64,
    trials: u64,
    seed: u64,
) -> f64 {
    let hits = (0..trials)
        .filter(|&t| fixed_cell_trial(cfg, n, seed, t))
        .count();
    hits as f64 / trials.max(1) as f64
}

/// Counters for one direction of a flow. All fields saturate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DirectionStats {
    pub pkt_count: u32,
    pub len_sum: u32,
    pub len_sq_sum: u64,
}

impl DirectionStats {
    pub fn add(&mut self, payload_len: u16) {
        let len = u32::from(payload_len);
        self.pkt_count = self.pkt_count.saturating_add(1);
        self.len_sum = self.len_sum.saturating_add(len);
        self.len_sq_sum = self
            .len_sq_sum
            .saturating_add(u64::from(len) * u64::from(len));
    }

    pub fn is_empty(&self) -> bool {
        self.pkt_count == 0
    }
}

/// Statistics shared by both directions, kept at the flow's FWD column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BidirAggregates {
    pub first_ts_us: u64,
    pub last_ts_us: u64,
    pub iat_sum: u64,
    pub iat_sq_sum: u64,
    pub total_pkts: u32,
}

impl BidirAggregates {
    pub fn start(ts_us: u64) -> Self {
        BidirAggregates {
            first_ts_us: ts_us,
            last_ts_us: ts_us,
            iat_sum: 0,
            iat_sq_sum: 0,
            total_pkts: 1,
        }
    }

    pub fn observe(&mut self, ts_us: u64) {
        let iat = ts_us.saturating_sub(self.last_ts_us);
        self.iat_sum = self.iat_sum.saturating_add(iat);
        self.iat_sq_sum = self.iat_sq_sum.saturating_add(iat.saturating_mul(iat));
        self.last_ts_us = self.last_ts_us.max(ts_us);
        self.total_pkts = self.total_pkts.saturating_add(1);
    }

    pub fn duration_us(&self) -> u64 {
        self.last_ts_us - self.first_ts_us
    }
}

/// The statistics registers of one lane.
#[derive(Debug, Clone)]
pub struct MatrixState {
    cfg: RegisterConfig,
    dir_stats: Vec<DirectionStats>,
    bidir: Vec<BidirAggregates>,
    key_echo: Vec<Option<FlowKey>>,
    occupied: usize,
}

impl MatrixState {
    pub fn new(cfg: RegisterConfig) -> Self {
        let m = cfg.m_cells();
        MatrixState {
            cfg,
            dir_stats: vec![DirectionStats::default(); m],
            bidir: vec![BidirAggregates::default(); m],
            key_echo: vec![None; m],
            occupied: 0,
        }
    }

    pub fn config(&self) -> RegisterConfig {
        self.cfg
    }

    pub fn dir_stats(&self, idx: FlowIndex) -> &DirectionStats {
        &self.dir_stats[idx.value()]
    }

    pub fn bidir(&self, idx: FlowIndex) -> &BidirAggregates {
        &self.bidir[idx.value()]
    }

    pub fn key_echo(&self, idx: FlowIndex) -> Option<FlowKey> {
        self.key_echo[idx.value()]
    }

    /// Number of columns with a nonzero packet count.
    pub fn occupied_columns(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub(crate) fn add_packet(&mut self, idx: FlowIndex, payload_len: u16) {
        let cell = &mut self.dir_stats[idx.value()];
        if cell.is_empty() {
            self.occupied += 1;
        }
        cell.add(payload_len);
    }

    pub(crate) fn start_flow(&mut self, home: FlowIndex, key: FlowKey, ts_us: u64) {
        self.key_echo[home.value()] = Some(key);
        self.bidir[home.value()] = BidirAggregates::start(ts_us);
    }

    pub(crate) fn bidir_mut(&mut self, home: FlowIndex) -> &mut BidirAggregates {
        &mut self.bidir[home.value()]
    }

    /// Zeroes both direction columns, the bidirectional aggregates at `fwd`
    /// and both key slots.
    pub fn clear_column(&mut self, fwd: FlowIndex, bwd: FlowIndex) {
        for idx in [fwd, bwd] {
            let i = idx.value();
            if !self.dir_stats[i].is_empty() {
                self.occupied -= 1;
            }
            self.dir_stats[i] = DirectionStats::default();
            self.key_echo[i] = None;
        }
        self.bidir[fwd.value()] = BidirAggregates::default();
    }

    /// Wipes every column. Only needed when collisions left columns that no
    /// buffered flow owns.
    pub fn reset(&mut self) {
        self.dir_stats.fill(DirectionStats::default());
        self.bidir.fill(BidirAggregates::default());
        self.key_echo.fill(None);
        self.occupied = 0;
    }
}
