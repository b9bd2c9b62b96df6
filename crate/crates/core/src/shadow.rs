//! Exact per-flow bookkeeping used to validate the register pipeline and to
//! label reported flows with ground truth.
//!
//! The shadow keeps one entry per (window, bidirectional flow) in a hash map,
//! so it never collides. Comparing its records with the pipeline's shows
//! whether the registers lost or merged anything.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::codec::FlowRecord;
use crate::flow_table::{hash_index, RegisterConfig};
use crate::pipeline::{window_of, WindowConfig};
use crate::traffic::{ClassLabel, FlowKey, PacketRecord};

#[derive(Debug, Clone)]
struct ExactFlow {
    first_key: FlowKey,
    first_ts: u64,
    last_ts: u64,
    fwd_pkts: u64,
    bwd_pkts: u64,
    fwd_len: u64,
    bwd_len: u64,
    bwd_len_sq: u128,
    iat_sum: u128,
    iat_sq_sum: u128,
    labels: [u64; 2],
}

impl ExactFlow {
    fn record(&self) -> FlowRecord {
        let u32s = |v: u128| u32::try_from(v).unwrap_or(u32::MAX);
        let u64s = |v: u128| u64::try_from(v).unwrap_or(u64::MAX);
        FlowRecord {
            key: self.first_key,
            f1_duration_us: u32s(u128::from(self.last_ts - self.first_ts)),
            s2_tot_fwd_pkt: u32s(u128::from(self.fwd_pkts)),
            s3_tot_bwd_pkt: u32s(u128::from(self.bwd_pkts)),
            s4_len_fwd: u32s(u128::from(self.fwd_len)),
            s5_len_bwd: u32s(u128::from(self.bwd_len)),
            s6_len_bwd_sq: u64s(self.bwd_len_sq),
            s7_iat_sum: u32s(self.iat_sum),
            s8_iat_sq_sum: u64s(self.iat_sq_sum),
        }
    }

    /// Majority ground-truth label; a tie goes to DDoS.
    fn label(&self) -> ClassLabel {
        if self.labels[1] >= self.labels[0] {
            ClassLabel::DDoS
        } else {
            ClassLabel::Benign
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShadowOracle {
    window: WindowConfig,
    flows: HashMap<(u64, FlowKey), ExactFlow>,
    packets: u64,
}

impl ShadowOracle {
    pub fn new(window: WindowConfig) -> Self {
        ShadowOracle {
            window,
            flows: HashMap::new(),
            packets: 0,
        }
    }

    pub fn from_trace(trace: &[PacketRecord], window: WindowConfig) -> Self {
        let mut s = Self::new(window);
        for p in trace {
            s.observe(p);
        }
        s
    }

    pub fn observe(&mut self, pkt: &PacketRecord) {
        self.packets += 1;
        let w = window_of(pkt.ts_us, self.window);
        let len = u64::from(pkt.payload_len);
        let flow = self
            .flows
            .entry((w, pkt.key.canonical()))
            .or_insert_with(|| ExactFlow {
                first_key: pkt.key,
                first_ts: pkt.ts_us,
                last_ts: pkt.ts_us,
                fwd_pkts: 0,
                bwd_pkts: 0,
                fwd_len: 0,
                bwd_len: 0,
                bwd_len_sq: 0,
                iat_sum: 0,
                iat_sq_sum: 0,
                labels: [0; 2],
            });
        if flow.fwd_pkts + flow.bwd_pkts > 0 {
            let iat = u128::from(pkt.ts_us - flow.last_ts);
            flow.iat_sum += iat;
            flow.iat_sq_sum += iat * iat;
            flow.last_ts = pkt.ts_us;
        }
        if pkt.key == flow.first_key {
            flow.fwd_pkts += 1;
            flow.fwd_len += len;
        } else {
            flow.bwd_pkts += 1;
            flow.bwd_len += len;
            flow.bwd_len_sq += u128::from(len * len);
        }
        flow.labels[usize::from(pkt.label.code())] += 1;
    }

    pub fn packets(&self) -> u64 {
        self.packets
    }

    /// Number of distinct (window, bidirectional flow) instances.
    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn label_of(&self, window: u64, key: &FlowKey) -> Option<ClassLabel> {
        self.flows.get(&(window, key.canonical())).map(ExactFlow::label)
    }

    /// Exact records keyed by (window, canonical key).
    pub fn records(&self) -> BTreeMap<(u64, FlowKey), FlowRecord> {
        self.flows
            .iter()
            .map(|(&(w, k), f)| ((w, k), f.record()))
            .collect()
    }

    /// Flows whose register columns overlap another flow of the same window,
    /// or whose two directions hash to one column despite distinct keys.
    pub fn collisions(&self, cfg: RegisterConfig) -> usize {
        let mut owners: HashMap<(u64, usize), FlowKey> = HashMap::new();
        let mut colliding: HashSet<(u64, FlowKey)> = HashSet::new();
        let mut keys: Vec<&(u64, FlowKey)> = self.flows.keys().collect();
        keys.sort();
        for &(w, canon) in keys {
            let f = &self.flows[&(w, canon)];
            let a = hash_index(&f.first_key, cfg).value();
            let b = hash_index(&f.first_key.reverse(), cfg).value();
            if a == b && !f.first_key.is_symmetric() {
                colliding.insert((w, canon));
            }
            for idx in [a, b] {
                match owners.get(&(w, idx)) {
                    Some(&other) if other != canon => {
                        colliding.insert((w, canon));
                        colliding.insert((w, other));
                    }
                    Some(_) => {}
                    None => {
                        owners.insert((w, idx), canon);
                    }
                }
            }
        }
        colliding.len()
    }
}
