//! Packets, flow keys, the trace CSV format and the synthetic workload generator.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::error::{TraceError, WorkloadError};

/// Smallest payload a generated packet may carry.
pub const MIN_PAYLOAD: u16 = 1;
/// Ethernet MTU minus IPv4 and TCP headers.
pub const MAX_PAYLOAD: u16 = 1460;

pub const TRACE_HEADER: &str = "ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len,label";

/// Unidirectional flow identifier (5-tuple).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub proto: u8,
}

impl FlowKey {
    pub const ENCODED_LEN: usize = 13;

    pub const ZERO: FlowKey = FlowKey {
        src_ip: Ipv4Addr::UNSPECIFIED,
        dst_ip: Ipv4Addr::UNSPECIFIED,
        src_port: 0,
        dst_port: 0,
        proto: 0,
    };

    pub fn new(src_ip: Ipv4Addr, dst_ip: Ipv4Addr, src_port: u16, dst_port: u16, proto: u8) -> Self {
        FlowKey {
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            proto,
        }
    }

    /// The key of the opposite direction: addresses and ports swapped.
    pub fn reverse(&self) -> FlowKey {
        FlowKey {
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
            src_port: self.dst_port,
            dst_port: self.src_port,
            proto: self.proto,
        }
    }

    /// Direction-independent representative of the bidirectional flow.
    pub fn canonical(&self) -> FlowKey {
        let rev = self.reverse();
        if rev < *self {
            rev
        } else {
            *self
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.reverse() == *self
    }

    /// Canonical big-endian serialization, fields in declaration order.
    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[0..4].copy_from_slice(&self.src_ip.octets());
        out[4..8].copy_from_slice(&self.dst_ip.octets());
        out[8..10].copy_from_slice(&self.src_port.to_be_bytes());
        out[10..12].copy_from_slice(&self.dst_port.to_be_bytes());
        out[12] = self.proto;
        out
    }

    pub fn from_bytes(bytes: &[u8; Self::ENCODED_LEN]) -> Self {
        FlowKey {
            src_ip: Ipv4Addr::new(bytes[0], bytes[1], bytes[2], bytes[3]),
            dst_ip: Ipv4Addr::new(bytes[4], bytes[5], bytes[6], bytes[7]),
            src_port: u16::from_be_bytes([bytes[8], bytes[9]]),
            dst_port: u16::from_be_bytes([bytes[10], bytes[11]]),
            proto: bytes[12],
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} -> {}:{} /{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.proto
        )
    }
}

/// Free-function form of [`FlowKey::reverse`].
pub fn reverse_key(key: FlowKey) -> FlowKey {
    key.reverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ClassLabel {
    #[default]
    Benign,
    DDoS,
}

impl ClassLabel {
    pub fn code(self) -> u8 {
        match self {
            ClassLabel::Benign => 0,
            ClassLabel::DDoS => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ClassLabel::Benign),
            1 => Some(ClassLabel::DDoS),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Benign => f.write_str("Benign"),
            ClassLabel::DDoS => f.write_str("DDoS"),
        }
    }
}

/// One observed packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    /// Arrival time in microseconds since trace start.
    pub ts_us: u64,
    pub key: FlowKey,
    pub payload_len: u16,
    pub label: ClassLabel,
}

impl PacketRecord {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.ts_us,
            self.key.src_ip,
            self.key.dst_ip,
            self.key.src_port,
            self.key.dst_port,
            self.key.proto,
            self.payload_len,
            self.label.code()
        )
    }

    fn parse_csv_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!("expected 8 fields, found {}", fields.len()));
        }
        fn field<T: FromStr>(raw: &str, name: &str) -> Result<T, String> {
            raw.trim()
                .parse()
                .map_err(|_| format!("invalid {name} '{raw}'"))
        }
        let label_code: u8 = field(fields[7], "label")?;
        let label = ClassLabel::from_code(label_code)
            .ok_or_else(|| format!("invalid label '{}'", fields[7]))?;
        Ok(PacketRecord {
            ts_us: field(fields[0], "ts_us")?,
            key: FlowKey {
                src_ip: field(fields[1], "src_ip")?,
                dst_ip: field(fields[2], "dst_ip")?,
                src_port: field(fields[3], "src_port")?,
                dst_port: field(fields[4], "dst_port")?,
                proto: field(fields[5], "proto")?,
            },
            payload_len: field(fields[6], "payload_len")?,
            label,
        })
    }
}

/// Reads a trace CSV. A leading header line is optional.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<PacketRecord>, TraceError> {
    let file = File::open(path.as_ref())?;
    parse_trace(BufReader::new(file))
}

pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<PacketRecord>, TraceError> {
    let mut records: Vec<PacketRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (line_no == 1 && line.starts_with("ts_us")) {
            continue;
        }
        let rec = PacketRecord::parse_csv_line(line)
            .map_err(|message| TraceError::Parse { line: line_no, message })?;
        if let Some(prev) = records.last() {
            if rec.ts_us < prev.ts_us {
                return Err(TraceError::Ordering {
                    line: line_no,
                    previous: prev.ts_us,
                    found: rec.ts_us,
                });
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_trace(records: &[PacketRecord], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    format_trace(records, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn format_trace<W: Write>(records: &[PacketRecord], out: &mut W) -> Result<(), TraceError> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut prev = 0;
    for (i, rec) in records.iter().enumerate() {
        if rec.ts_us < prev {
            return Err(TraceError::Ordering {
                line: i + 2,
                previous: prev,
                found: rec.ts_us,
            });
        }
        prev = rec.ts_us;
        writeln!(out, "{}", rec.to_csv_line())?;
    }
    Ok(())
}

/// Parameters of the synthetic benign/DDoS workload.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub duration_s: f64,
    pub benign_flows: usize,
    pub ddos_flows: usize,
    pub benign_payload_mean: f64,
    pub benign_payload_std: f64,
    pub ddos_payload_mean: f64,
    pub ddos_payload_std: f64,
    pub benign_iat_mean_us: f64,
    pub ddos_iat_mean_us: f64,
    /// Mean packets per flow; the per-flow count is `1 + Poisson(mean - 1)`.
    pub benign_pkts_mean: f64,
    pub ddos_pkts_mean: f64,
    /// Probability that a packet after the first travels in the reverse direction.
    pub benign_bwd_ratio: f64,
    pub ddos_bwd_ratio: f64,
    pub rng_seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            duration_s: 60.0,
            benign_flows: 100,
            ddos_flows: 100,
            benign_payload_mean: 600.0,
            benign_payload_std: 300.0,
            ddos_payload_mean: 60.0,
            ddos_payload_std: 5.0,
            benign_iat_mean_us: 10_000.0,
            ddos_iat_mean_us: 500.0,
            benign_pkts_mean: 20.0,
            ddos_pkts_mean: 20.0,
            benign_bwd_ratio: 0.5,
            ddos_bwd_ratio: 0.1,
            rng_seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let positive = [
            ("duration_s", self.duration_s),
            ("benign_payload_mean", self.benign_payload_mean),
            ("ddos_payload_mean", self.ddos_payload_mean),
            ("benign_iat_mean_us", self.benign_iat_mean_us),
            ("ddos_iat_mean_us", self.ddos_iat_mean_us),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(WorkloadError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("benign_pkts_mean", self.benign_pkts_mean),
            ("ddos_pkts_mean", self.ddos_pkts_mean),
        ] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(WorkloadError::Invalid(format!("{name} must be >= 1, got {v}")));
            }
        }
        for (name, v) in [
            ("benign_payload_std", self.benign_payload_std),
            ("ddos_payload_std", self.ddos_payload_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(WorkloadError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("benign_bwd_ratio", self.benign_bwd_ratio),
            ("ddos_bwd_ratio", self.ddos_bwd_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(WorkloadError::Invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.benign_flows + self.ddos_flows == 0 {
            return Err(WorkloadError::Invalid("at least one flow is required".into()));
        }
        Ok(())
    }
}

/// Per-class generation parameters, resolved from a [`WorkloadSpec`].
#[derive(Debug, Clone, Copy)]
struct ClassProfile {
    label: ClassLabel,
    payload: Normal<f64>,
    iat: Exp<f64>,
    extra_pkts: Option<Poisson<f64>>,
    bwd_ratio: f64,
}

impl ClassProfile {
    fn new(
        label: ClassLabel,
        payload_mean: f64,
        payload_std: f64,
        iat_mean_us: f64,
        pkts_mean: f64,
        bwd_ratio: f64,
    ) -> Result<Self, WorkloadError> {
        let bad = |e: &dyn fmt::Display| WorkloadError::Invalid(e.to_string());
        Ok(ClassProfile {
            label,
            payload: Normal::new(payload_mean, payload_std).map_err(|e| bad(&e))?,
            iat: Exp::new(1.0 / iat_mean_us).map_err(|e| bad(&e))?,
            extra_pkts: if pkts_mean > 1.0 {
                Some(Poisson::new(pkts_mean - 1.0).map_err(|e| bad(&e))?)
            } else {
                None
            },
            bwd_ratio,
        })
    }
}

/// One flow to be expanded into packets.
#[derive(Debug, Clone, Copy)]
struct FlowPlan {
    key: FlowKey,
    class: usize,
    seed: u64,
}

/// Generates a labeled trace, sorted by timestamp, deterministic per `rng_seed`.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Vec<PacketRecord>, WorkloadError> {
    spec.validate()?;
    let profiles = [
        ClassProfile::new(
            ClassLabel::Benign,
            spec.benign_payload_mean,
            spec.benign_payload_std,
            spec.benign_iat_mean_us,
            spec.benign_pkts_mean,
            spec.benign_bwd_ratio,
        )?,
        ClassProfile::new(
            ClassLabel::DDoS,
            spec.ddos_payload_mean,
            spec.ddos_payload_std,
            spec.ddos_iat_mean_us,
            spec.ddos_pkts_mean,
            spec.ddos_bwd_ratio,
        )?,
    ];
    let duration_us = (spec.duration_s * 1e6).round().max(1.0) as u64;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut seen = HashSet::new();
    let mut plans = Vec::with_capacity(spec.benign_flows + spec.ddos_flows);
    for (class, count) in [(0usize, spec.benign_flows), (1usize, spec.ddos_flows)] {
        for _ in 0..count {
            let key = loop {
                let k = if class == 0 {
                    benign_key(&mut rng)
                } else {
                    ddos_key(&mut rng)
                };
                if seen.insert(k.canonical()) {
                    break k;
                }
            };
            plans.push(FlowPlan {
                key,
                class,
                seed: rng.random(),
            });
        }
    }

    let expand = |(id, plan): (usize, &FlowPlan)| {
        expand_flow(plan, &profiles[plan.class], duration_us)
            .into_iter()
            .enumerate()
            .map(move |(seq, p)| (p, id, seq))
            .collect::<Vec<_>>()
    };

    #[cfg(feature = "parallel")]
    let mut tagged: Vec<(PacketRecord, usize, usize)> = {
        use rayon::prelude::*;
        plans.par_iter().enumerate().flat_map_iter(expand).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut tagged: Vec<(PacketRecord, usize, usize)> =
        plans.iter().enumerate().flat_map(expand).collect();

    tagged.sort_unstable_by_key(|(p, id, seq)| (p.ts_us, *id, *seq));
    Ok(tagged.into_iter().map(|(p, _, _)| p).collect())
}

fn expand_flow(plan: &FlowPlan, profile: &ClassProfile, duration_us: u64) -> Vec<PacketRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let extra = profile
        .extra_pkts
        .map(|d| d.sample(&mut rng) as usize)
        .unwrap_or(0);
    let n = 1 + extra;
    let mut ts = rng.random_range(0..duration_us);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            ts += profile.iat.sample(&mut rng).round() as u64;
            if ts >= duration_us {
                break;
            }
        }
        let key = if i > 0 && rng.random_bool(profile.bwd_ratio) {
            plan.key.reverse()
        } else {
            plan.key
        };
        let len = profile
            .payload
            .sample(&mut rng)
            .round()
            .clamp(f64::from(MIN_PAYLOAD), f64::from(MAX_PAYLOAD)) as u16;
        out.push(PacketRecord {
            ts_us: ts,
            key,
            payload_len: len,
            label: profile.label,
        });
    }
    out
}

const BENIGN_PORTS: [(u16, u8); 4] = [(80, 6), (443, 6), (53, 17), (22, 6)];

fn benign_key<R: Rng>(rng: &mut R) -> FlowKey {
    let (dport, proto) = BENIGN_PORTS[rng.random_range(0..BENIGN_PORTS.len())];
    FlowKey {
        src_ip: Ipv4Addr::new(10, rng.random(), rng.random(), rng.random_range(1..255)),
        dst_ip: Ipv4Addr::new(172, 16, rng.random_range(0..4), rng.random_range(1..16)),
        src_port: rng.random_range(1024..=u16::MAX),
        dst_port: dport,
        proto,
    }
}

const VICTIM: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 100);

fn ddos_key<R: Rng>(rng: &mut R) -> FlowKey {
    let src = loop {
        let ip = Ipv4Addr::from(rng.random::<u32>());
        if ip != VICTIM {
            break ip;
        }
    };
    FlowKey {
        src_ip: src,
        dst_ip: VICTIM,
        src_port: rng.random_range(1024..=u16::MAX),
        dst_port: 80,
        proto: 6,
    }
}
