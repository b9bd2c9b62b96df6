//! Report packet wire format.
//!
//! ```text
//! 0..6    dst MAC (zero)
//! 6..12   src MAC (zero)
//! 12..14  ethertype 0x88B5
//! 14..16  magic 0xA1CE
//! 16..20  window id
//! 20      flow count (1, 5 or 10)
//! 21..    flow records, 54 bytes each
//! ```
//!
//! Record layout, offsets from the record start: 0..13 key, 13 pad,
//! 14 F1, 18 S2, 22 S3, 26 S4, 30 S5, 34 S6 (u64), 42 S7, 46 S8 (u64).
//! Everything is big-endian.

use crate::error::CodecError;
use crate::traffic::FlowKey;

pub const ETHERTYPE: u16 = 0x88B5;
pub const MAGIC: u16 = 0xA1CE;
pub const ETH_HEADER_LEN: usize = 14;
pub const REPORT_HEADER_LEN: usize = 7;
pub const HEADER_LEN: usize = ETH_HEADER_LEN + REPORT_HEADER_LEN;
pub const RECORD_LEN: usize = 54;
pub const MTU: usize = 1500;
pub const BATCH_SIZES: [u8; 3] = [10, 5, 1];

/// One flow's reported statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowRecord {
    /// Key of the flow's first packet (FWD direction).
    pub key: FlowKey,
    /// Flow duration in microseconds, saturated to `u32`.
    pub f1_duration_us: u32,
    /// Packets in the FWD direction.
    pub s2_tot_fwd_pkt: u32,
    /// Packets in the BWD direction.
    pub s3_tot_bwd_pkt: u32,
    /// Payload bytes FWD.
    pub s4_len_fwd: u32,
    /// Payload bytes BWD.
    pub s5_len_bwd: u32,
    /// Sum of squared BWD payload sizes.
    pub s6_len_bwd_sq: u64,
    /// Sum of inter-arrival times, saturated to `u32`.
    pub s7_iat_sum: u32,
    /// Sum of squared inter-arrival times.
    pub s8_iat_sq_sum: u64,
}

impl FlowRecord {
    pub fn total_pkts(&self) -> u64 {
        u64::from(self.s2_tot_fwd_pkt) + u64::from(self.s3_tot_bwd_pkt)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.key.to_bytes());
        out.push(0);
        out.extend_from_slice(&self.f1_duration_us.to_be_bytes());
        out.extend_from_slice(&self.s2_tot_fwd_pkt.to_be_bytes());
        out.extend_from_slice(&self.s3_tot_bwd_pkt.to_be_bytes());
        out.extend_from_slice(&self.s4_len_fwd.to_be_bytes());
        out.extend_from_slice(&self.s5_len_bwd.to_be_bytes());
        out.extend_from_slice(&self.s6_len_bwd_sq.to_be_bytes());
        out.extend_from_slice(&self.s7_iat_sum.to_be_bytes());
        out.extend_from_slice(&self.s8_iat_sq_sum.to_be_bytes());
    }

    fn read_from(b: &[u8; RECORD_LEN]) -> Self {
        let u32_at = |o: usize| u32::from_be_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        let u64_at = |o: usize| {
            let mut w = [0u8; 8];
            w.copy_from_slice(&b[o..o + 8]);
            u64::from_be_bytes(w)
        };
        let mut key = [0u8; FlowKey::ENCODED_LEN];
        key.copy_from_slice(&b[..FlowKey::ENCODED_LEN]);
        FlowRecord {
            key: FlowKey::from_bytes(&key),
            f1_duration_us: u32_at(14),
            s2_tot_fwd_pkt: u32_at(18),
            s3_tot_bwd_pkt: u32_at(22),
            s4_len_fwd: u32_at(26),
            s5_len_bwd: u32_at(30),
            s6_len_bwd_sq: u64_at(34),
            s7_iat_sum: u32_at(42),
            s8_iat_sq_sum: u64_at(46),
        }
    }
}

/// A control packet carrying 1, 5 or 10 flow records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPacket {
    pub window_id: u32,
    pub records: Vec<FlowRecord>,
}

impl ReportPacket {
    pub fn flow_count(&self) -> usize {
        self.records.len()
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.records.len())
    }
}

pub fn encoded_len(flow_count: usize) -> usize {
    HEADER_LEN + RECORD_LEN * flow_count
}

fn valid_count(n: usize) -> bool {
    BATCH_SIZES.iter().any(|&b| usize::from(b) == n)
}

pub fn encode_report(rp: &ReportPacket) -> Result<Vec<u8>, CodecError> {
    let n = rp.records.len();
    if !valid_count(n) {
        return Err(CodecError::InvalidCount(u8::try_from(n).unwrap_or(u8::MAX)));
    }
    let mut out = Vec::with_capacity(encoded_len(n));
    out.extend_from_slice(&[0u8; 12]);
    out.extend_from_slice(&ETHERTYPE.to_be_bytes());
    out.extend_from_slice(&MAGIC.to_be_bytes());
    out.extend_from_slice(&rp.window_id.to_be_bytes());
    out.push(n as u8);
    for rec in &rp.records {
        rec.write_to(&mut out);
    }
    debug_assert_eq!(out.len(), encoded_len(n));
    debug_assert!(out.len() <= MTU);
    Ok(out)
}

pub fn decode_report(bytes: &[u8]) -> Result<ReportPacket, CodecError> {
    let need = |needed: usize| {
        if bytes.len() < needed {
            Err(CodecError::ShortBuffer {
                needed,
                available: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(HEADER_LEN)?;
    let ethertype = u16::from_be_bytes([bytes[12], bytes[13]]);
    if ethertype != ETHERTYPE {
        return Err(CodecError::BadEthertype(ethertype));
    }
    let magic = u16::from_be_bytes([bytes[14], bytes[15]]);
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let window_id = u32::from_be_bytes([bytes[16], bytes[17], bytes[18], bytes[19]]);
    let count = bytes[20];
    if !valid_count(usize::from(count)) {
        return Err(CodecError::InvalidCount(count));
    }
    let total = encoded_len(usize::from(count));
    need(total)?;
    if bytes.len() > total {
        return Err(CodecError::TrailingBytes(bytes.len() - total));
    }
    let records = bytes[HEADER_LEN..total]
        .chunks_exact(RECORD_LEN)
        .map(|chunk| FlowRecord::read_from(chunk.try_into().expect("exact chunk")))
        .collect();
    Ok(ReportPacket { window_id, records })
}
