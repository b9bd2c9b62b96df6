//! Per-packet statistics update.

use crate::flow_table::{paired_indexes, FlowIndex, MatrixState};
use crate::traffic::PacketRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Fwd,
    Bwd,
}

/// Result of ingesting one packet into a lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOutcome {
    pub new_flow: bool,
    /// Column holding the flow's bidirectional aggregates.
    pub fwd_idx: FlowIndex,
    pub bwd_idx: FlowIndex,
    pub direction: Direction,
}

/// Updates `matrix` with `pkt`.
///
/// A packet whose own column and paired column are both empty instantiates a
/// new bidirectional flow homed at its own column. Otherwise the home is the
/// occupied column whose key echo identifies this flow; on a hash collision
/// the packet merges into whichever flow owns the columns.
pub fn ingest_packet(pkt: &PacketRecord, matrix: &mut MatrixState) -> IngestOutcome {
    let (own, pair) = paired_indexes(&pkt.key, matrix.config());

    if matrix.dir_stats(own).is_empty() && matrix.dir_stats(pair).is_empty() {
        matrix.start_flow(own, pkt.key, pkt.ts_us);
        matrix.add_packet(own, pkt.payload_len);
        return IngestOutcome {
            new_flow: true,
            fwd_idx: own,
            bwd_idx: pair,
            direction: Direction::Fwd,
        };
    }

    let reverse = pkt.key.reverse();
    let home = match (matrix.key_echo(own), matrix.key_echo(pair)) {
        (Some(k), _) if k == pkt.key => Some((own, pair, Direction::Fwd)),
        (_, Some(k)) if k == reverse => Some((pair, own, Direction::Bwd)),
        // Collisions from here on.
        (Some(_), _) => Some((own, pair, Direction::Fwd)),
        (None, Some(_)) => Some((pair, own, Direction::Bwd)),
        (None, None) => None,
    };

    matrix.add_packet(own, pkt.payload_len);
    match home {
        Some((fwd_idx, bwd_idx, direction)) => {
            matrix.bidir_mut(fwd_idx).observe(pkt.ts_us);
            IngestOutcome {
                new_flow: false,
                fwd_idx,
                bwd_idx,
                direction,
            }
        }
        // Both columns belong to other flows' BWD sides: no home to update.
        None => IngestOutcome {
            new_flow: false,
            fwd_idx: own,
            bwd_idx: pair,
            direction: Direction::Fwd,
        },
    }
}
