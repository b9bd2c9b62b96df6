//! Window handler: window clock, two alternating lanes, LIFO index buffers
//! and report scheduling.
//!
//! Lane `w % 2` collects the flows of window `w` while the other lane drains
//! the flows of window `w - 1`, one report per arriving packet. At every
//! window boundary the outgoing drain lane is flushed completely before the
//! lanes swap roles, so a lane is always empty when it starts collecting.

use std::sync::mpsc;

use crate::codec::{FlowRecord, ReportPacket, BATCH_SIZES};
use crate::collector::ingest_packet;
use crate::error::PipelineError;
use crate::flow_table::{DirectionStats, FlowIndex, MatrixState, RegisterConfig};
use crate::traffic::{FlowKey, PacketRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    window_us: u64,
}

impl WindowConfig {
    pub fn from_secs(window_s: f64) -> Result<Self, PipelineError> {
        let window_us = (window_s * 1e6).round();
        if !(window_s.is_finite() && window_us >= 1.0) {
            return Err(PipelineError::BadWindow(window_s));
        }
        Ok(WindowConfig {
            window_us: window_us as u64,
        })
    }

    pub fn window_us(&self) -> u64 {
        self.window_us
    }
}

/// `floor(ts / window)`; a timestamp on a boundary opens the next window.
pub fn window_of(ts_us: u64, cfg: WindowConfig) -> u64 {
    ts_us / cfg.window_us
}

/// Greedy batch size: 10 while available, then 5, then 1.
pub fn next_batch_size(pending: usize) -> usize {
    BATCH_SIZES
        .iter()
        .map(|&b| usize::from(b))
        .find(|&b| pending >= b)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneId(usize);

impl LaneId {
    pub const ZERO: LaneId = LaneId(0);
    pub const ONE: LaneId = LaneId(1);

    pub fn of_window(window: u64) -> Self {
        LaneId((window % 2) as usize)
    }

    pub fn other(self) -> Self {
        LaneId(1 - self.0)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// LIFO of `(fwd, bwd)` index pairs for flows instantiated in one window.
#[derive(Debug, Clone)]
pub struct LaneBuffer {
    fwd_idx: Vec<FlowIndex>,
    bwd_idx: Vec<FlowIndex>,
    capacity: usize,
}

impl LaneBuffer {
    pub fn new(capacity: usize) -> Self {
        LaneBuffer {
            fwd_idx: Vec::new(),
            bwd_idx: Vec::new(),
            capacity,
        }
    }

    pub fn count(&self) -> usize {
        self.fwd_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd_idx.is_empty()
    }

    /// Returns false when the buffer is full.
    pub fn push(&mut self, fwd: FlowIndex, bwd: FlowIndex) -> bool {
        if self.count() >= self.capacity {
            return false;
        }
        self.fwd_idx.push(fwd);
        self.bwd_idx.push(bwd);
        true
    }

    pub fn pop(&mut self) -> Option<(FlowIndex, FlowIndex)> {
        Some((self.fwd_idx.pop()?, self.bwd_idx.pop()?))
    }

    /// Pending pairs, oldest first.
    pub fn pending(&self) -> impl Iterator<Item = (FlowIndex, FlowIndex)> + '_ {
        self.fwd_idx.iter().copied().zip(self.bwd_idx.iter().copied())
    }
}

/// Receives reports in emission order.
pub trait ReportSink {
    fn emit(&mut self, report: ReportPacket);
}

impl ReportSink for Vec<ReportPacket> {
    fn emit(&mut self, report: ReportPacket) {
        self.push(report);
    }
}

// A disconnected receiver has stopped consuming; remaining reports are dropped.
impl ReportSink for mpsc::Sender<ReportPacket> {
    fn emit(&mut self, report: ReportPacket) {
        let _ = self.send(report);
    }
}

impl ReportSink for mpsc::SyncSender<ReportPacket> {
    fn emit(&mut self, report: ReportPacket) {
        let _ = self.send(report);
    }
}

/// Records which lane each path touched and flags role violations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LaneAudit {
    pub collector_writes: [u64; 2],
    pub drain_accesses: [u64; 2],
    /// Collector writes to the drain lane.
    pub collector_violations: u64,
    /// Drain reads or clears of the active lane.
    pub drain_violations: u64,
}

impl LaneAudit {
    fn collector_write(&mut self, lane: LaneId, active: LaneId) {
        self.collector_writes[lane.index()] += 1;
        if lane != active {
            self.collector_violations += 1;
        }
    }

    fn drain_access(&mut self, lane: LaneId, active: LaneId) {
        self.drain_accesses[lane.index()] += 1;
        if lane == active {
            self.drain_violations += 1;
        }
    }

    pub fn is_clean(&self) -> bool {
        self.collector_violations == 0 && self.drain_violations == 0
    }
}

#[derive(Debug, Clone)]
struct Lane {
    matrix: MatrixState,
    buffer: LaneBuffer,
    /// Window whose flows this lane holds.
    window_id: u64,
}

impl Lane {
    fn new(cfg: RegisterConfig, window_id: u64) -> Self {
        Lane {
            matrix: MatrixState::new(cfg),
            buffer: LaneBuffer::new(cfg.m_cells()),
            window_id,
        }
    }

    fn is_idle(&self) -> bool {
        self.buffer.is_empty() && self.matrix.is_empty()
    }
}

/// Builds the record of the flow at `(fwd, bwd)` from a lane's registers.
pub fn read_flow_record(matrix: &MatrixState, fwd: FlowIndex, bwd: FlowIndex) -> FlowRecord {
    let f = *matrix.dir_stats(fwd);
    // Symmetric keys put both directions in one column.
    let b = if fwd == bwd {
        DirectionStats::default()
    } else {
        *matrix.dir_stats(bwd)
    };
    let bi = matrix.bidir(fwd);
    FlowRecord {
        key: matrix.key_echo(fwd).unwrap_or(FlowKey::ZERO),
        f1_duration_us: saturate_u32(bi.duration_us()),
        s2_tot_fwd_pkt: f.pkt_count,
        s3_tot_bwd_pkt: b.pkt_count,
        s4_len_fwd: f.len_sum,
        s5_len_bwd: b.len_sum,
        s6_len_bwd_sq: b.len_sq_sum,
        s7_iat_sum: saturate_u32(bi.iat_sum),
        s8_iat_sq_sum: bi.iat_sq_sum,
    }
}

fn saturate_u32(v: u64) -> u32 {
    u32::try_from(v).unwrap_or(u32::MAX)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineCounters {
    pub packets: u64,
    pub flows_instantiated: u64,
    pub reports: u64,
    pub records: u64,
    /// Buffered pairs whose columns a colliding flow had already cleared.
    pub dropped_records: u64,
    /// New flows that did not fit in a full lane buffer.
    pub buffer_overflows: u64,
    /// Lanes wiped at a boundary because collisions left unowned columns.
    pub residual_wipes: u64,
}

pub struct Pipeline<S: ReportSink = Vec<ReportPacket>> {
    window: WindowConfig,
    registers: RegisterConfig,
    lanes: [Lane; 2],
    current_window: u64,
    last_ts: Option<u64>,
    sink: S,
    audit: LaneAudit,
    counters: PipelineCounters,
}

impl Pipeline<Vec<ReportPacket>> {
    pub fn new(window: WindowConfig, registers: RegisterConfig) -> Self {
        Self::with_sink(window, registers, Vec::new())
    }

    pub fn reports(&self) -> &[ReportPacket] {
        &self.sink
    }

    /// Removes and returns the reports emitted so far.
    pub fn take_reports(&mut self) -> Vec<ReportPacket> {
        std::mem::take(&mut self.sink)
    }
}

impl<S: ReportSink> Pipeline<S> {
    pub fn with_sink(window: WindowConfig, registers: RegisterConfig, sink: S) -> Self {
        Pipeline {
            window,
            registers,
            lanes: [Lane::new(registers, 0), Lane::new(registers, 1)],
            current_window: 0,
            last_ts: None,
            sink,
            audit: LaneAudit::default(),
            counters: PipelineCounters::default(),
        }
    }

    pub fn registers(&self) -> RegisterConfig {
        self.registers
    }

    pub fn window(&self) -> WindowConfig {
        self.window
    }

    pub fn current_window(&self) -> u64 {
        self.current_window
    }

    pub fn active_lane(&self) -> LaneId {
        LaneId::of_window(self.current_window)
    }

    pub fn drain_lane(&self) -> LaneId {
        self.active_lane().other()
    }

    pub fn buffer(&self, lane: LaneId) -> &LaneBuffer {
        &self.lanes[lane.index()].buffer
    }

    pub fn matrix(&self, lane: LaneId) -> &MatrixState {
        &self.lanes[lane.index()].matrix
    }

    pub fn audit(&self) -> &LaneAudit {
        &self.audit
    }

    pub fn counters(&self) -> PipelineCounters {
        self.counters
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    pub fn on_packet(&mut self, pkt: &PacketRecord) -> Result<(), PipelineError> {
        if let Some(prev) = self.last_ts {
            if pkt.ts_us < prev {
                return Err(PipelineError::OutOfOrder {
                    previous: prev,
                    found: pkt.ts_us,
                });
            }
        }
        self.last_ts = Some(pkt.ts_us);
        self.counters.packets += 1;

        self.advance_to(window_of(pkt.ts_us, self.window));

        let active = self.active_lane();
        self.audit.collector_write(active, active);
        let lane = &mut self.lanes[active.index()];
        let outcome = ingest_packet(pkt, &mut lane.matrix);
        if outcome.new_flow {
            self.counters.flows_instantiated += 1;
            if !lane.buffer.push(outcome.fwd_idx, outcome.bwd_idx) {
                self.counters.buffer_overflows += 1;
            }
        }

        let drain = active.other();
        if !self.lanes[drain.index()].buffer.is_empty() {
            self.emit_batch(drain);
        }
        Ok(())
    }

    /// Moves the window clock forward, flushing and swapping at each boundary.
    fn advance_to(&mut self, target: u64) {
        while self.current_window < target {
            if self.lanes.iter().all(Lane::is_idle) {
                self.current_window = target;
                self.lanes[LaneId::of_window(target).index()].window_id = target;
                return;
            }
            self.flush_lane(self.drain_lane());
            self.current_window += 1;
            let active = self.active_lane();
            self.lanes[active.index()].window_id = self.current_window;
        }
    }

    /// Emits reports from `lane` until its buffer is empty.
    pub fn flush_lane(&mut self, lane: LaneId) {
        while !self.lanes[lane.index()].buffer.is_empty() {
            self.emit_batch(lane);
        }
        let l = &mut self.lanes[lane.index()];
        if !l.matrix.is_empty() {
            l.matrix.reset();
            self.counters.residual_wipes += 1;
        }
    }

    /// Flushes the drain lane, then the active lane, reporting every flow
    /// still held. The pipeline should not be fed afterwards.
    pub fn end_of_trace(&mut self) {
        let next = self.current_window + 1;
        self.advance_to(next);
        let next = self.current_window + 1;
        self.advance_to(next);
    }

    fn emit_batch(&mut self, lane: LaneId) {
        let active = self.active_lane();
        self.audit.drain_access(lane, active);
        let l = &mut self.lanes[lane.index()];
        let n = next_batch_size(l.buffer.count());
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let (fwd, bwd) = l.buffer.pop().expect("batch size bounded by count");
            let rec = read_flow_record(&l.matrix, fwd, bwd);
            l.matrix.clear_column(fwd, bwd);
            if rec.total_pkts() == 0 {
                self.counters.dropped_records += 1;
            } else {
                records.push(rec);
            }
        }
        let window_id = saturate_u32(l.window_id);
        let mut rest = records.as_slice();
        while !rest.is_empty() {
            let take = next_batch_size(rest.len());
            let (batch, tail) = rest.split_at(take);
            self.counters.reports += 1;
            self.counters.records += take as u64;
            self.sink.emit(ReportPacket {
                window_id,
                records: batch.to_vec(),
            });
            rest = tail;
        }
    }
}

/// Runs a whole trace through a fresh pipeline and returns the reports.
pub fn run_trace(
    trace: &[PacketRecord],
    window: WindowConfig,
    registers: RegisterConfig,
) -> Result<Vec<ReportPacket>, PipelineError> {
    let mut p = Pipeline::new(window, registers);
    for pkt in trace {
        p.on_packet(pkt)?;
    }
    p.end_of_trace();
    Ok(p.into_sink())
}
