//! End-to-end runs: trace → collector → pipeline → encoded reports → controller.
//!
//! The pipeline runs on the calling thread and hands encoded report frames to
//! a controller thread over a bounded channel; that queue is the only point
//! of concurrency and it preserves emission order.

use std::io::{self, Read, Write};
use std::sync::mpsc;
use std::thread;

use thiserror::Error;

use crate::codec::{decode_report, encode_report, FlowRecord, ReportPacket};
use crate::control::{compute_features, ConfusionCounts, FeatureTuple, KnnModel};
use crate::error::{CodecError, PipelineError};
use crate::flow_table::RegisterConfig;
use crate::pipeline::{LaneAudit, Pipeline, PipelineCounters, ReportSink, WindowConfig};
use crate::shadow::ShadowOracle;
use crate::traffic::{ClassLabel, PacketRecord};

const QUEUE_DEPTH: usize = 1024;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("report frame {frame}: {source}")]
    Codec { frame: usize, source: CodecError },
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub window: WindowConfig,
    pub registers: RegisterConfig,
    /// Keep every encoded frame in the outcome.
    pub keep_frames: bool,
}

/// One flow as seen by the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedFlow {
    pub window_id: u32,
    pub record: FlowRecord,
    /// Features with the flow's majority ground-truth label attached.
    pub features: FeatureTuple,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub flows: Vec<ReportedFlow>,
    pub frames: Vec<Vec<u8>>,
    pub shadow: ShadowOracle,
    pub counters: PipelineCounters,
    pub audit: LaneAudit,
    /// Reported flows with no ground-truth match (only after collisions).
    pub unlabeled: usize,
}

impl RunOutcome {
    pub fn labeled_features(&self) -> Vec<FeatureTuple> {
        self.flows
            .iter()
            .filter(|f| f.features.label.is_some())
            .map(|f| f.features)
            .collect()
    }

    /// Reported records compared with the shadow's exact values.
    pub fn oracle_mismatches(&self) -> usize {
        let exact = self.shadow.records();
        let mut seen = std::collections::BTreeSet::new();
        let mut bad = 0;
        for f in &self.flows {
            let id = (u64::from(f.window_id), f.record.key.canonical());
            if !seen.insert(id) || exact.get(&id) != Some(&f.record) {
                bad += 1;
            }
        }
        bad + exact.len().saturating_sub(seen.len())
    }
}

struct EncodingSink {
    tx: mpsc::SyncSender<Vec<u8>>,
}

impl ReportSink for EncodingSink {
    fn emit(&mut self, report: ReportPacket) {
        let frame = encode_report(&report).expect("pipeline emits only 1, 5 or 10 records");
        let _ = self.tx.send(frame);
    }
}

struct Consumed {
    flows: Vec<(u32, FlowRecord, FeatureTuple)>,
    frames: Vec<Vec<u8>>,
}

fn consume(rx: mpsc::Receiver<Vec<u8>>, keep_frames: bool) -> Result<Consumed, SessionError> {
    let mut out = Consumed {
        flows: Vec::new(),
        frames: Vec::new(),
    };
    for (frame, bytes) in rx.into_iter().enumerate() {
        let rp = decode_report(&bytes).map_err(|source| SessionError::Codec { frame, source })?;
        for rec in &rp.records {
            out.flows.push((rp.window_id, *rec, compute_features(rec)));
        }
        if keep_frames {
            out.frames.push(bytes);
        }
    }
    Ok(out)
}

pub fn run_session(trace: &[PacketRecord], cfg: &RunConfig) -> Result<RunOutcome, SessionError> {
    let (tx, rx) = mpsc::sync_channel(QUEUE_DEPTH);
    let keep = cfg.keep_frames;
    let (pipeline_result, consumed) = thread::scope(|scope| {
        let controller = scope.spawn(move || consume(rx, keep));
        let mut pipeline = Pipeline::with_sink(cfg.window, cfg.registers, EncodingSink { tx });
        let mut shadow = ShadowOracle::new(cfg.window);
        let mut result = Ok(());
        for pkt in trace {
            if let Err(e) = pipeline.on_packet(pkt) {
                result = Err(e);
                break;
            }
            shadow.observe(pkt);
        }
        if result.is_ok() {
            pipeline.end_of_trace();
        }
        let counters = pipeline.counters();
        let audit = pipeline.audit().clone();
        drop(pipeline);
        let consumed = controller.join().expect("controller thread panicked");
        (result.map(|()| (shadow, counters, audit)), consumed)
    });
    let (shadow, counters, audit) = pipeline_result?;
    let consumed = consumed?;

    let mut unlabeled = 0;
    let flows = consumed
        .flows
        .into_iter()
        .map(|(window_id, record, mut features)| {
            features.label = shadow.label_of(u64::from(window_id), &record.key);
            if features.label.is_none() {
                unlabeled += 1;
            }
            ReportedFlow {
                window_id,
                record,
                features,
            }
        })
        .collect();
    Ok(RunOutcome {
        flows,
        frames: consumed.frames,
        shadow,
        counters,
        audit,
        unlabeled,
    })
}

/// Classifies every labeled flow and tallies the confusion counts.
pub fn evaluate(model: &KnnModel, flows: &[FeatureTuple]) -> (Vec<ClassLabel>, ConfusionCounts) {
    let labeled: Vec<FeatureTuple> = flows.iter().filter(|f| f.label.is_some()).copied().collect();
    let predicted = model.predict_batch(&labeled);
    let mut counts = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(&labeled) {
        counts.record(*p, t.label.expect("filtered"));
    }
    (predicted, counts)
}

/// Writes frames as `<u32 big-endian length><frame>` records.
pub fn write_frames<W: Write>(frames: &[Vec<u8>], out: &mut W) -> io::Result<()> {
    for f in frames {
        let len = u32::try_from(f.len()).map_err(|_| io::Error::other("frame too large"))?;
        out.write_all(&len.to_be_bytes())?;
        out.write_all(f)?;
    }
    Ok(())
}

pub fn read_frames<R: Read>(input: &mut R) -> io::Result<Vec<Vec<u8>>> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut frames = Vec::new();
    let mut rest = data.as_slice();
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame length"));
        }
        let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame"));
        }
        frames.push(rest[..len].to_vec());
        rest = &rest[len..];
    }
    Ok(frames)
}
