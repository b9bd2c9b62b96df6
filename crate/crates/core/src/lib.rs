//! Software model of a programmable-switch flow telemetry pipeline and the
//! controller that classifies its reports.
//!
//! Packets enter a [`pipeline::Pipeline`], which keeps per-flow statistics in
//! two alternating register lanes and drains the previous window's flows as
//! bit-packed [`codec::ReportPacket`]s. The [`control`] module turns each
//! reported record into four features and classifies it with a KNN model.
//!
//! With the default `parallel` feature, batch classification, workload
//! generation and the collision Monte Carlo run on rayon; without it they run
//! sequentially with identical results.

pub mod codec;
pub mod collector;
pub mod control;
pub mod error;
pub mod flow_table;
pub mod pipeline;
pub mod session;
pub mod shadow;
pub mod traffic;

pub use codec::{decode_report, encode_report, FlowRecord, ReportPacket};
pub use error::{CodecError, ModelError, PipelineError, RegisterError, TraceError, WorkloadError};
pub use flow_table::{collision_probability, required_register_size, RegisterConfig};
pub use pipeline::{Pipeline, WindowConfig};
pub use traffic::{ClassLabel, FlowKey, PacketRecord, WorkloadSpec};
