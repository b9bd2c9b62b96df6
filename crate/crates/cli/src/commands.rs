use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use flowtel::control::io::{read_dataset, read_model, write_dataset, write_model};
use flowtel::control::{compute_metrics, KnnModel, DEFAULT_K};
use flowtel::session::{evaluate, run_session, write_frames, RunConfig, RunOutcome};
use flowtel::traffic::{generate_workload, read_trace, write_trace};
use flowtel::{
    collision_probability, required_register_size, ClassLabel, ModelError, RegisterConfig,
    TraceError, WindowConfig, WorkloadSpec,
};

use crate::CliError;

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn trace_err(path: &std::path::Path, e: TraceError) -> CliError {
    match e {
        TraceError::Io(e) => io_err(path, e),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

fn model_err(path: &std::path::Path, e: ModelError) -> CliError {
    match e {
        ModelError::Io(e) => io_err(path, e),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Trace length in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 100)]
    pub benign_flows: usize,
    #[arg(long, default_value_t = 100)]
    pub ddos_flows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 600.0)]
    pub benign_payload_mean: f64,
    #[arg(long, default_value_t = 300.0)]
    pub benign_payload_std: f64,
    #[arg(long, default_value_t = 60.0)]
    pub ddos_payload_mean: f64,
    #[arg(long, default_value_t = 5.0)]
    pub ddos_payload_std: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub benign_iat_mean: f64,
    #[arg(long, default_value_t = 500.0)]
    pub ddos_iat_mean: f64,
    /// Mean packets per benign flow.
    #[arg(long, default_value_t = 20.0)]
    pub benign_pkts: f64,
    /// Mean packets per DDoS flow.
    #[arg(long, default_value_t = 20.0)]
    pub ddos_pkts: f64,
    #[arg(long, default_value_t = 0.5)]
    pub benign_bwd_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    pub ddos_bwd_ratio: f64,
}

impl GenArgs {
    fn spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            duration_s: self.duration,
            benign_flows: self.benign_flows,
            ddos_flows: self.ddos_flows,
            benign_payload_mean: self.benign_payload_mean,
            benign_payload_std: self.benign_payload_std,
            ddos_payload_mean: self.ddos_payload_mean,
            ddos_payload_std: self.ddos_payload_std,
            benign_iat_mean_us: self.benign_iat_mean,
            ddos_iat_mean_us: self.ddos_iat_mean,
            benign_pkts_mean: self.benign_pkts,
            ddos_pkts_mean: self.ddos_pkts,
            benign_bwd_ratio: self.benign_bwd_ratio,
            ddos_bwd_ratio: self.ddos_bwd_ratio,
            rng_seed: self.seed,
        }
    }
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let trace = generate_workload(&args.spec()).map_err(|e| CliError::Usage(e.to_string()))?;
    write_trace(&trace, &args.output).map_err(|e| trace_err(&args.output, e))?;
    let count = |label| trace.iter().filter(|p| p.label == label).count();
    println!(
        "wrote {} packets to {}",
        trace.len(),
        args.output.display()
    );
    println!(
        "benign: {} flows, {} packets",
        args.benign_flows,
        count(ClassLabel::Benign)
    );
    println!(
        "ddos:   {} flows, {} packets",
        args.ddos_flows,
        count(ClassLabel::DDoS)
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Window length in seconds.
    #[arg(long = "window", default_value_t = 40.0)]
    pub window_s: f64,
    /// Register columns per lane (power of two).
    #[arg(long, default_value_t = 1 << 16)]
    pub m_cells: usize,
}

impl PipelineArgs {
    fn config(&self, keep_frames: bool) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            window: WindowConfig::from_secs(self.window_s)
                .map_err(|e| CliError::Usage(e.to_string()))?,
            registers: RegisterConfig::new(self.m_cells)
                .map_err(|e| CliError::Usage(e.to_string()))?,
            keep_frames,
        })
    }
}

fn execute(trace_path: &std::path::Path, cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let trace = read_trace(trace_path).map_err(|e| trace_err(trace_path, e))?;
    run_session(&trace, cfg).map_err(|e| CliError::Data(format!("{}: {e}", trace_path.display())))
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(short = 'i', long)]
    pub trace: PathBuf,
    /// Output dataset CSV.
    #[arg(short = 'o', long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Write every encoded report as a length-prefixed frame.
    #[arg(long)]
    pub dump_reports: Option<PathBuf>,
    /// Validate reported records against an exact per-flow shadow table.
    #[arg(long)]
    pub oracle_check: bool,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.pipeline.config(args.dump_reports.is_some())?;
    let out = execute(&args.trace, &cfg)?;
    let rows = out.labeled_features();
    write_dataset(&rows, &args.dataset).map_err(|e| model_err(&args.dataset, e))?;
    println!(
        "{} packets, {} reports, {} flows -> {}",
        out.counters.packets,
        out.counters.reports,
        rows.len(),
        args.dataset.display()
    );
    if out.unlabeled > 0 {
        eprintln!("warning: {} reported flows had no ground-truth match", out.unlabeled);
    }
    if let Some(path) = &args.dump_reports {
        let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        write_frames(&out.frames, &mut w)
            .and_then(|()| w.flush())
            .map_err(|e| io_err(path, e))?;
        println!("{} report frames -> {}", out.frames.len(), path.display());
    }
    if args.oracle_check {
        let collisions = out.shadow.collisions(cfg.registers);
        let mismatches = out.oracle_mismatches();
        println!("oracle check: {collisions} collisions, {mismatches} mismatched flows");
        if collisions == 0 && mismatches > 0 {
            return Err(CliError::Data(format!(
                "{mismatches} flows differ from the shadow table on a collision-free run"
            )));
        }
        if !out.audit.is_clean() {
            return Err(CliError::Data(format!("lane audit failed: {:?}", out.audit)));
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(short = 'd', long)]
    pub dataset: PathBuf,
    /// Output model file.
    #[arg(short = 'o', long)]
    pub model: PathBuf,
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let rows = read_dataset(&args.dataset).map_err(|e| model_err(&args.dataset, e))?;
    let count = |label| rows.iter().filter(|r| r.label == Some(label)).count();
    let (benign, ddos) = (count(ClassLabel::Benign), count(ClassLabel::DDoS));
    if benign == 0 || ddos == 0 {
        return Err(CliError::Data(format!(
            "dataset needs both classes (benign {benign}, ddos {ddos})"
        )));
    }
    let model = KnnModel::fit(&rows, DEFAULT_K).map_err(|e| model_err(&args.dataset, e))?;
    write_model(&model, &args.model).map_err(|e| model_err(&args.model, e))?;
    println!("benign: {benign}, ddos: {ddos}");
    if let Some(i) = model.standardizer().guarded.iter().position(|&g| g) {
        println!("note: feature f{} has zero variance; its std is set to 1", i + 1);
    }
    println!("model (k={}) -> {}", model.k(), args.model.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(short = 'm', long)]
    pub model: PathBuf,
    #[arg(short = 'i', long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Also write the metrics report to this file.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = read_model(&args.model).map_err(|e| model_err(&args.model, e))?;
    let cfg = args.pipeline.config(false)?;
    let out = execute(&args.trace, &cfg)?;
    let flows = out.labeled_features();
    let (_, counts) = evaluate(&model, &flows);
    let metrics = compute_metrics(&counts);

    let mut text = String::new();
    if counts.total() == 0 {
        text.push_str("no flows to evaluate\n");
    }
    text.push_str(&format!(
        "flows: {} (tp {}, tn {}, fp {}, fn {})\n",
        counts.total(),
        counts.tp,
        counts.tn,
        counts.fp,
        counts.fn_
    ));
    text.push_str(&format!("{metrics}\n"));
    text.push_str(&metrics.machine_line());
    text.push('\n');
    print!("{text}");
    if let Some(path) = &args.metrics_out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Expected number of flows.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub flows: u64,
    /// Target collision probability, in (0, 1).
    #[arg(long)]
    pub target: f64,
    /// Also report the probability for this register size.
    #[arg(long)]
    pub m_cells: Option<usize>,
}

pub fn size(args: &SizeArgs) -> Result<(), CliError> {
    let m = required_register_size(args.flows, args.target)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let c = collision_probability(m, args.flows).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("recommended M={m} for {} flows (target {})", args.flows, args.target);
    println!("C={c:.6} at M={m}");
    if let Some(chosen) = args.m_cells {
        let c = collision_probability(chosen, args.flows)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        println!("C={c:.6} at M={chosen}");
    }
    Ok(())
}
