//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::net::Ipv4Addr;
use std::panic;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowtel::codec::{decode_report, encode_report, FlowRecord, ReportPacket};
use flowtel::collector::ingest_packet;
use flowtel::control::{compute_features, compute_metrics, ConfusionCounts, FeatureTuple, KnnModel};
use flowtel::flow_table::{
    collision_probability, paired_indexes, simulate_collision_rate, MatrixState, RegisterConfig,
};
use flowtel::pipeline::{next_batch_size, read_flow_record, Pipeline, WindowConfig};
use flowtel::session::{evaluate, run_session, RunConfig};
use flowtel::shadow::ShadowOracle;
use flowtel::traffic::{generate_workload, ClassLabel, FlowKey, PacketRecord, WorkloadSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn key(i: u32) -> FlowKey {
    FlowKey::new(
        Ipv4Addr::from(0x0A00_0000 | i),
        Ipv4Addr::new(172, 16, 0, 1),
        (1024 + i % 60_000) as u16,
        80,
        6,
    )
}

/// Keys whose paired register indexes are pairwise disjoint at `cfg`.
fn disjoint_keys(count: usize, cfg: RegisterConfig) -> Vec<FlowKey> {
    let mut used = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    while out.len() < count {
        let k = key(i);
        i += 1;
        let (a, b) = paired_indexes(&k, cfg);
        if a != b && !used.contains(&a) && !used.contains(&b) {
            used.insert(a);
            used.insert(b);
            out.push(k);
        }
    }
    out
}

fn pkt(ts_us: u64, key: FlowKey, len: u16) -> PacketRecord {
    PacketRecord {
        ts_us,
        key,
        payload_len: len,
        label: ClassLabel::Benign,
    }
}

/// Two-pass Σ(x - mean)² / (n - 1) with mean = Σx / (n - 1).
fn brute_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n <= 1.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / (n - 1.0);
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

fn encode_decode(rec: FlowRecord) -> FlowRecord {
    let bytes = encode_report(&ReportPacket {
        window_id: 0,
        records: vec![rec],
    })
    .expect("encode");
    decode_report(&bytes).expect("decode").records[0]
}

fn c1_std_identity() -> Outcome {
    let start = Instant::now();
    let cfg = RegisterConfig::new(1 << 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst = 0.0f64;
    for i in 0..1000u32 {
        let n = rng.random_range(2..=50usize);
        let k = key(i);
        let mut matrix = MatrixState::new(cfg);
        let mut ts = 0u64;
        // The first packet has no predecessor: its inter-arrival value is 0.
        let mut iats = Vec::with_capacity(n);
        let mut bwd_lens = Vec::new();
        for j in 0..n {
            let iat = if j == 0 { 0 } else { rng.random_range(0..200_000u64) };
            ts += iat;
            iats.push(iat as f64);
            let len = rng.random_range(1..=1460u16);
            let dir_key = if j > 0 && rng.random_bool(0.5) {
                bwd_lens.push(f64::from(len));
                k.reverse()
            } else {
                k
            };
            ingest_packet(&pkt(ts, dir_key, len), &mut matrix);
        }
        let (fwd, bwd) = paired_indexes(&k, cfg);
        let f = compute_features(&encode_decode(read_flow_record(&matrix, fwd, bwd)));
        worst = worst
            .max(rel_err(f.f2_iat_std, brute_std(&iats)))
            .max(rel_err(f.f4_bwd_len_std, brute_std(&bwd_lens)));
    }
    let t = start.elapsed();
    check(
        worst <= 1e-6 && within(t, 5),
        format!("max relative error {worst:.3e} (tol 1e-6), {t:.2?} (limit 5 s)"),
    )
}

fn c2_worked_example() -> Outcome {
    let k = FlowKey::new(
        Ipv4Addr::new(10, 0, 0, 1),
        Ipv4Addr::new(10, 0, 0, 2),
        80,
        5000,
        6,
    );
    let trace = [pkt(0, k, 100), pkt(500, k.reverse(), 300), pkt(1000, k, 200)];
    let mut p = Pipeline::new(
        WindowConfig::from_secs(40.0).unwrap(),
        RegisterConfig::new(1024).unwrap(),
    );
    for x in &trace {
        p.on_packet(x).unwrap();
    }
    p.end_of_trace();
    let reports = p.take_reports();
    if reports.len() != 1 || reports[0].records.len() != 1 {
        return Err(format!("expected one report with one record, got {reports:?}"));
    }
    let decoded = decode_report(&encode_report(&reports[0]).unwrap()).unwrap();
    let f = compute_features(&decoded.records[0]);
    let ok = f.f1_duration == 1000.0
        && (f.f2_iat_std - 353.5534).abs() <= 1e-3
        && f.f3_avg_pkt_size == 300.0
        && f.f4_bwd_len_std == 0.0;
    check(
        ok,
        format!(
            "F1={} F2={:.4} F3={} F4={}",
            f.f1_duration, f.f2_iat_std, f.f3_avg_pkt_size, f.f4_bwd_len_std
        ),
    )
}

/// `1 - (1 - 1/m)^n` in exact integer arithmetic, to 30 decimal places.
fn collision_probability_exact(m: u64, n: u32) -> f64 {
    let den = BigUint::from(m).pow(n);
    let num = &den - BigUint::from(m - 1).pow(n);
    let scale = BigUint::from(10u32).pow(30);
    let scaled = num * scale / den;
    scaled.to_string().parse::<f64>().unwrap() / 1e30
}

fn c3_collision_probability() -> Outcome {
    let start = Instant::now();
    let c = collision_probability(1024, 100).unwrap();
    let exact = collision_probability_exact(1024, 100);
    let formula_err = (c - exact).abs();

    let cfg = RegisterConfig::new(256).unwrap();
    let empirical = simulate_collision_rate(cfg, 64, 100_000, 0xC3);
    let expected = collision_probability(256, 64).unwrap();
    let mc_err = (empirical - expected).abs();
    let t = start.elapsed();
    check(
        formula_err <= 1e-4 && mc_err <= 0.01 && within(t, 30),
        format!(
            "C(1024,100)={c:.6} vs exact {exact:.6} (|d|={formula_err:.1e}, tol 1e-4; \
             quoted 0.0932 differs by {:.1e}); MC {empirical:.4} vs {expected:.4} (tol 0.01); {t:.2?}",
            (c - 0.0932).abs()
        ),
    )
}

fn random_record(rng: &mut ChaCha8Rng) -> FlowRecord {
    FlowRecord {
        key: FlowKey::from_bytes(&rng.random()),
        f1_duration_us: rng.random(),
        s2_tot_fwd_pkt: rng.random(),
        s3_tot_bwd_pkt: rng.random(),
        s4_len_fwd: rng.random(),
        s5_len_bwd: rng.random(),
        s6_len_bwd_sq: rng.random(),
        s7_iat_sum: rng.random(),
        s8_iat_sq_sum: rng.random(),
    }
}

fn c4_codec() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut roundtrips = 0;
    let mut truncations = 0;
    for i in 0..10_000 {
        let n = [1usize, 5, 10][rng.random_range(0..3)];
        let rp = ReportPacket {
            window_id: rng.random(),
            records: (0..n).map(|_| random_record(&mut rng)).collect(),
        };
        let bytes = encode_report(&rp).map_err(|e| e.to_string())?;
        if bytes.len() != 21 + 54 * n {
            return Err(format!("packet {i}: length {}", bytes.len()));
        }
        if decode_report(&bytes).as_ref() != Ok(&rp) {
            return Err(format!("packet {i}: round-trip mismatch"));
        }
        roundtrips += 1;
        if i < 300 {
            for cut in 0..bytes.len() {
                let r = panic::catch_unwind(|| decode_report(&bytes[..cut]));
                match r {
                    Ok(Err(_)) => truncations += 1,
                    Ok(Ok(_)) => return Err(format!("packet {i}: truncation at {cut} decoded")),
                    Err(_) => return Err(format!("packet {i}: truncation at {cut} panicked")),
                }
            }
        }
    }
    let t = start.elapsed();
    check(
        within(t, 10),
        format!("{roundtrips} round-trips, {truncations} truncations rejected, {t:.2?}"),
    )
}

fn greedy_expected(n: usize) -> Vec<usize> {
    let mut v = vec![10; n / 10];
    let r = n % 10;
    if r >= 5 {
        v.push(5);
        v.extend(std::iter::repeat_n(1, r - 5));
    } else {
        v.extend(std::iter::repeat_n(1, r));
    }
    v
}

fn c5_greedy_batching() -> Outcome {
    let window = WindowConfig::from_secs(1.0).unwrap();
    let regs = RegisterConfig::new(1 << 16).unwrap();
    let keys = disjoint_keys(201, regs);
    let carrier_key = keys[200];
    for n in 0..=200usize {
        let expected = greedy_expected(n);
        if expected.iter().sum::<usize>() != n {
            return Err(format!("n={n}: expected decomposition does not sum"));
        }
        // Carrier-driven drain: one report per packet of the next window.
        let mut p = Pipeline::new(window, regs);
        for i in 0..n {
            p.on_packet(&pkt(i as u64, keys[i], 100)).unwrap();
        }
        for j in 0..expected.len() + 2 {
            p.on_packet(&pkt(1_000_000 + j as u64, carrier_key, 100)).unwrap();
        }
        let carrier: Vec<usize> = p.reports().iter().map(|r| r.records.len()).collect();
        // Boundary flush.
        let mut q = Pipeline::new(window, regs);
        for i in 0..n {
            q.on_packet(&pkt(i as u64, keys[i], 100)).unwrap();
        }
        q.on_packet(&pkt(2_000_000, carrier_key, 100)).unwrap();
        let flushed: Vec<usize> = q.reports().iter().map(|r| r.records.len()).collect();
        let mut direct = Vec::new();
        let mut left = n;
        while next_batch_size(left) > 0 {
            direct.push(next_batch_size(left));
            left -= next_batch_size(left);
        }
        if carrier != expected || flushed != expected || direct != expected {
            return Err(format!(
                "n={n}: carrier {carrier:?} flush {flushed:?} direct {direct:?} expected {expected:?}"
            ));
        }
    }
    Ok("n = 0..=200 drained as 10s, then one 5, then 1s".into())
}

fn c6_window_conservation() -> Outcome {
    let spec = WorkloadSpec {
        duration_s: 60.0,
        benign_flows: 300,
        ddos_flows: 300,
        benign_pkts_mean: 200.0,
        ddos_pkts_mean: 200.0,
        rng_seed: 0xC6,
        ..WorkloadSpec::default()
    };
    let mut trace = generate_workload(&spec).map_err(|e| e.to_string())?;
    if trace.len() < 100_000 {
        return Err(format!("generator produced only {} packets", trace.len()));
    }
    trace.truncate(100_000);
    let window = WindowConfig::from_secs(5.0).unwrap();
    let shadow = ShadowOracle::from_trace(&trace, window);
    let mut m = 1usize << 12;
    let registers = loop {
        let cfg = RegisterConfig::new(m).unwrap();
        if shadow.collisions(cfg) == 0 {
            break cfg;
        }
        m *= 2;
        if m > 1 << 24 {
            return Err("no collision-free register size up to 2^24".into());
        }
    };
    let out = run_session(
        &trace,
        &RunConfig {
            window,
            registers,
            keep_frames: false,
        },
    )
    .map_err(|e| e.to_string())?;
    let total: u64 = out.flows.iter().map(|f| f.record.total_pkts()).sum();
    let mismatches = out.oracle_mismatches();
    check(
        total == 100_000 && out.flows.len() == shadow.flow_count() && mismatches == 0,
        format!(
            "M={}: Σ(S2+S3)={total} of 100000 packets, {} reported vs {} oracle flows, {mismatches} mismatches",
            registers.m_cells(),
            out.flows.len(),
            shadow.flow_count()
        ),
    )
}

fn c7_lifo_and_lanes() -> Outcome {
    // Instantiation order per window; each window's flows get later packets too.
    let plan: Vec<Vec<u32>> = vec![
        (0..7).collect(),
        (100..113).collect(),
        (200..204).collect(),
        vec![],
        (400..425).collect(),
    ];
    let window_us = 1_000_000u64;
    let mut trace = Vec::new();
    for (w, flows) in plan.iter().enumerate() {
        let base = w as u64 * window_us;
        for (j, &f) in flows.iter().enumerate() {
            trace.push(pkt(base + j as u64 * 100, key(f), 100));
        }
        for (j, &f) in flows.iter().enumerate() {
            trace.push(pkt(base + 500_000 + j as u64 * 100, key(f).reverse(), 50));
        }
    }
    let mut p = Pipeline::new(
        WindowConfig::from_secs(1.0).unwrap(),
        RegisterConfig::new(1 << 16).unwrap(),
    );
    for x in &trace {
        p.on_packet(x).unwrap();
    }
    p.end_of_trace();
    let audit = p.audit().clone();
    let reports = p.take_reports();
    for (w, flows) in plan.iter().enumerate() {
        let got: Vec<FlowKey> = reports
            .iter()
            .filter(|r| r.window_id as usize == w)
            .flat_map(|r| r.records.iter().map(|rec| rec.key))
            .collect();
        let want: Vec<FlowKey> = flows.iter().rev().map(|&f| key(f)).collect();
        if got != want {
            return Err(format!("window {w}: reported order differs from reverse instantiation"));
        }
    }
    check(
        audit.is_clean()
            && audit.collector_writes.iter().all(|&c| c > 0)
            && audit.drain_accesses.iter().all(|&c| c > 0),
        format!(
            "{} reports in reverse order; collector writes {:?}, drain accesses {:?}, violations {}/{}",
            reports.len(),
            audit.collector_writes,
            audit.drain_accesses,
            audit.collector_violations,
            audit.drain_violations
        ),
    )
}

fn separable_spec(seed: u64, flows_per_class: usize) -> WorkloadSpec {
    WorkloadSpec {
        duration_s: 120.0,
        benign_flows: flows_per_class,
        ddos_flows: flows_per_class,
        benign_payload_mean: 600.0,
        benign_payload_std: 300.0,
        ddos_payload_mean: 60.0,
        ddos_payload_std: 5.0,
        benign_iat_mean_us: 10_000.0,
        ddos_iat_mean_us: 500.0,
        rng_seed: seed,
        ..WorkloadSpec::default()
    }
}

fn flows_for(seed: u64, flows_per_class: usize) -> Result<Vec<FeatureTuple>, String> {
    let trace = generate_workload(&separable_spec(seed, flows_per_class)).map_err(|e| e.to_string())?;
    let out = run_session(
        &trace,
        &RunConfig {
            window: WindowConfig::from_secs(40.0).unwrap(),
            registers: RegisterConfig::new(1 << 16).unwrap(),
            keep_frames: false,
        },
    )
    .map_err(|e| e.to_string())?;
    Ok(out.labeled_features())
}

fn c8_end_to_end_detection() -> Outcome {
    let start = Instant::now();
    let train = flows_for(0xA, 400)?;
    let test = flows_for(0xB, 400)?;
    let model = KnnModel::fit(&train, 3).map_err(|e| e.to_string())?;
    let (_, counts) = evaluate(&model, &test);
    let m = compute_metrics(&counts);
    let (acc, rec, sel) = (
        m.accuracy.unwrap_or(0.0),
        m.recall.unwrap_or(0.0),
        m.selectivity.unwrap_or(0.0),
    );
    let t = start.elapsed();
    check(
        acc >= 0.95 && rec >= 0.90 && sel >= 0.90 && within(t, 120),
        format!(
            "train {} / test {} flows: accuracy {acc:.4}, recall {rec:.4}, selectivity {sel:.4}, {t:.2?}",
            train.len(),
            test.len()
        ),
    )
}

fn c9_metrics() -> Outcome {
    let m = compute_metrics(&ConfusionCounts {
        tp: 50,
        tn: 40,
        fp: 5,
        fn_: 5,
    });
    let got = [m.accuracy, m.recall, m.selectivity, m.f1_score].map(|v| v.unwrap_or(f64::NAN));
    let want = [0.90, 0.9091, 0.8889, 0.9091];
    let ok = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-4);
    check(ok, format!("{got:.4?}"))
}

fn scaled(t: &FeatureTuple, factor: f64) -> FeatureTuple {
    let v = t.values().map(|x| x * factor);
    FeatureTuple { key: t.key, ..FeatureTuple::new(v, t.label) }
}

fn c10_scale_invariance() -> Outcome {
    let train = flows_for(0x10A, 600)?;
    let mut eval = flows_for(0x10B, 600)?;
    if eval.len() < 1000 {
        return Err(format!("only {} evaluation flows", eval.len()));
    }
    eval.truncate(1000);
    let base = KnnModel::fit(&train, 3).map_err(|e| e.to_string())?;
    let train_x: Vec<FeatureTuple> = train.iter().map(|t| scaled(t, 1000.0)).collect();
    let eval_x: Vec<FeatureTuple> = eval.iter().map(|t| scaled(t, 1000.0)).collect();
    let big = KnnModel::fit(&train_x, 3).map_err(|e| e.to_string())?;
    let a = base.predict_batch(&eval);
    let b = big.predict_batch(&eval_x);
    let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    check(changed == 0, format!("{changed} of {} predictions changed", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 std identity vs brute force", c1_std_identity),
        ("2 worked 3-packet example", c2_worked_example),
        ("3 collision probability and Monte Carlo", c3_collision_probability),
        ("4 codec round-trip and truncation fuzz", c4_codec),
        ("5 greedy 10/5/1 batching", c5_greedy_batching),
        ("6 window conservation vs shadow oracle", c6_window_conservation),
        ("7 LIFO drain and lane exclusivity", c7_lifo_and_lanes),
        ("8 end-to-end detection", c8_end_to_end_detection),
        ("9 metric formulas", c9_metrics),
        ("10 KNN scale invariance", c10_scale_invariance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let result = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
