//! Dataset CSV and model file formats.
//!
//! Dataset: header `f1,f2,f3,f4,label`, one flow per row, label 0/1.
//!
//! Model:
//! ```text
//! knn-model v1 k=3
//! <mean f1>,<mean f2>,<mean f3>,<mean f4>
//! <std f1>,<std f2>,<std f3>,<std f4>
//! <z1>,<z2>,<z3>,<z4>,<label>      (one line per training point)
//! ```
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::control::features::{FeatureTuple, FEATURE_COUNT};
use crate::control::knn::{KnnModel, Standardizer, TrainingPoint};
use crate::error::ModelError;
use crate::traffic::ClassLabel;

pub const DATASET_HEADER: &str = "f1,f2,f3,f4,label";
const MODEL_MAGIC: &str = "knn-model v1";

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_floats(raw: &[&str], line: usize) -> Result<[f64; FEATURE_COUNT], ModelError> {
    if raw.len() != FEATURE_COUNT {
        return Err(parse_err(
            line,
            format!("expected {FEATURE_COUNT} values, found {}", raw.len()),
        ));
    }
    let mut out = [0.0; FEATURE_COUNT];
    for (o, r) in out.iter_mut().zip(raw) {
        let v: f64 = r
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("invalid number '{r}'")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value '{r}'")));
        }
        *o = v;
    }
    Ok(out)
}

fn parse_labeled_row(text: &str, line: usize) -> Result<([f64; FEATURE_COUNT], ClassLabel), ModelError> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != FEATURE_COUNT + 1 {
        return Err(parse_err(
            line,
            format!("expected {} fields, found {}", FEATURE_COUNT + 1, fields.len()),
        ));
    }
    let values = parse_floats(&fields[..FEATURE_COUNT], line)?;
    let label = fields[FEATURE_COUNT]
        .trim()
        .parse::<u8>()
        .ok()
        .and_then(ClassLabel::from_code)
        .ok_or_else(|| parse_err(line, format!("invalid label '{}'", fields[FEATURE_COUNT])))?;
    Ok((values, label))
}

pub fn format_dataset<W: Write>(tuples: &[FeatureTuple], out: &mut W) -> Result<(), ModelError> {
    writeln!(out, "{DATASET_HEADER}")?;
    for (i, t) in tuples.iter().enumerate() {
        let label = t.label.ok_or(ModelError::Unlabeled(i))?;
        writeln!(out, "{},{}", join(&t.values()), label.code())?;
    }
    Ok(())
}

pub fn write_dataset(tuples: &[FeatureTuple], path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    format_dataset(tuples, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Vec<FeatureTuple>, ModelError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (line_no == 1 && line.starts_with("f1")) {
            continue;
        }
        let (values, label) = parse_labeled_row(line, line_no)?;
        out.push(FeatureTuple::new(values, Some(label)));
    }
    Ok(out)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<FeatureTuple>, ModelError> {
    parse_dataset(BufReader::new(File::open(path)?))
}

pub fn format_model<W: Write>(model: &KnnModel, out: &mut W) -> Result<(), ModelError> {
    writeln!(out, "{MODEL_MAGIC} k={}", model.k())?;
    writeln!(out, "{}", join(&model.standardizer().mean))?;
    writeln!(out, "{}", join(&model.standardizer().std))?;
    for p in model.points() {
        writeln!(out, "{},{}", join(&p.z), p.label.code())?;
    }
    Ok(())
}

pub fn write_model(model: &KnnModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut out = BufWriter::new(File::create(path)?);
    format_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_model<R: BufRead>(reader: R) -> Result<KnnModel, ModelError> {
    let mut lines = reader.lines();
    let mut next_line = |n: usize| -> Result<String, ModelError> {
        lines
            .next()
            .ok_or_else(|| parse_err(n, "unexpected end of model file"))?
            .map_err(ModelError::from)
    };

    let header = next_line(1)?;
    let k = header
        .trim()
        .strip_prefix(MODEL_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("k="))
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| parse_err(1, format!("bad model header '{header}'")))?;
    let mean_line = next_line(2)?;
    let mean = parse_floats(&mean_line.trim().split(',').collect::<Vec<_>>(), 2)?;
    let std_line = next_line(3)?;
    let std = parse_floats(&std_line.trim().split(',').collect::<Vec<_>>(), 3)?;
    if let Some(i) = std.iter().position(|&s| s <= 0.0) {
        return Err(parse_err(3, format!("std of feature {} must be positive", i + 1)));
    }

    let mut points = Vec::new();
    let mut line_no = 3;
    for line in lines {
        line_no += 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (z, label) = parse_labeled_row(line, line_no)?;
        points.push(TrainingPoint { z, label });
    }
    KnnModel::from_parts(k, Standardizer::from_parts(mean, std), points)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<KnnModel, ModelError> {
    parse_model(BufReader::new(File::open(path)?))
}
