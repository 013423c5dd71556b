//! Dataset CSV and trace JSON-lines persistence.
//!
//! CSV: UTF-8, `.` decimal, mandatory header `x1,...,xd[,label]`.
//! Trace files: one JSON object per line; the first line is a metadata
//! record (hyperparameters, seed, data shape), each following line one
//! retained sampler state.

use crate::datagen::Dataset;
use crate::model_state::{Hyperparams, Trace, TraceState};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Writes a dataset as CSV with header; the label column is present only
/// when the dataset is labeled.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let d = data.dim();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, p) in data.points.iter().enumerate() {
        let mut fields: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
        if let Some(labels) = &data.labels {
            fields.push(labels[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] (or any header-first CSV with
/// numeric columns and an optional trailing integer `label` column).
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file, expected a header row".into(),
    })?;
    let header = header?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let has_label = cols.last() == Some(&"label");
    let d = cols.len() - has_label as usize;
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no coordinate columns in header".into(),
        });
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let mut p = Vec::with_capacity(d);
        for f in &fields[..d] {
            p.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("invalid number `{f}`"),
            })?);
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::Parse {
                line: idx + 1,
                msg: "non-finite coordinate".into(),
            });
        }
        points.push(p);
        if has_label {
            labels.push(fields[d].parse::<usize>().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("invalid label `{}`", fields[d]),
            })?);
        }
    }
    Ok(Dataset {
        points,
        labels: has_label.then_some(labels),
        meta: format!("csv {}", path.display()),
    })
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceMeta {
    hyper: Hyperparams,
    seed: u64,
    n_obs: usize,
    dim: usize,
}

/// Writes a trace as JSON lines: metadata first, then one state per line.
pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let meta = TraceMeta {
        hyper: trace.hyper.clone(),
        seed: trace.seed,
        n_obs: trace.n_obs,
        dim: trace.dim,
    };
    writeln!(w, "{}", serde_json::to_string(&meta)?)?;
    for st in &trace.states {
        writeln!(w, "{}", serde_json::to_string(st)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace file written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Trace> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let meta_line = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty trace file".into(),
    })??;
    let meta: TraceMeta = serde_json::from_str(&meta_line)?;
    let mut states: Vec<TraceState> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        states.push(serde_json::from_str(&line)?);
    }
    Ok(Trace {
        states,
        hyper: meta.hyper,
        seed: meta.seed,
        n_obs: meta.n_obs,
        dim: meta.dim,
    })
}

/// Writes a serializable metrics/summary value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
