//! CSV traces, edge lists and JSON reports.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::Context;

use spdhg_core::problem::Edge;
use spdhg_core::solvers::TraceRecord;

pub const TRACE_HEADER: [&str; 6] = ["iter", "epoch", "objective", "test_loss", "gap", "elapsed_ms"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn record_fields(r: &TraceRecord) -> [String; 6] {
    [
        r.iteration.to_string(),
        fmt_float(r.epoch),
        fmt_float(r.objective),
        fmt_opt(r.test_loss),
        fmt_opt(r.gap),
        fmt_float(r.elapsed_ms),
    ]
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one block of rows per method, `method` as the first column.
pub fn write_comparison(path: &Path, methods: &[(String, Vec<TraceRecord>)]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header = vec!["method"];
    header.extend(TRACE_HEADER);
    w.write_record(&header)?;
    for (name, records) in methods {
        for r in records {
            let mut row = vec![name.clone()];
            row.extend(record_fields(r));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges(path: &Path, edges: &[Edge]) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    for e in edges {
        writeln!(f, "{} {} {}", e.i, e.j, fmt_float(e.corr))?;
    }
    Ok(())
}

/// Reads `i j [corr]` lines (0-based, `#` starts a comment).
pub fn read_edges(path: &Path) -> anyhow::Result<Vec<(usize, usize)>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open graph file {}", path.display()))?;
    let mut edges = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        let mut index = |what: &str| -> anyhow::Result<usize> {
            it.next()
                .with_context(|| format!("{}:{}: missing {what}", path.display(), n + 1))?
                .parse()
                .with_context(|| format!("{}:{}: bad {what}", path.display(), n + 1))
        };
        let i = index("first endpoint")?;
        let j = index("second endpoint")?;
        edges.push((i, j));
    }
    Ok(edges)
}
