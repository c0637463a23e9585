//! Trace CSV: `t,state_0..,udes_0..,uout_0..,h_<id>..,intervened,status,solve_time`.
//!
//! Floats use Rust's shortest round-trip formatting, so reading a written trace
//! reproduces every number exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{EpisodeTrace, StepRecord, StepStatus};
use crate::error::{Error, Result};

pub fn trace_header(
    state_dim: usize,
    control_dim: usize,
    constraint_ids: &[String],
) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..state_dim).map(|i| format!("state_{i}")));
    cols.extend((0..control_dim).map(|i| format!("udes_{i}")));
    cols.extend((0..control_dim).map(|i| format!("uout_{i}")));
    cols.extend(constraint_ids.iter().map(|id| format!("h_{id}")));
    cols.extend(["intervened", "status", "solve_time"].map(String::from));
    cols
}

fn dims(trace: &EpisodeTrace) -> (usize, usize) {
    if let Some(cfg) = &trace.config {
        (cfg.model.state_dim(), cfg.model.control_dim())
    } else if let Some(r) = trace.records.first() {
        (r.state.len(), r.u_des.len())
    } else {
        (0, 0)
    }
}

pub fn write_trace_to<W: Write>(trace: &EpisodeTrace, out: W) -> Result<()> {
    let (n, m) = dims(trace);
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    };
    w.write_record(trace_header(n, m, &trace.constraint_ids))
        .map_err(|e| Error::io("<trace>", to_io(e)))?;
    for r in &trace.records {
        let mut row = Vec::with_capacity(n + 2 * m + r.h.len() + 4);
        row.push(r.t.to_string());
        row.extend(r.state.iter().map(f64::to_string));
        row.extend(r.u_des.iter().map(f64::to_string));
        row.extend(r.u_out.iter().map(f64::to_string));
        row.extend(r.h.iter().map(f64::to_string));
        row.push(if r.intervened { "1" } else { "0" }.to_string());
        row.push(r.status.as_str().to_string());
        row.push(r.solve_time.to_string());
        w.write_record(&row)
            .map_err(|e| Error::io("<trace>", to_io(e)))?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn write_trace(trace: &EpisodeTrace, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_to(trace, BufWriter::new(f)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

/// Column layout recovered from a header.
struct Layout {
    state_dim: usize,
    control_dim: usize,
    constraint_ids: Vec<String>,
}

fn parse_header(cols: &[&str]) -> Result<Layout> {
    let missing = |name: String| Error::parse(1, format!("missing column '{name}'"));
    let mut i = 0;
    if cols.first() != Some(&"t") {
        return Err(missing("t".into()));
    }
    i += 1;
    let count = |prefix: &str, i: &mut usize| {
        let mut k = 0;
        while cols.get(*i).is_some_and(|c| *c == format!("{prefix}_{k}")) {
            k += 1;
            *i += 1;
        }
        k
    };
    let state_dim = count("state", &mut i);
    if state_dim == 0 {
        return Err(missing("state_0".into()));
    }
    let control_dim = count("udes", &mut i);
    if control_dim == 0 {
        return Err(missing("udes_0".into()));
    }
    let uout = count("uout", &mut i);
    if uout != control_dim {
        return Err(missing(format!("uout_{uout}")));
    }
    let mut constraint_ids = Vec::new();
    while let Some(id) = cols.get(i).and_then(|c| c.strip_prefix("h_")) {
        constraint_ids.push(id.to_string());
        i += 1;
    }
    for name in ["intervened", "status", "solve_time"] {
        if cols.get(i) != Some(&name) {
            return Err(missing(name.into()));
        }
        i += 1;
    }
    if let Some(extra) = cols.get(i) {
        return Err(Error::parse(1, format!("unexpected column '{extra}'")));
    }
    Ok(Layout {
        state_dim,
        control_dim,
        constraint_ids,
    })
}

/// Reads a trace written by [`write_trace`]. Only the per-step records are
/// stored in the file; `config`, `final_state` and `aborted` come back empty.
pub fn read_trace(path: &Path) -> Result<EpisodeTrace> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

pub(crate) fn parse_trace(text: &str) -> Result<EpisodeTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::parse(1, e.to_string())),
        None => return Err(Error::parse(1, "empty trace file")),
    };
    let names: Vec<&str> = header.iter().collect();
    let layout = parse_header(&names)?;
    let (n, m, k) = (
        layout.state_dim,
        layout.control_dim,
        layout.constraint_ids.len(),
    );

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != names.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", names.len(), row.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                Error::parse(
                    line,
                    format!("column '{}': invalid number '{}'", names[i], &row[i]),
                )
            })
        };
        let nums =
            |from: usize, len: usize| (from..from + len).map(num).collect::<Result<Vec<_>>>();
        let mut c = 0;
        let t = num(c)?;
        c += 1;
        let state = nums(c, n)?;
        c += n;
        let u_des = nums(c, m)?;
        c += m;
        let u_out = nums(c, m)?;
        c += m;
        let h = nums(c, k)?;
        c += k;
        let intervened = match &row[c] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    line,
                    format!("column 'intervened': expected 0 or 1, got '{other}'"),
                ))
            }
        };
        c += 1;
        let status = StepStatus::parse(&row[c]).ok_or_else(|| {
            Error::parse(
                line,
                format!("column 'status': unknown status '{}'", &row[c]),
            )
        })?;
        c += 1;
        let solve_time = num(c)?;
        records.push(StepRecord {
            t,
            state,
            u_des,
            u_out,
            h,
            intervened,
            status,
            solve_time,
        });
    }
    Ok(EpisodeTrace {
        constraint_ids: layout.constraint_ids,
        records,
        config: None,
        config_hash: None,
        final_state: None,
        aborted: None,
    })
}
