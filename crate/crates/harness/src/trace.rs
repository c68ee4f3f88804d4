//! CSV traces and their aggregation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::run::{checkpoints, TraceRow};
use crate::stats::{mean_stderr, SummaryRow};
use crate::HarnessError;

pub const HEADER: [&str; 10] = [
    "run_id",
    "seed",
    "algorithm",
    "t",
    "realized_loss",
    "cum_loss",
    "cum_regret",
    "segment_id",
    "p_max",
    "diag",
];

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(e.to_string())
}

pub fn write_trace<'a, W: Write>(rows: impl IntoIterator<Item = &'a TraceRow>, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.seed.to_string(),
            r.algorithm.to_string(),
            r.t.to_string(),
            fmt_f(r.realized_loss),
            fmt_f(r.cum_loss),
            fmt_f(r.cum_regret),
            r.segment_id.to_string(),
            fmt_f(r.p_max),
            r.diag.clone(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn trace_string<'a>(rows: impl IntoIterator<Item = &'a TraceRow>) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_trace(rows, &mut buf)?;
    String::from_utf8(buf).map_err(io_err)
}

/// The columns aggregation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    /// Index of the file the row came from; runs are keyed by `(source, run_id)`.
    pub source: usize,
    pub run_id: String,
    pub seed: u64,
    pub algorithm: String,
    pub t: usize,
    pub cum_regret: f64,
}

pub fn read_trace<R: Read>(input: R, label: &str, source: usize) -> Result<Vec<ParsedRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| HarnessError::Config(format!("{label}: {e}")))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(HarnessError::Config(format!("{label}: header does not match the trace schema")));
    }
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Config(format!("{label}: {e}")))?;
        let bad = |col: &str| HarnessError::Config(format!("{label}: row {}: bad {col}", n + 2));
        rows.push(ParsedRow {
            source,
            run_id: rec[0].to_string(),
            seed: rec[1].parse().map_err(|_| bad("seed"))?,
            algorithm: rec[2].to_string(),
            t: rec[3].parse().map_err(|_| bad("t"))?,
            cum_regret: rec[6].parse().map_err(|_| bad("cum_regret"))?,
        });
    }
    Ok(rows)
}

/// Per-algorithm checkpoint statistics and ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rows: Vec<SummaryRow>,
    /// `(algorithm, horizon, label, mean regret at T over mean regret at the checkpoint)`.
    pub ratios: Vec<(String, usize, String, f64)>,
}

pub fn aggregate_rows(rows: &[ParsedRow]) -> Aggregate {
    // (source, run) -> (algorithm, t -> regret)
    let mut runs: BTreeMap<(usize, &str), (&str, BTreeMap<usize, f64>)> = BTreeMap::new();
    for r in rows {
        let entry = runs.entry((r.source, &r.run_id)).or_insert((&r.algorithm, BTreeMap::new()));
        entry.1.insert(r.t, r.cum_regret);
    }
    let mut groups: BTreeMap<(String, usize), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (alg, by_t) in runs.values() {
        let horizon = match by_t.keys().next_back() {
            Some(&h) => h,
            None => continue,
        };
        let g = groups.entry((alg.to_string(), horizon)).or_default();
        for c in checkpoints(horizon) {
            if let Some(v) = by_t.get(&c) {
                g.entry(c).or_default().push(*v);
            }
        }
    }
    let mut out = Aggregate {
        rows: Vec::new(),
        ratios: Vec::new(),
    };
    for ((alg, horizon), by_t) in groups {
        let mut means = BTreeMap::new();
        for (t, vals) in by_t {
            let (mean, stderr) = mean_stderr(&vals);
            means.insert(t, mean);
            out.rows.push(SummaryRow {
                algorithm: alg.clone(),
                horizon,
                t,
                n: vals.len(),
                mean,
                stderr,
            });
        }
        if let Some(&last) = means.get(&horizon) {
            for (label, t) in [("T/T4", horizon / 4), ("T/T2", horizon / 2)] {
                if let Some(&m) = means.get(&t) {
                    if t != horizon {
                        out.ratios.push((alg.clone(), horizon, label.to_string(), last / m));
                    }
                }
            }
        }
    }
    out
}

pub fn aggregate_files<P: AsRef<Path>>(paths: &[P]) -> Result<Aggregate, HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::Config("aggregate needs at least one file".into()));
    }
    let mut all = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let p = p.as_ref();
        let f = std::fs::File::open(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
        all.extend(read_trace(f, &p.display().to_string(), i)?);
    }
    Ok(aggregate_rows(&all))
}

/// Summary rows as CSV text.
pub fn summary_string(rows: &[SummaryRow]) -> String {
    let mut s = String::from("algorithm,horizon,t,n,mean_regret,stderr\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm,
            r.horizon,
            r.t,
            r.n,
            fmt_f(r.mean),
            fmt_f(r.stderr)
        ));
    }
    s
}

impl Aggregate {
    pub fn render(&self) -> String {
        let mut s = summary_string(&self.rows);
        if !self.ratios.is_empty() {
            s.push_str("\nalgorithm,horizon,ratio,value\n");
            for (alg, h, label, v) in &self.ratios {
                s.push_str(&format!("{alg},{h},{label},{}\n", fmt_f(*v)));
            }
        }
        s
    }
}
