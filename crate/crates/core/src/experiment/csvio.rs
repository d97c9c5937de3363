//! CSV artifacts: constraint streams, per-step records, trial aggregates, regret ledgers and
//! the drift profile. Reals are written with 17 significant digits so they read back exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::metric::{Constraint, Label};
use crate::{Error, Result};

/// `v` in scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt17(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

pub fn constraint_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "y".to_string()];
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..n).map(|i| format!("z_{i}")));
    h
}

pub fn write_constraints<W: Write>(out: W, constraints: &[Constraint<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = constraints.first().map_or(0, |c| c.dim());
    if constraints.is_empty() {
        w.flush()?;
        return Ok(());
    }
    w.write_record(constraint_header(n))?;
    for c in constraints {
        if c.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.dim(),
            });
        }
        let mut row = vec![c.t().to_string(), c.y().as_i8().to_string()];
        row.extend(c.x().iter().map(|v| fmt17(*v)));
        row.extend(c.z().iter().map(|v| fmt17(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_constraints_file(path: &Path, constraints: &[Constraint<f64>]) -> Result<()> {
    write_constraints(File::create(path)?, constraints)
}

/// Streaming reader for the constraint CSV schema; each record is validated as it is read.
pub struct ConstraintReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    n: usize,
}

impl<R: Read> ConstraintReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let header = reader.headers()?.clone();
        let n = if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            0
        } else {
            if header.len() < 2 || (header.len() - 2) % 2 != 0 {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("header has {} columns, expected t,y,x_*,z_*", header.len()),
                });
            }
            let n = (header.len() - 2) / 2;
            let expected = constraint_header(n);
            if let Some((i, (got, want))) = header
                .iter()
                .zip(&expected)
                .enumerate()
                .find(|(_, (g, w))| g.trim() != w.as_str())
            {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("column {i} is {got:?}, expected {want:?}"),
                });
            }
            n
        };
        Ok(Self {
            records: reader.into_records(),
            n,
        })
    }

    /// Point dimension declared by the header (0 for an empty file).
    pub fn dim(&self) -> usize {
        self.n
    }

    fn parse(&self, rec: &csv::StringRecord) -> Result<Constraint<f64>> {
        let line = rec.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::Parse { line, msg };
        if rec.len() != 2 + 2 * self.n {
            return Err(err(format!(
                "expected {} fields, found {}",
                2 + 2 * self.n,
                rec.len()
            )));
        }
        let t: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad step index {:?}", &rec[0])))?;
        let y = match rec[1].trim() {
            "1" | "+1" => Label::Similar,
            "-1" => Label::Dissimilar,
            other => return Err(err(format!("label must be 1 or -1, got {other:?}"))),
        };
        let mut vals = Vec::with_capacity(2 * self.n);
        for (i, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(format!("field {} is not a number: {field:?}", i + 2)))?;
            vals.push(v);
        }
        let x = DVector::from_column_slice(&vals[..self.n]);
        let z = DVector::from_column_slice(&vals[self.n..]);
        Constraint::new(t, x, z, y).map_err(|e| err(e.to_string()))
    }
}

impl<R: Read> Iterator for ConstraintReader<R> {
    type Item = Result<Constraint<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        Some(rec.map_err(Error::from).and_then(|r| self.parse(&r)))
    }
}

/// Reads a whole constraint CSV. An empty file yields an empty stream.
pub fn ingest_constraints(path: &Path) -> Result<Vec<Constraint<f64>>> {
    ConstraintReader::new(File::open(path)?)?.collect()
}

/// One row of the per-step CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub trial: usize,
    pub t: u64,
    pub combined_loss: f64,
    pub knn_error: Option<f64>,
    pub nmi: Option<f64>,
    /// `(level, normalized weight)` of the learners combined at this step.
    pub weights: Vec<(u32, f64)>,
}

pub const STEP_HEADER: [&str; 7] = [
    "trial",
    "t",
    "combined_loss",
    "knn_error",
    "nmi",
    "active_levels",
    "weights_json",
];

fn weights_json(weights: &[(u32, f64)]) -> String {
    let body: Vec<String> = weights
        .iter()
        .map(|(level, w)| format!("\"{level}\":{}", fmt17(*w)))
        .collect();
    format!("{{{}}}", body.join(","))
}

pub struct StepWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> StepWriter<W> {
    pub fn new(out: W, header: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        if header {
            inner.write_record(STEP_HEADER)?;
        }
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &StepRow) -> Result<()> {
        let levels: Vec<String> = row.weights.iter().map(|(l, _)| l.to_string()).collect();
        self.inner.write_record([
            row.trial.to_string(),
            row.t.to_string(),
            fmt17(row.combined_loss),
            opt17(row.knn_error),
            opt17(row.nmi),
            levels.join(";"),
            weights_json(&row.weights),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub mean_knn_error: Option<f64>,
    pub p_nmi_exceeds: Option<f64>,
    pub mean_combined_loss: f64,
}

pub const AGGREGATE_HEADER: [&str; 4] =
    ["t", "mean_knn_error", "p_nmi_exceeds", "mean_combined_loss"];

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            opt17(r.mean_knn_error),
            opt17(r.p_nmi_exceeds),
            fmt17(r.mean_combined_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an aggregate CSV back (blank cells become `None`).
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != AGGREGATE_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected aggregate header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::Parse {
                line,
                msg: format!("column {} is not a number: {s:?}", AGGREGATE_HEADER[i]),
            })
        };
        let t = rec[0].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad step index {:?}", &rec[0]),
        })?;
        out.push(AggregateRow {
            t,
            mean_knn_error: num(1)?,
            p_nmi_exceeds: num(2)?,
            mean_combined_loss: num(3)?.ok_or_else(|| Error::Parse {
                line,
                msg: "mean_combined_loss is empty".into(),
            })?,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretRow {
    pub trial: usize,
    pub t: u64,
    pub algorithm_loss: f64,
    pub comparator_loss: f64,
    /// `‖θ*_t − θ*_{t−1}‖` of the ground-truth comparator (0 at `t = 1`).
    pub comparator_step: f64,
}

pub const REGRET_HEADER: [&str; 5] = [
    "trial",
    "t",
    "algorithm_loss",
    "comparator_loss",
    "comparator_step",
];

pub struct RegretWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RegretWriter<W> {
    pub fn new(out: W, header: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        if header {
            inner.write_record(REGRET_HEADER)?;
        }
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &RegretRow) -> Result<()> {
        self.inner.write_record([
            r.trial.to_string(),
            r.t.to_string(),
            fmt17(r.algorithm_loss),
            fmt17(r.comparator_loss),
            fmt17(r.comparator_step),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftRow {
    pub t: u64,
    pub segment: usize,
    pub partition: &'static str,
    pub drift_rate: f64,
    /// `‖M*_t − M*_{t−1}‖_F / ‖M*_t‖_F` of the ground-truth metric.
    pub metric_change: f64,
}

pub fn write_drift_profile<W: Write>(out: W, rows: &[DriftRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "segment", "partition", "drift_rate", "metric_change"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.segment.to_string(),
            r.partition.to_string(),
            fmt17(r.drift_rate),
            fmt17(r.metric_change),
        ])?;
    }
    w.flush()?;
    Ok(())
}
