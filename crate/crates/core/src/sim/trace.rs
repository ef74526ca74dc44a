//! Per-sample trace records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector4};

use crate::error::OutputError;
use crate::linear_model::ThetaVec;
use crate::Vector12;

/// One control step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// True plant state at `t`.
    pub state: Vector12,
    /// Measured output at `t`.
    pub measured: Vector12,
    /// Physical input held over `[t, t + Ts)`.
    pub input: Vector4<f64>,
    /// Estimate after the update at `t`.
    pub theta: ThetaVec,
    pub lambda: f64,
    pub slack_max: f64,
    pub qp_iterations: usize,
    pub qp_kkt: f64,
    /// `p − p_d` at `t`.
    pub tracking_error: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

pub const COLUMN_COUNT: usize = 48;

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into()];
    h.extend(["p1", "p2", "p3", "psi", "phi", "theta", "v1", "v2", "v3", "w1", "w2", "w3"].map(String::from));
    h.extend((1..=12).map(|i| format!("y{i}")));
    h.extend(["f", "tau1", "tau2", "tau3"].map(String::from));
    h.extend((1..=12).map(|i| format!("th{i}")));
    h.extend(["lambda", "slack_max", "qp_iters", "qp_kkt"].map(String::from));
    h.extend((1..=3).map(|i| format!("e{i}")));
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl TraceRecord {
    fn to_row(&self) -> Vec<String> {
        let mut row = Vec::with_capacity(COLUMN_COUNT);
        row.push(fmt(self.t));
        row.extend(self.state.iter().map(|&v| fmt(v)));
        row.extend(self.measured.iter().map(|&v| fmt(v)));
        row.extend(self.input.iter().map(|&v| fmt(v)));
        row.extend(self.theta.0.iter().map(|&v| fmt(v)));
        row.push(fmt(self.lambda));
        row.push(fmt(self.slack_max));
        row.push(self.qp_iterations.to_string());
        row.push(fmt(self.qp_kkt));
        row.extend(self.tracking_error.iter().map(|&v| fmt(v)));
        row
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self, String> {
        if row.len() != COLUMN_COUNT {
            return Err(format!("expected {COLUMN_COUNT} columns, found {}", row.len()));
        }
        let num = |i: usize| -> Result<f64, String> {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("column {i}: {e}"))
        };
        let block = |start: usize, len: usize| -> Result<Vec<f64>, String> {
            (start..start + len).map(num).collect()
        };
        Ok(Self {
            t: num(0)?,
            state: Vector12::from_column_slice(&block(1, 12)?),
            measured: Vector12::from_column_slice(&block(13, 12)?),
            input: Vector4::from_column_slice(&block(25, 4)?),
            theta: ThetaVec::from_slice(&block(29, 12)?),
            lambda: num(41)?,
            slack_max: num(42)?,
            qp_iterations: row[43]
                .trim()
                .parse()
                .map_err(|e| format!("column 43: {e}"))?,
            qp_kkt: num(44)?,
            tracking_error: Vector3::from_column_slice(&block(45, 3)?),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.state.iter().all(|v| v.is_finite())
            && self.measured.iter().all(|v| v.is_finite())
            && self.input.iter().all(|v| v.is_finite())
            && self.theta.is_finite()
            && self.lambda.is_finite()
            && self.slack_max.is_finite()
            && self.qp_kkt.is_finite()
            && self.tracking_error.iter().all(|v| v.is_finite())
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with `t` in `[start, end]`.
    pub fn window(&self, start: f64, end: f64) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(move |r| r.t >= start - 1e-9 && r.t <= end + 1e-9)
    }

    /// Per-axis RMS tracking error over `[start, end]`.
    pub fn rms_tracking_error(&self, start: f64, end: f64) -> Vector3<f64> {
        let mut sum = Vector3::zeros();
        let mut n = 0usize;
        for r in self.window(start, end) {
            sum += r.tracking_error.component_mul(&r.tracking_error);
            n += 1;
        }
        if n == 0 {
            return Vector3::repeat(f64::NAN);
        }
        (sum / n as f64).map(f64::sqrt)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(csv_header())?;
        for r in &self.records {
            w.write_record(r.to_row())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(|e| e.to_string())?.clone();
        if header.iter().ne(csv_header().iter().map(String::as_str)) {
            return Err("unexpected CSV header".into());
        }
        let mut records = Vec::new();
        for (i, row) in r.records().enumerate() {
            let row = row.map_err(|e| e.to_string())?;
            records.push(TraceRecord::from_row(&row).map_err(|e| format!("row {}: {e}", i + 1))?);
        }
        Ok(Self { records })
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), OutputError> {
        let file = std::fs::File::create(path).map_err(|e| OutputError::Write {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| OutputError::Write {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn load_csv(path: &Path) -> Result<Self, OutputError> {
        let read_err = |message: String| OutputError::Read {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| read_err(e.to_string()))?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(read_err)
    }
}
