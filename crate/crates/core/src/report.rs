//! Result tables in CSV and JSON.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly. Non-finite values are written as `inf`, `-inf` or `nan`
//! (as strings in JSON).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, ResolvedDetector, RiskEstimate};

pub const CSV_HEADER: [&str; 17] = [
    "experiment_id",
    "n1",
    "n2",
    "k1",
    "k2",
    "p0",
    "delta",
    "detector",
    "threshold_mode",
    "threshold",
    "trials",
    "seed",
    "type1",
    "se1",
    "type2",
    "se2",
    "risk",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub n1: usize,
    pub n2: usize,
    pub k1: usize,
    pub k2: usize,
    #[serde(deserialize_with = "de_float")]
    pub p0: f64,
    #[serde(deserialize_with = "de_float")]
    pub delta: f64,
    pub detector: String,
    pub threshold_mode: String,
    #[serde(deserialize_with = "de_float")]
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(deserialize_with = "de_float")]
    pub type1: f64,
    #[serde(deserialize_with = "de_float")]
    pub se1: f64,
    #[serde(deserialize_with = "de_float")]
    pub type2: f64,
    #[serde(deserialize_with = "de_float")]
    pub se2: f64,
    #[serde(deserialize_with = "de_float")]
    pub risk: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FloatRepr {
    Number(f64),
    Text(String),
}

fn de_float<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match FloatRepr::deserialize(d)? {
        FloatRepr::Number(x) => Ok(x),
        FloatRepr::Text(s) => f64::from_str(s.trim()).map_err(serde::de::Error::custom),
    }
}

/// Formats `x` with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn json_float(x: f64) -> String {
    if x.is_finite() {
        format_float(x)
    } else {
        format!("\"{}\"", format_float(x))
    }
}

/// Builds one row per estimate.
pub fn rows_from_estimates(
    cfg: &ExperimentConfig,
    det: &ResolvedDetector,
    estimates: &[RiskEstimate],
) -> Vec<ResultRow> {
    estimates
        .iter()
        .map(|e| ResultRow {
            experiment_id: cfg.experiment_id.clone(),
            n1: cfg.shape.n1,
            n2: cfg.shape.n2,
            k1: cfg.shape.k1,
            k2: cfg.shape.k2,
            p0: cfg.p0,
            delta: e.delta,
            detector: cfg.detector.tag.as_str().to_string(),
            threshold_mode: cfg.threshold.mode.name().to_string(),
            threshold: det.threshold,
            trials: e.trials,
            seed: cfg.seed,
            type1: e.type1,
            se1: e.se1,
            type2: e.type2,
            se2: e.se2,
            risk: e.risk,
        })
        .collect()
}

impl ResultRow {
    fn fields(&self) -> [String; 17] {
        [
            self.experiment_id.clone(),
            self.n1.to_string(),
            self.n2.to_string(),
            self.k1.to_string(),
            self.k2.to_string(),
            format_float(self.p0),
            format_float(self.delta),
            self.detector.clone(),
            self.threshold_mode.clone(),
            format_float(self.threshold),
            self.trials.to_string(),
            self.seed.to_string(),
            format_float(self.type1),
            format_float(self.se1),
            format_float(self.type2),
            format_float(self.se2),
            format_float(self.risk),
        ]
    }

    fn is_numeric(column: usize) -> bool {
        !matches!(column, 0 | 7 | 8)
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Format {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for row in rows {
        w.write_record(row.fields()).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Format {
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| Error::Format {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Format {
            line: 1,
            message: format!("unexpected header, expected {}", CSV_HEADER.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Format {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    let mut s = String::from("[");
    for (i, row) in rows.iter().enumerate() {
        s.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
        for (c, (name, value)) in CSV_HEADER.iter().zip(row.fields()).enumerate() {
            if c > 0 {
                s.push_str(", ");
            }
            let value = match c {
                5 | 6 | 9 | 12..=16 => json_float(value.parse().expect("formatted float")),
                _ if ResultRow::is_numeric(c) => value,
                _ => serde_json::to_string(&value).expect("string serialization"),
            };
            s.push_str(&format!("\"{name}\": {value}"));
        }
        s.push('}');
    }
    s.push_str(if rows.is_empty() { "]\n" } else { "\n]\n" });
    out.write_all(s.as_bytes()).map_err(|e| Error::Format {
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    serde_json::from_reader(input).map_err(|e| Error::Format {
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::param(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

/// Renders a table into bytes.
pub fn render(rows: &[ResultRow], format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(rows, &mut buf)?,
        OutputFormat::Json => write_json(rows, &mut buf)?,
    }
    Ok(buf)
}

/// Writes a table to `path`.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&render(rows, format)?).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table from `path`.
pub fn load_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        OutputFormat::Csv => read_csv(file),
        OutputFormat::Json => read_json(file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(x: f64, threshold: f64) -> ResultRow {
        ResultRow {
            experiment_id: "exp, \"quoted\"".into(),
            n1: 10,
            n2: 20,
            k1: 3,
            k2: 4,
            p0: 0.1,
            delta: x,
            detector: "TOTAL_DEGREE".into(),
            threshold_mode: "CALIBRATED".into(),
            threshold,
            trials: 1000,
            seed: u64::MAX,
            type1: 1.0 / 3.0,
            se1: x * 1e-300,
            type2: 0.0,
            se2: 1.0,
            risk: 2.0f64.sqrt(),
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let bytes = render(&[], OutputFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_csv(&b"experiment_id,n1\n"[..]).is_err());
        let bytes = render(&[], OutputFormat::Json).unwrap();
        assert!(read_json(&bytes[..]).unwrap().is_empty());
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn infinite_thresholds_round_trip() {
        for h in [f64::INFINITY, f64::NEG_INFINITY] {
            let rows = vec![row(0.5, h)];
            for f in [OutputFormat::Csv, OutputFormat::Json] {
                let back = match f {
                    OutputFormat::Csv => read_csv(&render(&rows, f).unwrap()[..]).unwrap(),
                    OutputFormat::Json => read_json(&render(&rows, f).unwrap()[..]).unwrap(),
                };
                assert_eq!(back, rows);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = vec![row(0.25, 3.0), row(0.5, 4.0)];
        emit_results(&rows, &path, OutputFormat::Csv).unwrap();
        assert_eq!(load_results(&path, OutputFormat::Csv).unwrap(), rows);
        let missing = dir.path().join("nope").join("out.csv");
        assert!(matches!(
            emit_results(&rows, &missing, OutputFormat::Csv),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn floats_round_trip_bitwise(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, h in any::<f64>().prop_filter("not nan", |h| !h.is_nan())) {
            let rows = vec![row(x, h)];
            let csv_back = read_csv(&render(&rows, OutputFormat::Csv).unwrap()[..]).unwrap();
            let json_back = read_json(&render(&rows, OutputFormat::Json).unwrap()[..]).unwrap();
            prop_assert_eq!(csv_back[0].delta.to_bits(), x.to_bits());
            prop_assert_eq!(json_back[0].delta.to_bits(), x.to_bits());
            prop_assert_eq!(csv_back[0].threshold.to_bits(), h.to_bits());
            prop_assert_eq!(json_back[0].threshold.to_bits(), h.to_bits());
            prop_assert_eq!(&csv_back, &rows);
        }
    }
}
