//! `trials.csv`: one row per trial, in trial order.
//!
//! Columns are `trial_index, generator, <params in space order>, objective,
//! sem, status, elapsed_ms`. Reals are written with 17 significant digits,
//! so they read back bit-exact. A missing objective or sem is an empty
//! cell.

use std::path::{Path, PathBuf};

use gpbo::{Experiment, ParamValue};
use thiserror::Error;

const LEADING: [&str; 2] = ["trial_index", "generator"];
const TRAILING: [&str; 4] = ["objective", "sem", "status", "elapsed_ms"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: row {row}: {message}", path.display())]
    Format {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLogRecord {
    pub trial_index: usize,
    pub generator: String,
    /// `(name, rendered value)` in space order.
    pub params: Vec<(String, String)>,
    pub objective: Option<f64>,
    pub sem: Option<f64>,
    pub status: String,
    pub elapsed_ms: u64,
}

/// `printf("%.17g")`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = usize::try_from(16 - exp).expect("exp below 17");
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn render_value(v: &ParamValue) -> String {
    match v {
        ParamValue::Bool(b) => b.to_string(),
        ParamValue::Int(i) => i.to_string(),
        ParamValue::Float(x) => format_real(*x),
        ParamValue::Str(s) => s.clone(),
    }
}

/// Log rows for every trial of `experiment`.
pub fn records(experiment: &Experiment) -> Vec<TrialLogRecord> {
    let names: Vec<&str> = experiment
        .space()
        .params()
        .iter()
        .map(|p| p.name.as_str())
        .collect();
    experiment
        .trials()
        .iter()
        .map(|t| TrialLogRecord {
            trial_index: t.index(),
            generator: t.generator().as_str().to_string(),
            params: names
                .iter()
                .map(|&n| {
                    let cell = t.arm().get(n).map(render_value).unwrap_or_default();
                    (n.to_string(), cell)
                })
                .collect(),
            objective: t.observation().map(|o| o.objective),
            sem: t.observation().and_then(|o| o.sem),
            status: t.status().as_str().to_string(),
            elapsed_ms: t.elapsed_ms(),
        })
        .collect()
}

pub fn write_trial_log(experiment: &Experiment, path: &Path) -> Result<(), LogError> {
    let names: Vec<String> = experiment
        .space()
        .params()
        .iter()
        .map(|p| p.name.clone())
        .collect();
    write_records(&names, &records(experiment), path)
}

pub fn write_records(
    param_names: &[String],
    rows: &[TrialLogRecord],
    path: &Path,
) -> Result<(), LogError> {
    let err = |source| LogError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let header = LEADING
        .iter()
        .copied()
        .chain(param_names.iter().map(String::as_str))
        .chain(TRAILING);
    w.write_record(header).map_err(err)?;
    let opt = |x: Option<f64>| x.map(format_real).unwrap_or_default();
    for r in rows {
        let mut row = vec![r.trial_index.to_string(), r.generator.clone()];
        row.extend(r.params.iter().map(|(_, v)| v.clone()));
        row.extend([
            opt(r.objective),
            opt(r.sem),
            r.status.clone(),
            r.elapsed_ms.to_string(),
        ]);
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

pub fn read_trial_log(path: &Path) -> Result<Vec<TrialLogRecord>, LogError> {
    let csv_err = |source| LogError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |row: usize, message: String| LogError::Format {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let n = header.len();
    if n < LEADING.len() + TRAILING.len() || header[..2] != LEADING || header[n - 4..] != TRAILING {
        return Err(bad(0, format!("unexpected header {header:?}")));
    }
    let names = &header[2..n - 4];

    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        let real = |s: &str| -> Result<Option<f64>, LogError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| bad(row, format!("bad real `{s}`: {e}")))
            }
        };
        out.push(TrialLogRecord {
            trial_index: rec[0]
                .parse()
                .map_err(|e| bad(row, format!("trial_index: {e}")))?,
            generator: rec[1].to_string(),
            params: names
                .iter()
                .zip(rec.iter().skip(2))
                .map(|(n, v)| (n.clone(), v.to_string()))
                .collect(),
            objective: real(&rec[n - 4])?,
            sem: real(&rec[n - 3])?,
            status: rec[n - 2].to_string(),
            elapsed_ms: rec[n - 1]
                .parse()
                .map_err(|e| bad(row, format!("elapsed_ms: {e}")))?,
        });
    }
    Ok(out)
}
