//! Text formats shared by the CLI: fixed numeric formatting and the panel
//! CSV schema `date,<asset>_rv,<asset>_rsm,<asset>_rsp,...`.

use std::io::{self, BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use thiserror::Error;

use crate::realized::{DailyMeasure, MeasureError, MeasurePanel};

#[derive(Debug, Error)]
pub enum PanelCsvError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Panel(#[from] MeasureError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Six significant digits, ties to even, positional notation. Negative zero
/// prints as zero; non-finite values print as an empty field.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // `{:e}` rounds the exact binary value half-to-even
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in 0..(int_len - digits.len()) {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

pub fn panel_header(panel: &MeasurePanel) -> String {
    let mut h = String::from("date");
    for a in panel.assets() {
        h.push_str(&format!(",{a}_rv,{a}_rsm,{a}_rsp"));
    }
    h
}

/// Panel values are written with shortest round-trip precision so the file
/// reproduces the in-memory panel exactly.
pub fn write_panel_csv<W: Write>(panel: &MeasurePanel, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", panel_header(panel))?;
    for (t, date) in panel.dates().iter().enumerate() {
        write!(out, "{}", date.format("%Y-%m-%d"))?;
        for m in panel.row(t) {
            write!(out, ",{},{},{}", m.rv, m.rs_minus, m.rs_plus)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_panel_csv<R: Read>(source: R) -> Result<MeasurePanel, PanelCsvError> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => {
            return Err(PanelCsvError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.first() != Some(&"date") || (cols.len() - 1) % 3 != 0 {
        return Err(PanelCsvError::Parse {
            line: 1,
            message: "expected `date` followed by <asset>_rv,<asset>_rsm,<asset>_rsp groups".into(),
        });
    }
    let mut assets = Vec::new();
    for group in cols[1..].chunks(3) {
        let asset = group[0].strip_suffix("_rv").ok_or_else(|| PanelCsvError::Parse {
            line: 1,
            message: format!("column `{}` should end in _rv", group[0]),
        })?;
        if group[1] != format!("{asset}_rsm") || group[2] != format!("{asset}_rsp") {
            return Err(PanelCsvError::Parse {
                line: 1,
                message: format!("columns for `{asset}` must be _rv, _rsm, _rsp"),
            });
        }
        assets.push(asset.to_string());
    }

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(PanelCsvError::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|e| PanelCsvError::Parse {
            line: line_no,
            message: format!("bad date `{}`: {e}", fields[0]),
        })?;
        let mut row = Vec::with_capacity(assets.len());
        for group in fields[1..].chunks(3) {
            let mut v = [0.0; 3];
            for (k, s) in group.iter().enumerate() {
                v[k] = s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| PanelCsvError::Parse {
                    line: line_no,
                    message: format!("bad value `{s}`"),
                })?;
            }
            row.push(DailyMeasure {
                date,
                rv: v[0],
                rs_minus: v[1],
                rs_plus: v[2],
            });
        }
        dates.push(date);
        values.push(row);
    }
    Ok(MeasurePanel::new(assets, dates, values)?)
}
