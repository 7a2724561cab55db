//! Output schemas. Every number goes through `fmt_sig6`; missing values are
//! empty fields.

use std::io::{self, Write};

use nalgebra::DMatrix;
use volspill::ingestion::DroppedDay;
use volspill::output::{fmt_opt, fmt_sig6};
use volspill::rolling::{SpilloverSeries, SummaryRow};
use volspill::spillover::SpilloverSet;
use volspill::MeasureKind;

/// One line of `ingest_report.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub asset: String,
    pub date: chrono::NaiveDate,
    pub ticks: usize,
    pub grid_points: usize,
    pub status: &'static str,
}

impl ReportRow {
    pub fn dropped(d: &DroppedDay) -> Self {
        Self {
            asset: d.asset_id.clone(),
            date: d.date,
            ticks: d.tick_count,
            grid_points: d.grid_points,
            status: d.reason.as_str(),
        }
    }
}

pub fn write_ingest_report<W: Write>(rows: &[ReportRow], mut out: W) -> io::Result<()> {
    writeln!(out, "asset,date,ticks,grid_points,status")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.asset, r.date, r.ticks, r.grid_points, r.status)?;
    }
    Ok(())
}

fn kind_set(series: &SpilloverSeries, w: usize, kind: MeasureKind) -> Option<&SpilloverSet> {
    series.estimate(w, kind).map(|e| &e.spillovers)
}

pub fn write_total<W: Write>(series: &SpilloverSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "date,total_rv,total_rsp,total_rsm,sam")?;
    for (w, win) in series.windows.iter().enumerate() {
        let total = |k| fmt_opt(kind_set(series, w, k).map(|s| s.total));
        writeln!(
            out,
            "{},{},{},{},{}",
            win.date,
            total(MeasureKind::Rv),
            total(MeasureKind::RsPlus),
            total(MeasureKind::RsMinus),
            fmt_opt(win.sam.as_ref().and_then(|p| p.sam)),
        )?;
    }
    Ok(())
}

/// Rows ordered by date, then measure (run order), then asset. The SAM
/// columns depend only on date and asset and repeat across measures.
pub fn write_directional<W: Write>(series: &SpilloverSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "date,asset,from,to,net,sam_from,sam_to,measure")?;
    for (w, win) in series.windows.iter().enumerate() {
        for &kind in &series.kinds {
            let set = kind_set(series, w, kind);
            for (i, asset) in series.assets.iter().enumerate() {
                let pick = |f: fn(&SpilloverSet) -> &Vec<f64>| fmt_opt(set.map(|s| f(s)[i]));
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    win.date,
                    asset,
                    pick(|s| &s.from_others),
                    pick(|s| &s.to_others),
                    pick(|s| &s.net),
                    fmt_opt(win.sam.as_ref().and_then(|p| p.sam_from[i])),
                    fmt_opt(win.sam.as_ref().and_then(|p| p.sam_to[i])),
                    kind,
                )?;
            }
        }
    }
    Ok(())
}

/// Pairs with `i` before `j` in asset order; `net_pairwise` is the net flow
/// from `i` to `j`.
pub fn write_pairwise<W: Write>(series: &SpilloverSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "date,i,j,net_pairwise,measure")?;
    let n = series.assets.len();
    for (w, win) in series.windows.iter().enumerate() {
        for &kind in &series.kinds {
            let set = kind_set(series, w, kind);
            for i in 0..n {
                for j in (i + 1)..n {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        win.date,
                        series.assets[i],
                        series.assets[j],
                        fmt_opt(set.map(|s| s.pairwise[(i, j)])),
                        kind
                    )?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_diagnostics<W: Write>(series: &SpilloverSeries, mut out: W) -> io::Result<()> {
    writeln!(out, "date,measure,lag,spectral_radius,condition,unstable,status")?;
    for win in &series.windows {
        for (kind, outcome) in series.kinds.iter().zip(&win.outcomes) {
            match outcome {
                Ok(e) => writeln!(
                    out,
                    "{},{},{},{},{},{},ok",
                    win.date,
                    kind,
                    e.lag,
                    fmt_sig6(e.spectral_radius),
                    fmt_sig6(e.condition),
                    e.unstable
                )?,
                Err(f) => writeln!(out, "{},{},,,,,{}", win.date, kind, f.code())?,
            }
        }
    }
    Ok(())
}

/// Spillover table: rows receive, columns transmit, entries in percent,
/// with the FROM column, TO row and TOTAL cell.
pub fn fevd_table(names: &[String], norm: &DMatrix<f64>, set: &SpilloverSet) -> String {
    let n = names.len();
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(n + 3);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    header.push("FROM".into());
    cells.push(header);
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..n).map(|j| fmt_sig6(100.0 * norm[(i, j)])));
        row.push(fmt_sig6(set.from_others[i]));
        cells.push(row);
    }
    let mut to = vec!["TO".to_string()];
    to.extend(set.to_others.iter().map(|v| fmt_sig6(*v)));
    to.push("TOTAL".into());
    cells.push(to);
    let mut total = vec![String::new(); n + 1];
    total.push(fmt_sig6(set.total));
    cells.push(total);

    let widths: Vec<usize> = (0..n + 2)
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for row in &cells {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                line.push_str(&format!("{:<w$}", cell, w = widths[0]));
            } else {
                line.push_str(&format!("  {:>w$}", cell, w = widths[c]));
            }
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> io::Result<()> {
    writeln!(out, "range_start,range_end,column,count,mean,sd")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.range.start,
            r.range.end,
            r.column,
            r.count,
            fmt_opt(r.mean),
            fmt_opt(r.sd)
        )?;
    }
    Ok(())
}
