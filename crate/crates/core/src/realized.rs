//! Daily realized variance, signed realized semivariances, and the aligned
//! cross-asset panel that feeds the VAR.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use thiserror::Error;

use crate::ingestion::ReturnGrid;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("no observations")]
    Empty,
    #[error("non-finite return at position {0}")]
    NonFinite(usize),
    #[error("panel needs at least two assets, got {0}")]
    TooFewAssets(usize),
    #[error("no date is common to all assets")]
    EmptyIntersection,
    #[error("invalid panel: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

fn check(returns: &[f64]) -> Result<()> {
    if returns.is_empty() {
        return Err(MeasureError::Empty);
    }
    match returns.iter().position(|r| !r.is_finite()) {
        Some(i) => Err(MeasureError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Sum of squared returns.
pub fn realized_variance(returns: &[f64]) -> Result<f64> {
    check(returns)?;
    Ok(returns.iter().map(|r| r * r).sum())
}

/// `(RS-, RS+)`: squared returns split by strict sign. Zero returns fall in
/// neither half.
pub fn realized_semivariances(returns: &[f64]) -> Result<(f64, f64)> {
    check(returns)?;
    let mut minus = 0.0;
    let mut plus = 0.0;
    for &r in returns {
        if r < 0.0 {
            minus += r * r;
        } else if r > 0.0 {
            plus += r * r;
        }
    }
    Ok((minus, plus))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyMeasure {
    pub date: NaiveDate,
    pub rv: f64,
    pub rs_minus: f64,
    pub rs_plus: f64,
}

impl DailyMeasure {
    pub fn from_returns(date: NaiveDate, returns: &[f64]) -> Result<Self> {
        let rv = realized_variance(returns)?;
        let (rs_minus, rs_plus) = realized_semivariances(returns)?;
        Ok(Self {
            date,
            rv,
            rs_minus,
            rs_plus,
        })
    }

    pub fn get(&self, kind: MeasureKind) -> f64 {
        match kind {
            MeasureKind::Rv => self.rv,
            MeasureKind::RsMinus => self.rs_minus,
            MeasureKind::RsPlus => self.rs_plus,
        }
    }
}

/// Which realized measure a VAR is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureKind {
    Rv,
    RsMinus,
    RsPlus,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [MeasureKind::Rv, MeasureKind::RsMinus, MeasureKind::RsPlus];

    /// Short label used in file schemas: `rv`, `rsm`, `rsp`.
    pub fn label(&self) -> &'static str {
        match self {
            MeasureKind::Rv => "rv",
            MeasureKind::RsMinus => "rsm",
            MeasureKind::RsPlus => "rsp",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rv" => Ok(MeasureKind::Rv),
            "rsm" | "rs-" | "rs_minus" => Ok(MeasureKind::RsMinus),
            "rsp" | "rs+" | "rs_plus" => Ok(MeasureKind::RsPlus),
            other => Err(format!("unknown measure `{other}` (expected rv, rsm or rsp)")),
        }
    }
}

/// T dates by N assets of daily measures, complete in every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePanel {
    assets: Vec<String>,
    dates: Vec<NaiveDate>,
    // row-major, values[t][i]
    values: Vec<Vec<DailyMeasure>>,
}

impl MeasurePanel {
    pub fn new(assets: Vec<String>, dates: Vec<NaiveDate>, values: Vec<Vec<DailyMeasure>>) -> Result<Self> {
        if assets.len() < 2 {
            return Err(MeasureError::TooFewAssets(assets.len()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::Invalid("dates must be strictly increasing".into()));
        }
        if values.len() != dates.len() || values.iter().any(|row| row.len() != assets.len()) {
            return Err(MeasureError::Invalid("value array does not match T x N".into()));
        }
        Ok(Self { assets, dates, values })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, t: usize) -> &[DailyMeasure] {
        &self.values[t]
    }

    /// Rows `[start, end)` of one measure as a `(end - start) x N` matrix.
    pub fn window_matrix(&self, kind: MeasureKind, start: usize, end: usize) -> DMatrix<f64> {
        let n = self.assets.len();
        DMatrix::from_fn(end - start, n, |r, c| self.values[start + r][c].get(kind))
    }

    pub fn matrix(&self, kind: MeasureKind) -> DMatrix<f64> {
        self.window_matrix(kind, 0, self.len())
    }

    /// Panel restricted to rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> MeasurePanel {
        MeasurePanel {
            assets: self.assets.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }

    /// Replace one measure by another in every cell, e.g. to feed identical
    /// semivariance columns in a symmetry check.
    pub fn map_cells(&self, f: impl Fn(&DailyMeasure) -> DailyMeasure) -> MeasurePanel {
        MeasurePanel {
            assets: self.assets.clone(),
            dates: self.dates.clone(),
            values: self.values.iter().map(|row| row.iter().map(&f).collect()).collect(),
        }
    }
}

/// Compute measures per asset-day and align on the dates every asset has.
/// Asset order follows `grids`.
pub fn build_panel(grids: &[ReturnGrid]) -> Result<MeasurePanel> {
    if grids.len() < 2 {
        return Err(MeasureError::TooFewAssets(grids.len()));
    }
    let mut common: BTreeSet<NaiveDate> = grids[0].dates().collect();
    for g in &grids[1..] {
        let dates: BTreeSet<NaiveDate> = g.dates().collect();
        common = common.intersection(&dates).copied().collect();
    }
    if common.is_empty() {
        return Err(MeasureError::EmptyIntersection);
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();

    let mut columns = Vec::with_capacity(grids.len());
    for g in grids {
        let mut col = Vec::with_capacity(dates.len());
        let mut days = g.days.iter().peekable();
        for date in &dates {
            while days.peek().is_some_and(|d| d.date < *date) {
                days.next();
            }
            let day = days.next().expect("date is in every grid");
            col.push(DailyMeasure::from_returns(day.date, &day.returns)?);
        }
        columns.push(col);
    }
    let values = (0..dates.len())
        .map(|t| columns.iter().map(|c| c[t]).collect())
        .collect();
    MeasurePanel::new(grids.iter().map(|g| g.asset_id.clone()).collect(), dates, values)
}
