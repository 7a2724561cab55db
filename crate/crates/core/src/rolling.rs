//! Rolling-window sweep: for every window end `t` the rows `t-L+1..=t` are
//! fitted per measure kind, decomposed, and reduced to spillover indices.
//! Asymmetry measures pair the RS+ and RS- results of the same window.
//!
//! Windows are independent read-only slices evaluated in parallel; results
//! are collected in date order, so output never depends on the scheduler.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::gfevd::{FevdError, FevdMatrix, SigmaConvention};
use crate::realized::{MeasureKind, MeasurePanel};
use crate::spillover::{ReportingConvention, SamPoint, SpilloverSet};
use crate::var::{VarError, fit_var, select_lag_aic, spectral_radius};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RollingError {
    #[error("panel has {rows} rows, shorter than the {window}-row window")]
    PanelTooShort { rows: usize, window: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("date range {0} to {1} contains no windows")]
    EmptyRange(NaiveDate, NaiveDate),
    #[error("nothing to summarize")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, RollingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagChoice {
    Fixed(usize),
    /// Per-window AIC over `1..=max`.
    Aic { max: usize },
}

impl LagChoice {
    pub fn max_lag(&self) -> usize {
        match *self {
            LagChoice::Fixed(p) => p,
            LagChoice::Aic { max } => max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    pub window_length: usize,
    pub horizon: usize,
    pub lag: LagChoice,
    pub kinds: Vec<MeasureKind>,
    pub sigma: SigmaConvention,
    pub reporting: ReportingConvention,
    pub flag_unstable: bool,
    pub log_transform: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window_length: 200,
            horizon: 10,
            lag: LagChoice::Fixed(2),
            kinds: MeasureKind::ALL.to_vec(),
            sigma: SigmaConvention::Variance,
            reporting: ReportingConvention::Table,
            flag_unstable: true,
            log_transform: false,
        }
    }
}

impl RollingConfig {
    pub fn validate(&self, n_assets: usize) -> Result<()> {
        let p = self.lag.max_lag();
        if p == 0 {
            return Err(RollingError::Config("lag order must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(RollingError::Config("horizon must be at least 1".into()));
        }
        if self.window_length <= n_assets * p + p + 1 {
            return Err(RollingError::Config(format!(
                "window of {} rows cannot identify a VAR({p}) in {n_assets} variables",
                self.window_length
            )));
        }
        if self.kinds.is_empty() {
            return Err(RollingError::Config("no measure kinds selected".into()));
        }
        let mut k = self.kinds.clone();
        k.sort();
        k.dedup();
        if k.len() != self.kinds.len() {
            return Err(RollingError::Config("measure kinds repeated".into()));
        }
        Ok(())
    }

    pub fn has_semivariances(&self) -> bool {
        self.kinds.contains(&MeasureKind::RsMinus) && self.kinds.contains(&MeasureKind::RsPlus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowFailure {
    Var(VarError),
    Fevd(FevdError),
}

impl WindowFailure {
    /// Stable reason code for diagnostics files.
    pub fn code(&self) -> &'static str {
        match self {
            WindowFailure::Var(e) => match e {
                VarError::ZeroLag => "zero_lag",
                VarError::InsufficientObservations { .. } => "insufficient_observations",
                VarError::NonFinite(_) => "non_finite",
                VarError::SingularDesign { .. } => "singular_design",
                VarError::DegenerateResidual(_) => "degenerate_residual",
                VarError::Invalid(_) => "invalid_model",
            },
            WindowFailure::Fevd(e) => match e {
                FevdError::ZeroHorizon => "zero_horizon",
                FevdError::DegenerateVariance(_) => "degenerate_variance",
                FevdError::NonPositiveDiagonal(_) => "degenerate_residual",
                FevdError::NotPsd(_) => "sigma_not_psd",
                FevdError::ZeroRow(_) => "zero_row",
                FevdError::Shape(_) => "shape",
            },
        }
    }
}

impl std::fmt::Display for WindowFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowFailure::Var(e) => write!(f, "{e}"),
            WindowFailure::Fevd(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindEstimate {
    pub fevd: FevdMatrix,
    pub spillovers: SpilloverSet,
    pub lag: usize,
    pub spectral_radius: f64,
    pub condition: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub date: NaiveDate,
    pub end_index: usize,
    /// Aligned with [`SpilloverSeries::kinds`].
    pub outcomes: Vec<std::result::Result<KindEstimate, WindowFailure>>,
    /// Present only when RS+ and RS- both succeeded.
    pub sam: Option<SamPoint>,
}

impl WindowResult {
    pub fn outcome(&self, kinds: &[MeasureKind], kind: MeasureKind) -> Option<&std::result::Result<KindEstimate, WindowFailure>> {
        kinds.iter().position(|k| *k == kind).map(|i| &self.outcomes[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverSeries {
    pub assets: Vec<String>,
    pub kinds: Vec<MeasureKind>,
    pub config: RollingConfig,
    pub windows: Vec<WindowResult>,
}

impl SpilloverSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.windows.iter().map(|w| w.date).collect()
    }

    pub fn estimate(&self, window: usize, kind: MeasureKind) -> Option<&KindEstimate> {
        self.windows[window].outcome(&self.kinds, kind)?.as_ref().ok()
    }

    /// Flat named columns: `total_<kind>`, `sam`, and per asset
    /// `from_<kind>_<asset>`, `to_..`, `net_..`, `sam_from_<asset>`,
    /// `sam_to_<asset>`.
    pub fn index_table(&self) -> IndexTable {
        let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
        fn est<'a>(w: &'a WindowResult, kinds: &[MeasureKind], k: MeasureKind) -> Option<&'a KindEstimate> {
            w.outcome(kinds, k).and_then(|o| o.as_ref().ok())
        }
        for &kind in &self.kinds {
            columns.push((
                format!("total_{kind}"),
                self.windows.iter().map(|w| est(w, &self.kinds, kind).map(|e| e.spillovers.total)).collect(),
            ));
        }
        if self.config.has_semivariances() {
            columns.push(("sam".into(), self.windows.iter().map(|w| w.sam.as_ref().and_then(|s| s.sam)).collect()));
        }
        for (i, asset) in self.assets.iter().enumerate() {
            for &kind in &self.kinds {
                let pick = |f: fn(&SpilloverSet) -> &Vec<f64>| -> Vec<Option<f64>> {
                    self.windows.iter().map(|w| est(w, &self.kinds, kind).map(|e| f(&e.spillovers)[i])).collect()
                };
                columns.push((format!("from_{kind}_{asset}"), pick(|s| &s.from_others)));
                columns.push((format!("to_{kind}_{asset}"), pick(|s| &s.to_others)));
                columns.push((format!("net_{kind}_{asset}"), pick(|s| &s.net)));
            }
            if self.config.has_semivariances() {
                columns.push((
                    format!("sam_from_{asset}"),
                    self.windows.iter().map(|w| w.sam.as_ref().and_then(|s| s.sam_from[i])).collect(),
                ));
                columns.push((
                    format!("sam_to_{asset}"),
                    self.windows.iter().map(|w| w.sam.as_ref().and_then(|s| s.sam_to[i])).collect(),
                ));
            }
        }
        IndexTable {
            dates: self.dates(),
            columns,
        }
    }
}

fn estimate_kind(
    window: &DMatrix<f64>,
    cfg: &RollingConfig,
) -> std::result::Result<KindEstimate, WindowFailure> {
    let lag = match cfg.lag {
        LagChoice::Fixed(p) => p,
        LagChoice::Aic { max } => select_lag_aic(window, max).map_err(WindowFailure::Var)?,
    };
    let model = fit_var(window, lag).map_err(WindowFailure::Var)?;
    let radius = spectral_radius(&model);
    let fevd = FevdMatrix::from_model(&model, cfg.horizon, cfg.sigma).map_err(WindowFailure::Fevd)?;
    let spillovers = SpilloverSet::from_normalized(&fevd.normalized, cfg.reporting)
        .expect("normalized decomposition is square");
    Ok(KindEstimate {
        fevd,
        spillovers,
        lag,
        spectral_radius: radius,
        condition: model.condition,
        unstable: cfg.flag_unstable && !(radius < 1.0),
    })
}

/// Evaluate the single window ending at row `end` (inclusive).
pub fn estimate_window(panel: &MeasurePanel, cfg: &RollingConfig, end: usize) -> WindowResult {
    let start = end + 1 - cfg.window_length;
    let outcomes: Vec<_> = cfg
        .kinds
        .iter()
        .map(|&kind| {
            let mut w = panel.window_matrix(kind, start, end + 1);
            if cfg.log_transform {
                w.apply(|v| *v = v.ln());
            }
            estimate_kind(&w, cfg)
        })
        .collect();
    let get = |k: MeasureKind| {
        cfg.kinds
            .iter()
            .position(|x| *x == k)
            .and_then(|i| outcomes[i].as_ref().ok())
    };
    let sam = match (get(MeasureKind::RsPlus), get(MeasureKind::RsMinus)) {
        (Some(plus), Some(minus)) => SamPoint::from_sets(&plus.spillovers, &minus.spillovers).ok(),
        _ => None,
    };
    WindowResult {
        date: panel.dates()[end],
        end_index: end,
        outcomes,
        sam,
    }
}

/// Sweep every window on the current rayon pool.
pub fn run_rolling(panel: &MeasurePanel, cfg: &RollingConfig) -> Result<SpilloverSeries> {
    cfg.validate(panel.n_assets())?;
    if panel.len() < cfg.window_length {
        return Err(RollingError::PanelTooShort {
            rows: panel.len(),
            window: cfg.window_length,
        });
    }
    let windows = (cfg.window_length - 1..panel.len())
        .into_par_iter()
        .map(|end| estimate_window(panel, cfg, end))
        .collect();
    Ok(SpilloverSeries {
        assets: panel.assets().to_vec(),
        kinds: cfg.kinds.clone(),
        config: cfg.clone(),
        windows,
    })
}

/// [`run_rolling`] on a dedicated pool of `workers` threads.
pub fn run_rolling_with_workers(panel: &MeasurePanel, cfg: &RollingConfig, workers: usize) -> Result<SpilloverSeries> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RollingError::Pool(e.to_string()))?;
    pool.install(|| run_rolling(panel, cfg))
}

/// Named index columns over a date axis; missing values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

/// Full range followed by the sub-periods cut at each breakpoint; a
/// breakpoint date opens the next sub-period.
pub fn ranges_from_breakpoints(dates: &[NaiveDate], breakpoints: &[NaiveDate]) -> Vec<DateRange> {
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Vec::new();
    };
    let mut out = vec![DateRange { start: first, end: last }];
    let mut bps: Vec<NaiveDate> = breakpoints.to_vec();
    bps.sort();
    bps.dedup();
    let mut start = first;
    for bp in bps {
        if bp <= start || bp > last {
            continue;
        }
        out.push(DateRange {
            start,
            end: bp.pred_opt().expect("date after the first window"),
        });
        start = bp;
    }
    if out.len() > 1 {
        out.push(DateRange { start, end: last });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub range: DateRange,
    pub column: String,
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (divisor `count - 1`); `None` below two values.
    pub sd: Option<f64>,
}

pub fn summarize(table: &IndexTable, ranges: &[DateRange]) -> Result<Vec<SummaryRow>> {
    if table.dates.is_empty() || ranges.is_empty() {
        return Err(RollingError::EmptySeries);
    }
    let mut rows = Vec::new();
    for range in ranges {
        let idx: Vec<usize> = (0..table.dates.len()).filter(|&i| range.contains(table.dates[i])).collect();
        if idx.is_empty() {
            return Err(RollingError::EmptyRange(range.start, range.end));
        }
        for (name, values) in &table.columns {
            let xs: Vec<f64> = idx.iter().filter_map(|&i| values[i]).collect();
            let count = xs.len();
            let mean = (count > 0).then(|| xs.iter().sum::<f64>() / count as f64);
            let sd = match (count, mean) {
                (c, Some(m)) if c >= 2 => {
                    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
                    Some((ss / (c - 1) as f64).sqrt())
                }
                _ => None,
            };
            rows.push(SummaryRow {
                range: *range,
                column: name.clone(),
                count,
                mean,
                sd,
            });
        }
    }
    Ok(rows)
}
