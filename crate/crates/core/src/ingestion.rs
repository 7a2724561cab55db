//! Trade ingestion: CSV parsing, session/holiday filtering and last-tick
//! sampling onto an equally spaced intraday grid.
//!
//! The pipeline for one asset is
//! `parse_ticks -> filter_calendar -> sample_last_tick -> log_returns`.
//! Every stage is a pure function of its inputs, so assets can be ingested
//! concurrently.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, NaiveTime, Weekday};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {timestamp} precedes the previous tick")]
    Ordering { line: usize, timestamp: String },
    #[error("tick series for `{found}` cannot be merged into `{expected}`")]
    AssetMismatch { expected: String, found: String },
    #[error("invalid session: {0}")]
    Session(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub time: DateTime<FixedOffset>,
    pub price: f64,
}

/// Raw trades for one asset, timestamps non-decreasing and prices positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    asset_id: String,
    ticks: Vec<Tick>,
}

impl TickSeries {
    pub fn new(asset_id: impl Into<String>, ticks: Vec<Tick>) -> Result<Self> {
        for (idx, pair) in ticks.windows(2).enumerate() {
            if pair[1].time < pair[0].time {
                return Err(IngestError::Ordering {
                    line: idx + 2,
                    timestamp: pair[1].time.to_rfc3339(),
                });
            }
        }
        if let Some((idx, t)) = ticks
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.price.is_finite() && t.price > 0.0))
        {
            return Err(IngestError::Parse {
                line: idx + 1,
                message: format!("non-positive price {}", t.price),
            });
        }
        Ok(Self {
            asset_id: asset_id.into(),
            ticks,
        })
    }

    pub fn empty(asset_id: impl Into<String>) -> Self {
        Self {
            asset_id: asset_id.into(),
            ticks: Vec::new(),
        }
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Splice several files for the same asset (e.g. a contract change) into
    /// one series. Pieces are ordered by their first tick; overlapping pieces
    /// are rejected as an ordering error.
    pub fn concat(asset_id: &str, mut pieces: Vec<TickSeries>) -> Result<Self> {
        if let Some(other) = pieces.iter().find(|p| p.asset_id != asset_id) {
            return Err(IngestError::AssetMismatch {
                expected: asset_id.to_string(),
                found: other.asset_id.clone(),
            });
        }
        pieces.retain(|p| !p.is_empty());
        pieces.sort_by_key(|p| p.ticks[0].time);
        let ticks = pieces.into_iter().flat_map(|p| p.ticks).collect();
        Self::new(asset_id, ticks)
    }
}

/// Parse `timestamp,price` rows. Timestamps are RFC 3339 / ISO-8601 with an
/// explicit UTC offset. Blank lines are skipped.
pub fn parse_ticks<R: Read>(source: R, asset_id: &str, has_header: bool) -> Result<TickSeries> {
    let reader = BufReader::new(source);
    let mut ticks: Vec<Tick> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if idx == 0 && has_header {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (ts, price) = line.split_once(',').ok_or_else(|| IngestError::Parse {
            line: line_no,
            message: "expected `timestamp,price`".into(),
        })?;
        let ts = ts.trim();
        let time = DateTime::parse_from_rfc3339(ts).map_err(|e| IngestError::Parse {
            line: line_no,
            message: format!("bad timestamp `{ts}`: {e}"),
        })?;
        let price_str = price.trim();
        let price: f64 = price_str.parse().map_err(|_| IngestError::Parse {
            line: line_no,
            message: format!("bad price `{price_str}`"),
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(IngestError::Parse {
                line: line_no,
                message: format!("non-positive price `{price_str}`"),
            });
        }
        if let Some(prev) = ticks.last() {
            if time < prev.time {
                return Err(IngestError::Ordering {
                    line: line_no,
                    timestamp: ts.to_string(),
                });
            }
        }
        ticks.push(Tick { time, price });
    }
    Ok(TickSeries {
        asset_id: asset_id.to_string(),
        ticks,
    })
}

/// Read a date-list file: one ISO date per line, `#` starts a comment.
pub fn parse_date_list<R: Read>(source: R) -> Result<BTreeSet<NaiveDate>> {
    let reader = BufReader::new(source);
    let mut dates = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(body, "%Y-%m-%d").map_err(|e| IngestError::Parse {
            line: idx + 1,
            message: format!("bad date `{body}`: {e}"),
        })?;
        dates.insert(date);
    }
    Ok(dates)
}

/// Clock in which session times and calendar dates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionClock {
    /// Convert every tick to this fixed UTC offset (EST is `-05:00`).
    Fixed(FixedOffset),
    /// Use the wall clock carried by each tick's own offset.
    TickLocal,
}

impl SessionClock {
    fn local(&self, t: &DateTime<FixedOffset>) -> (NaiveDate, NaiveTime) {
        let local = match self {
            SessionClock::Fixed(offset) => t.with_timezone(offset).naive_local(),
            SessionClock::TickLocal => t.naive_local(),
        };
        (local.date(), local.time())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    session_start: NaiveTime,
    session_end: NaiveTime,
    clock: SessionClock,
    excluded_dates: BTreeSet<NaiveDate>,
    weekend_rule: bool,
    year_end_rule: bool,
}

impl SessionCalendar {
    pub fn new(session_start: NaiveTime, session_end: NaiveTime, clock: SessionClock) -> Result<Self> {
        if session_start >= session_end {
            return Err(IngestError::Session(format!(
                "session start {session_start} must precede end {session_end}"
            )));
        }
        Ok(Self {
            session_start,
            session_end,
            clock,
            excluded_dates: BTreeSet::new(),
            weekend_rule: true,
            year_end_rule: true,
        })
    }

    /// NYMEX pit session, 9:00-14:30 EST, weekends and the year-end
    /// low-activity dates (Dec 24-26, Dec 31-Jan 2) excluded.
    pub fn nymex_pit() -> Self {
        Self::new(
            NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(14, 30, 0).unwrap(),
            SessionClock::Fixed(FixedOffset::west_opt(5 * 3600).unwrap()),
        )
        .expect("static session is valid")
    }

    pub fn with_excluded_dates(mut self, dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.excluded_dates.extend(dates);
        self
    }

    pub fn with_weekend_rule(mut self, on: bool) -> Self {
        self.weekend_rule = on;
        self
    }

    pub fn with_year_end_rule(mut self, on: bool) -> Self {
        self.year_end_rule = on;
        self
    }

    pub fn session_start(&self) -> NaiveTime {
        self.session_start
    }

    pub fn session_end(&self) -> NaiveTime {
        self.session_end
    }

    pub fn clock(&self) -> SessionClock {
        self.clock
    }

    pub fn excluded_dates(&self) -> &BTreeSet<NaiveDate> {
        &self.excluded_dates
    }

    pub fn session_length(&self) -> Duration {
        self.session_end - self.session_start
    }

    pub fn is_trading_date(&self, date: NaiveDate) -> bool {
        if self.weekend_rule && matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return false;
        }
        if self.year_end_rule {
            let (m, d) = (date.month(), date.day());
            if (m == 12 && matches!(d, 24..=26 | 31)) || (m == 1 && d <= 2) {
                return false;
            }
        }
        !self.excluded_dates.contains(&date)
    }

    pub fn in_session(&self, time: NaiveTime) -> bool {
        time >= self.session_start && time <= self.session_end
    }

    fn local(&self, t: &DateTime<FixedOffset>) -> (NaiveDate, NaiveTime) {
        self.clock.local(t)
    }
}

/// Keep only ticks on trading dates whose local time lies in the closed
/// session interval.
pub fn filter_calendar(ticks: &TickSeries, cal: &SessionCalendar) -> TickSeries {
    let kept = ticks
        .ticks
        .iter()
        .filter(|t| {
            let (date, time) = cal.local(&t.time);
            cal.is_trading_date(date) && cal.in_session(time)
        })
        .copied()
        .collect();
    TickSeries {
        asset_id: ticks.asset_id.clone(),
        ticks: kept,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    TooFewTicks,
    TooFewGridPoints,
    NotAligned,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::TooFewTicks => "too_few_ticks",
            DropReason::TooFewGridPoints => "too_few_grid_points",
            DropReason::NotAligned => "not_aligned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedDay {
    pub asset_id: String,
    pub date: NaiveDate,
    pub tick_count: usize,
    pub grid_points: usize,
    pub reason: DropReason,
}

/// Prices sampled at `session_start + k * interval` for one day. Leading grid
/// slots with no trade yet are absent, so `prices[0]` sits at slot
/// `first_slot`.
#[derive(Debug, Clone, PartialEq)]
pub struct DayGrid {
    pub date: NaiveDate,
    pub tick_count: usize,
    pub first_slot: usize,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    pub asset_id: String,
    pub slots_per_day: usize,
    pub days: Vec<DayGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOptions {
    pub interval: Duration,
    pub min_ticks: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            interval: Duration::minutes(5),
            min_ticks: 10,
        }
    }
}

/// Last-tick sampling: each grid instant takes the most recent trade at or
/// before it on the same day. Days with fewer than `min_ticks` trades are
/// dropped and returned alongside the grid.
pub fn sample_last_tick(
    ticks: &TickSeries,
    cal: &SessionCalendar,
    opts: &SamplingOptions,
) -> Result<(PriceGrid, Vec<DroppedDay>)> {
    let session = cal.session_length();
    let step = opts.interval;
    if step <= Duration::zero() {
        return Err(IngestError::Session("sampling interval must be positive".into()));
    }
    let session_ns = session.num_nanoseconds().unwrap_or(i64::MAX);
    let step_ns = step.num_nanoseconds().unwrap_or(i64::MAX);
    if session_ns % step_ns != 0 {
        return Err(IngestError::Session(format!(
            "interval of {}s does not divide the {}s session",
            step.num_seconds(),
            session.num_seconds()
        )));
    }
    let slots = (session_ns / step_ns) as usize + 1;
    let grid_times: Vec<NaiveTime> = (0..slots)
        .map(|k| cal.session_start + step * k as i32)
        .collect();

    let mut days = Vec::new();
    let mut dropped = Vec::new();
    let all = ticks.ticks();
    let mut start = 0;
    while start < all.len() {
        let (date, _) = cal.local(&all[start].time);
        let mut end = start;
        while end < all.len() && cal.local(&all[end].time).0 == date {
            end += 1;
        }
        let day_ticks = &all[start..end];
        start = end;

        if day_ticks.len() < opts.min_ticks {
            dropped.push(DroppedDay {
                asset_id: ticks.asset_id.clone(),
                date,
                tick_count: day_ticks.len(),
                grid_points: 0,
                reason: DropReason::TooFewTicks,
            });
            continue;
        }

        let mut prices = Vec::with_capacity(slots);
        let mut first_slot = None;
        let mut cursor = 0;
        let mut last: Option<f64> = None;
        for (slot, g) in grid_times.iter().enumerate() {
            while cursor < day_ticks.len() && cal.local(&day_ticks[cursor].time).1 <= *g {
                last = Some(day_ticks[cursor].price);
                cursor += 1;
            }
            if let Some(p) = last {
                first_slot.get_or_insert(slot);
                prices.push(p);
            }
        }
        days.push(DayGrid {
            date,
            tick_count: day_ticks.len(),
            first_slot: first_slot.unwrap_or(slots),
            prices,
        });
    }
    Ok((
        PriceGrid {
            asset_id: ticks.asset_id.clone(),
            slots_per_day: slots,
            days,
        },
        dropped,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayReturns {
    pub date: NaiveDate,
    pub tick_count: usize,
    pub returns: Vec<f64>,
}

/// Intraday log-returns per day. No return ever spans two dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnGrid {
    pub asset_id: String,
    pub days: Vec<DayReturns>,
}

impl ReturnGrid {
    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days.iter().map(|d| d.date)
    }
}

pub fn log_returns(grid: &PriceGrid) -> (ReturnGrid, Vec<DroppedDay>) {
    let mut days = Vec::with_capacity(grid.days.len());
    let mut dropped = Vec::new();
    for day in &grid.days {
        if day.prices.len() < 2 {
            dropped.push(DroppedDay {
                asset_id: grid.asset_id.clone(),
                date: day.date,
                tick_count: day.tick_count,
                grid_points: day.prices.len(),
                reason: DropReason::TooFewGridPoints,
            });
            continue;
        }
        let returns = day
            .prices
            .windows(2)
            .map(|w| w[1].ln() - w[0].ln())
            .collect();
        days.push(DayReturns {
            date: day.date,
            tick_count: day.tick_count,
            returns,
        });
    }
    (
        ReturnGrid {
            asset_id: grid.asset_id.clone(),
            days,
        },
        dropped,
    )
}
