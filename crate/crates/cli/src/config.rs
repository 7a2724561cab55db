//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{FixedOffset, NaiveTime};
use volspill::ingestion::{SamplingOptions, SessionCalendar, SessionClock};
use volspill::rolling::{LagChoice, RollingConfig};
use volspill::MeasureKind;

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSource {
    pub id: String,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    /// Asset entries in file order.
    pub assets: Vec<AssetSource>,
    pub values: BTreeMap<String, (usize, String)>,
    pub base: PathBuf,
}

const KEYS: &[&str] = &[
    "calendar",
    "session_start",
    "session_end",
    "session_clock",
    "weekend_rule",
    "year_end_rule",
    "interval_minutes",
    "min_ticks",
    "csv_header",
    "window",
    "horizon",
    "lag",
    "measures",
    "sigma",
    "convention",
    "flag_unstable",
    "log_transform",
    "workers",
    "output_dir",
    "panel",
];

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self> {
        let mut cfg = RawConfig {
            base,
            ..Self::default()
        };
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(id) = key.strip_prefix("asset.") {
                if id.is_empty() || id.contains(',') {
                    bail!("line {line_no}: bad asset id `{id}`");
                }
                if cfg.assets.iter().any(|a| a.id == id) {
                    bail!("line {line_no}: asset `{id}` listed twice");
                }
                let files: Vec<PathBuf> = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| cfg.base.join(s))
                    .collect();
                if files.is_empty() {
                    bail!("line {line_no}: asset `{id}` has no input files");
                }
                cfg.assets.push(AssetSource { id: id.to_string(), files });
                continue;
            }
            if !KEYS.contains(&key) {
                bail!("line {line_no}: unknown key `{key}`");
            }
            if cfg.values.insert(key.to_string(), (line_no, value.to_string())).is_some() {
                bail!("line {line_no}: key `{key}` set twice");
            }
        }
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }

    fn parsed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => parse(v).map(Some).with_context(|| format!("line {line}: key `{key}`")),
        }
    }
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => bail!("expected true or false, got `{other}`"),
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| anyhow!("expected a non-negative integer, got `{s}`"))
}

fn parse_time(s: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .map_err(|_| anyhow!("expected HH:MM, got `{s}`"))
}

/// `tick-local` or a UTC offset such as `-05:00`.
pub fn parse_clock(s: &str) -> Result<SessionClock> {
    if s.eq_ignore_ascii_case("tick-local") {
        return Ok(SessionClock::TickLocal);
    }
    let offset: FixedOffset = s.parse().map_err(|_| anyhow!("expected `tick-local` or an offset like -05:00, got `{s}`"))?;
    Ok(SessionClock::Fixed(offset))
}

/// `N` for a fixed lag or `aic:N` for AIC selection up to `N`.
pub fn parse_lag(s: &str) -> Result<LagChoice> {
    let lag = if let Some(max) = s.strip_prefix("aic:") {
        LagChoice::Aic { max: parse_usize(max.trim())? }
    } else {
        LagChoice::Fixed(parse_usize(s)?)
    };
    if lag.max_lag() == 0 {
        bail!("lag must be at least 1");
    }
    Ok(lag)
}

pub fn parse_measures(s: &str) -> Result<Vec<MeasureKind>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<MeasureKind>().map_err(|e| anyhow!(e)))
        .collect()
}

/// Ingestion settings resolved from the config file.
#[derive(Debug, Clone)]
pub struct IngestSettings {
    pub assets: Vec<AssetSource>,
    pub calendar: SessionCalendar,
    pub sampling: SamplingOptions,
    pub csv_header: bool,
}

impl IngestSettings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        if raw.assets.len() < 2 {
            bail!("need at least two `asset.<id>` entries, found {}", raw.assets.len());
        }
        for a in &raw.assets {
            for f in &a.files {
                if !f.exists() {
                    bail!("input file {} for asset `{}` does not exist", f.display(), a.id);
                }
            }
        }
        let pit = SessionCalendar::nymex_pit();
        let start = raw.parsed("session_start", parse_time)?.unwrap_or(pit.session_start());
        let end = raw.parsed("session_end", parse_time)?.unwrap_or(pit.session_end());
        let clock = raw.parsed("session_clock", parse_clock)?.unwrap_or(pit.clock());
        let mut calendar = SessionCalendar::new(start, end, clock)?
            .with_weekend_rule(raw.parsed("weekend_rule", parse_bool)?.unwrap_or(true))
            .with_year_end_rule(raw.parsed("year_end_rule", parse_bool)?.unwrap_or(true));
        if let Some(path) = raw.path("calendar") {
            let file = fs::File::open(&path).with_context(|| format!("opening calendar {}", path.display()))?;
            let dates = volspill::ingestion::parse_date_list(file).with_context(|| format!("in calendar {}", path.display()))?;
            calendar = calendar.with_excluded_dates(dates);
        }
        let mut sampling = SamplingOptions::default();
        if let Some(m) = raw.parsed("interval_minutes", parse_usize)? {
            if m == 0 {
                bail!("interval_minutes must be positive");
            }
            sampling.interval = chrono::Duration::minutes(m as i64);
        }
        if let Some(n) = raw.parsed("min_ticks", parse_usize)? {
            sampling.min_ticks = n;
        }
        Ok(Self {
            assets: raw.assets.clone(),
            calendar,
            sampling,
            csv_header: raw.parsed("csv_header", parse_bool)?.unwrap_or(false),
        })
    }
}

/// Rolling settings from the config file; command-line flags are applied on
/// top by the caller.
pub fn rolling_from_raw(raw: &RawConfig) -> Result<RollingConfig> {
    let mut cfg = RollingConfig::default();
    if let Some(w) = raw.parsed("window", parse_usize)? {
        cfg.window_length = w;
    }
    if let Some(h) = raw.parsed("horizon", parse_usize)? {
        cfg.horizon = h;
    }
    if let Some(l) = raw.parsed("lag", parse_lag)? {
        cfg.lag = l;
    }
    if let Some(m) = raw.parsed("measures", parse_measures)? {
        cfg.kinds = m;
    }
    if let Some(s) = raw.parsed("sigma", |s| s.parse().map_err(|e: String| anyhow!(e)))? {
        cfg.sigma = s;
    }
    if let Some(c) = raw.parsed("convention", |s| s.parse().map_err(|e: String| anyhow!(e)))? {
        cfg.reporting = c;
    }
    if let Some(f) = raw.parsed("flag_unstable", parse_bool)? {
        cfg.flag_unstable = f;
    }
    if let Some(l) = raw.parsed("log_transform", parse_bool)? {
        cfg.log_transform = l;
    }
    Ok(cfg)
}

pub fn workers_from_raw(raw: &RawConfig) -> Result<Option<usize>> {
    raw.parsed("workers", parse_usize)
}
