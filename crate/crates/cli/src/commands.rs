use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use nalgebra::DMatrix;
use volspill::ingestion::{filter_calendar, log_returns, parse_ticks, sample_last_tick, TickSeries};
use volspill::output::{read_panel_csv, write_panel_csv};
use volspill::realized::{build_panel, MeasureError, MeasurePanel};
use volspill::rolling::{
    estimate_window, ranges_from_breakpoints, run_rolling, run_rolling_with_workers, summarize, IndexTable,
    RollingConfig,
};
use volspill::spillover::SpilloverSet;
use volspill::synth::{synthetic_panel, SyntheticPanelSpec};
use volspill::{MeasureKind, SpilloverSeries};

use crate::config::{self, parse_lag, parse_measures, IngestSettings, RawConfig};
use crate::report::{self, ReportRow};
use crate::{Command, Common, RollingArgs};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest { common } => ingest(&common),
        Command::Spillovers { common, rolling } => spillovers(&common, &rolling),
        Command::Fevd {
            common,
            rolling,
            date,
            matrix,
            percent,
        } => match matrix {
            Some(path) => fevd_matrix(&common, &rolling, &path, percent),
            None => fevd_date(&common, &rolling, date.expect("clap requires --date without --matrix")),
        },
        Command::Synth {
            common,
            assets,
            days,
            seed,
            output,
        } => synth(&common, assets, days, seed, output),
        Command::Summarize {
            common,
            input,
            breakpoints,
        } => summarize_cmd(&common, input, &breakpoints),
    }
}

fn load_config(common: &Common) -> Result<Option<RawConfig>> {
    common.config.as_deref().map(RawConfig::load).transpose()
}

/// Flag or environment variable, then the config file, then the working
/// directory.
fn output_dir(common: &Common, raw: Option<&RawConfig>) -> Result<PathBuf> {
    let dir = common
        .output_dir
        .clone()
        .or_else(|| raw.and_then(|r| r.path("output_dir")))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn ingest(common: &Common) -> Result<()> {
    let raw = load_config(common)?.ok_or_else(|| anyhow!("ingest needs --config with asset entries"))?;
    let settings = IngestSettings::from_raw(&raw)?;
    let out = output_dir(common, Some(&raw))?;

    let mut grids = Vec::new();
    let mut rows: Vec<(usize, ReportRow)> = Vec::new();
    for (a, asset) in settings.assets.iter().enumerate() {
        let mut pieces = Vec::with_capacity(asset.files.len());
        for path in &asset.files {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let ticks = parse_ticks(file, &asset.id, settings.csv_header).with_context(|| format!("in {}", path.display()))?;
            pieces.push(ticks);
        }
        let ticks = TickSeries::concat(&asset.id, pieces).with_context(|| format!("asset `{}`", asset.id))?;
        let filtered = filter_calendar(&ticks, &settings.calendar);
        let (grid, dropped) = sample_last_tick(&filtered, &settings.calendar, &settings.sampling)?;
        let (returns, short) = log_returns(&grid);
        rows.extend(dropped.iter().chain(&short).map(|d| (a, ReportRow::dropped(d))));
        for day in &returns.days {
            let points = grid.days.iter().find(|g| g.date == day.date).map_or(0, |g| g.prices.len());
            rows.push((
                a,
                ReportRow {
                    asset: asset.id.clone(),
                    date: day.date,
                    ticks: day.tick_count,
                    grid_points: points,
                    status: "kept",
                },
            ));
        }
        grids.push(returns);
    }

    let panel = build_panel(&grids);
    let aligned: BTreeSet<NaiveDate> = match &panel {
        Ok(p) => p.dates().iter().copied().collect(),
        Err(_) => BTreeSet::new(),
    };
    for (_, r) in rows.iter_mut() {
        if r.status == "kept" && !aligned.contains(&r.date) {
            r.status = "not_aligned";
        }
    }
    rows.sort_by(|x, y| (x.0, x.1.date).cmp(&(y.0, y.1.date)));
    let rows: Vec<ReportRow> = rows.into_iter().map(|(_, r)| r).collect();
    let report_path = out.join("ingest_report.csv");
    write_with(&report_path, |w| report::write_ingest_report(&rows, w))?;

    let panel = match panel {
        Ok(p) => p,
        Err(MeasureError::EmptyIntersection) => {
            bail!(
                "no date has usable data for every asset (see {})",
                report_path.display()
            )
        }
        Err(e) => return Err(e.into()),
    };
    let panel_path = out.join("panel.csv");
    write_with(&panel_path, |w| write_panel_csv(&panel, w))?;
    eprintln!(
        "wrote {} ({} assets x {} days) and {}",
        panel_path.display(),
        panel.n_assets(),
        panel.len(),
        report_path.display()
    );
    Ok(())
}

struct RollingSetup {
    cfg: RollingConfig,
    /// Measures came from a flag or the config file rather than defaults.
    explicit_measures: bool,
    workers: Option<usize>,
    panel_path: PathBuf,
    out: PathBuf,
}

fn rolling_setup(common: &Common, args: &RollingArgs) -> Result<RollingSetup> {
    let raw = load_config(common)?;
    let mut cfg = match &raw {
        Some(r) => config::rolling_from_raw(r)?,
        None => RollingConfig::default(),
    };
    if let Some(w) = args.window {
        cfg.window_length = w;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(l) = &args.lag {
        cfg.lag = parse_lag(l).context("--lag")?;
    }
    if !args.measures.is_empty() {
        cfg.kinds = parse_measures(&args.measures.join(",")).context("--measure")?;
    }
    if let Some(s) = &args.sigma {
        cfg.sigma = s.parse().map_err(|e: String| anyhow!(e)).context("--sigma")?;
    }
    if let Some(c) = &args.convention {
        cfg.reporting = c.parse().map_err(|e: String| anyhow!(e)).context("--convention")?;
    }
    if args.log_transform {
        cfg.log_transform = true;
    }
    let workers = match args.workers {
        Some(w) => Some(w),
        None => raw.as_ref().map(config::workers_from_raw).transpose()?.flatten(),
    };
    let out = output_dir(common, raw.as_ref())?;
    let panel_path = args
        .panel
        .clone()
        .or_else(|| raw.as_ref().and_then(|r| r.path("panel")))
        .unwrap_or_else(|| out.join("panel.csv"));
    let explicit_measures = !args.measures.is_empty() || raw.as_ref().is_some_and(|r| r.get("measures").is_some());
    Ok(RollingSetup {
        cfg,
        explicit_measures,
        workers,
        panel_path,
        out,
    })
}

fn read_panel(path: &Path) -> Result<MeasurePanel> {
    let file = File::open(path).with_context(|| format!("opening panel {}", path.display()))?;
    read_panel_csv(file).with_context(|| format!("reading panel {}", path.display()))
}

fn sweep(panel: &MeasurePanel, setup: &RollingSetup) -> Result<SpilloverSeries> {
    let series = match setup.workers {
        Some(w) if w > 0 => run_rolling_with_workers(panel, &setup.cfg, w)?,
        _ => run_rolling(panel, &setup.cfg)?,
    };
    Ok(series)
}

fn spillovers(common: &Common, args: &RollingArgs) -> Result<()> {
    let setup = rolling_setup(common, args)?;
    let panel = read_panel(&setup.panel_path)?;
    if !setup.cfg.has_semivariances() {
        eprintln!("warning: sam needs both rsm and rsp; the sam columns will be empty");
    }
    let series = sweep(&panel, &setup)?;
    let out = &setup.out;
    write_with(&out.join("total.csv"), |w| report::write_total(&series, w))?;
    write_with(&out.join("directional.csv"), |w| report::write_directional(&series, w))?;
    write_with(&out.join("pairwise.csv"), |w| report::write_pairwise(&series, w))?;
    write_with(&out.join("diagnostics.csv"), |w| report::write_diagnostics(&series, w))?;
    let failed = series
        .windows
        .iter()
        .flat_map(|w| &w.outcomes)
        .filter(|o| o.is_err())
        .count();
    let unstable = series
        .windows
        .iter()
        .flat_map(|w| &w.outcomes)
        .filter(|o| o.as_ref().is_ok_and(|e| e.unstable))
        .count();
    eprintln!(
        "{} windows written to {}; {failed} window fits failed, {unstable} flagged unstable (see diagnostics.csv)",
        series.windows.len(),
        out.display()
    );
    Ok(())
}

/// Up to two window end dates on either side of `date`.
fn nearest_endpoints(ends: &[NaiveDate], date: NaiveDate) -> Vec<NaiveDate> {
    let pos = ends.partition_point(|d| *d < date);
    let lo = pos.saturating_sub(2);
    let hi = (pos + 2).min(ends.len());
    ends[lo..hi].to_vec()
}

fn fevd_date(common: &Common, args: &RollingArgs, date: NaiveDate) -> Result<()> {
    let mut setup = rolling_setup(common, args)?;
    if !setup.explicit_measures {
        setup.cfg.kinds = vec![MeasureKind::Rv];
    }
    let panel = read_panel(&setup.panel_path)?;
    setup.cfg.validate(panel.n_assets())?;
    let w = setup.cfg.window_length;
    if panel.len() < w {
        bail!("panel has {} rows, shorter than the {w}-day window", panel.len());
    }
    let ends = &panel.dates()[w - 1..];
    let Ok(k) = ends.binary_search(&date) else {
        let near: Vec<String> = nearest_endpoints(ends, date).iter().map(|d| d.to_string()).collect();
        bail!("{date} is not a window end date; nearest valid dates: {}", near.join(", "));
    };
    let result = estimate_window(&panel, &setup.cfg, w - 1 + k);
    let mut stdout = std::io::stdout().lock();
    for (kind, outcome) in setup.cfg.kinds.iter().zip(&result.outcomes) {
        writeln!(stdout, "# {kind} window ending {date}, H = {}, {} convention", setup.cfg.horizon, setup.cfg.reporting)?;
        match outcome {
            Ok(e) => write!(stdout, "{}", report::fevd_table(panel.assets(), &e.fevd.normalized, &e.spillovers))?,
            Err(f) => writeln!(stdout, "estimation failed: {f} ({})", f.code())?,
        }
    }
    Ok(())
}

/// Matrix CSV: `asset,<name>,...` header and one row per receiving asset
/// whose first field repeats its name.
fn read_matrix(path: &Path, percent: bool) -> Result<(Vec<String>, DMatrix<f64>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| anyhow!("{} is empty", path.display()))??;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let n = names.len();
    if n < 2 {
        bail!("{}: need at least two assets in the header", path.display());
    }
    let mut values = Vec::with_capacity(n * n);
    let mut row_names = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            bail!("{} line {}: expected {} fields", path.display(), idx + 2, n + 1);
        }
        row_names.push(fields[0].to_string());
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| anyhow!("{} line {}: bad number `{f}`", path.display(), idx + 2))?;
            values.push(if percent { v / 100.0 } else { v });
        }
    }
    if row_names != names {
        bail!("{}: row labels must match the header, in order", path.display());
    }
    let m = DMatrix::from_row_slice(n, n, &values);
    for i in 0..n {
        let s = m.row(i).sum();
        if m.row(i).iter().any(|v| !(0.0..=1.0).contains(v)) || (s - 1.0).abs() > 1e-3 {
            bail!("{}: row `{}` is not a normalized decomposition row (sum {s})", path.display(), names[i]);
        }
    }
    Ok((names, m))
}

fn fevd_matrix(common: &Common, args: &RollingArgs, path: &Path, percent: bool) -> Result<()> {
    let cfg = rolling_setup(common, args)?.cfg;
    let (names, norm) = read_matrix(path, percent)?;
    let set = SpilloverSet::from_normalized(&norm, cfg.reporting)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "# {} ({} convention)", path.display(), cfg.reporting)?;
    write!(stdout, "{}", report::fevd_table(&names, &norm, &set))?;
    Ok(())
}

fn synth(common: &Common, assets: usize, days: usize, seed: u64, output: Option<PathBuf>) -> Result<()> {
    let raw = load_config(common)?;
    let panel = synthetic_panel(&SyntheticPanelSpec::persistent(assets, days, seed))?;
    let path = match output {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            p
        }
        None => output_dir(common, raw.as_ref())?.join("panel.csv"),
    };
    write_with(&path, |w| write_panel_csv(&panel, w))?;
    eprintln!("wrote {} ({assets} assets x {days} days, seed {seed})", path.display());
    Ok(())
}

/// Read a wide CSV whose first column is `date`; empty fields are missing.
fn read_index_csv(path: &Path) -> Result<IndexTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| anyhow!("{} is empty", path.display()))??;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.first().map(String::as_str) != Some("date") || cols.len() < 2 {
        bail!("{}: first column must be `date`", path.display());
    }
    let mut dates = Vec::new();
    let mut columns: Vec<(String, Vec<Option<f64>>)> = cols[1..].iter().map(|c| (c.clone(), Vec::new())).collect();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            bail!("{} line {line_no}: expected {} fields", path.display(), cols.len());
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
            .map_err(|_| anyhow!("{} line {line_no}: bad date `{}`", path.display(), fields[0]))?;
        if dates.last().is_some_and(|d| *d >= date) {
            bail!("{} line {line_no}: dates must increase", path.display());
        }
        dates.push(date);
        for (c, f) in fields[1..].iter().enumerate() {
            let v = if f.is_empty() {
                None
            } else {
                Some(f.parse::<f64>().map_err(|_| anyhow!("{} line {line_no}: bad number `{f}`", path.display()))?)
            };
            columns[c].1.push(v);
        }
    }
    Ok(IndexTable { dates, columns })
}

fn summarize_cmd(common: &Common, input: Option<PathBuf>, breakpoints: &[NaiveDate]) -> Result<()> {
    let raw = load_config(common)?;
    let out = output_dir(common, raw.as_ref())?;
    let input = input.unwrap_or_else(|| out.join("total.csv"));
    let table = read_index_csv(&input)?;
    let ranges = ranges_from_breakpoints(&table.dates, breakpoints);
    let rows = summarize(&table, &ranges)?;
    let path = out.join("summary.csv");
    write_with(&path, |w| report::write_summary(&rows, w))?;
    report::write_summary(&rows, std::io::stdout().lock())?;
    Ok(())
}
