//! End-to-end acceptance checks. Each check prints one `PASS`/`FAIL` line;
//! the process exits nonzero if any fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use volspill::gfevd::{FevdMatrix, SigmaConvention};
use volspill::realized::{realized_semivariances, realized_variance, DailyMeasure, MeasureKind};
use volspill::rolling::{run_rolling_with_workers, RollingConfig, SpilloverSeries};
use volspill::spillover::{ReportingConvention, SpilloverSet};
use volspill::synth::{
    analytic_forecast_variances, impulse_psi, mc_forecast_error_shares, random_stable_model, simulate_var,
    synthetic_panel, GaussianStream, SynthSpec, SyntheticPanelSpec,
};
use volspill::var::{fit_var, ma_coefficients, VarModel};

type Check = Result<String, String>;

fn close(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{label}: got {got}, expected {want} (tol {tol:e})"))
    }
}

fn table_margins() -> Check {
    let started = Instant::now();
    let pct = [
        49.9025, 21.9881, 28.1094, //
        25.3731, 44.7523, 29.8746, //
        25.1333, 21.3211, 53.5456,
    ];
    let norm = DMatrix::from_row_slice(3, 3, &pct) / 100.0;
    let set = SpilloverSet::from_normalized(&norm, ReportingConvention::Table).map_err(|e| e.to_string())?;
    let from = [50.0975, 55.2477, 46.4544];
    let to = [50.5064, 43.3092, 57.9839];
    for i in 0..3 {
        close(&format!("FROM[{i}]"), set.from_others[i], from[i], 1e-3)?;
        close(&format!("TO[{i}]"), set.to_others[i], to[i], 1e-3)?;
    }
    close("TOTAL", set.total, 50.5998, 1e-3)?;
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("total {:.4}, max margin error within 1e-3, {elapsed:?}", set.total))
}

fn decomposition_identity() -> Check {
    let mut g = GaussianStream::new(20240601, 0);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let len = 1 + (g.next_u64() % 400) as usize;
        let scale = 10f64.powf(-4.0 + 6.0 * g.uniform());
        let mut r: Vec<f64> = (0..len).map(|_| scale * g.standard_normal()).collect();
        // a sprinkling of exact zeros
        for v in r.iter_mut() {
            if g.uniform() < 0.05 {
                *v = 0.0;
            }
        }
        if r.iter().all(|v| *v == 0.0) {
            r[0] = scale;
        }
        let rv = realized_variance(&r).map_err(|e| e.to_string())?;
        let (minus, plus) = realized_semivariances(&r).map_err(|e| e.to_string())?;
        let rel = (rv - (minus + plus)).abs() / rv;
        if rel > 1e-12 {
            return Err(format!("case {case}: relative error {rel:e}"));
        }
        worst = worst.max(rel);
    }
    Ok(format!("1000 vectors, worst relative error {worst:e}"))
}

fn hand_case() -> Check {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let model = VarModel::from_parts(vec![DMatrix::zeros(2, 2)], sigma).map_err(|e| e.to_string())?;
    let fevd = FevdMatrix::from_model(&model, 1, SigmaConvention::Variance).map_err(|e| e.to_string())?;
    let want = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]);
    for i in 0..2 {
        for j in 0..2 {
            close(&format!("w[{i}][{j}]"), fevd.normalized[(i, j)], want[(i, j)], 1e-9)?;
        }
    }
    let set = SpilloverSet::from_normalized(&fevd.normalized, ReportingConvention::Table).map_err(|e| e.to_string())?;
    close("total", set.total, 20.0, 1e-9)?;
    Ok(format!("normalized matrix matches, total {}", set.total))
}

fn oracle_equivalence() -> Check {
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let n = 1 + (k % 4) as usize;
        let p = 1 + ((k / 4) % 3) as usize;
        let model = random_stable_model(1000 + k, n.max(1), p);
        let a = ma_coefficients(&model, 10);
        let b = impulse_psi(&model, 10);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            let d = (x - y).amax();
            if d > 1e-10 {
                return Err(format!("model {k} (N={n}, p={p}): difference {d:e}"));
            }
            worst = worst.max(d);
        }
    }

    let paths = 200_000;
    let mut cases: Vec<(String, VarModel, usize)> = vec![(
        "white noise".into(),
        VarModel::from_parts(vec![DMatrix::zeros(3, 3)], DMatrix::identity(3, 3)).map_err(|e| e.to_string())?,
        5,
    )];
    cases.push(("random VAR(1)".into(), random_stable_model(77, 3, 1), 10));
    cases.push(("random VAR(2)".into(), random_stable_model(78, 2, 2), 10));
    let mut max_z = 0.0f64;
    for (idx, (label, model, horizon)) in cases.iter().enumerate() {
        let mc = mc_forecast_error_shares(model, *horizon, paths, 9000 + idx as u64).map_err(|e| e.to_string())?;
        let analytic = analytic_forecast_variances(&ma_coefficients(model, *horizon), &model.sigma);
        for i in 0..model.n_vars() {
            let z = (mc.variance(i) - analytic[i]).abs() / mc.std_error[i];
            if z > 3.0 {
                return Err(format!(
                    "{label}, variable {i}: simulated {} vs analytic {} ({z:.2} standard errors)",
                    mc.variance(i),
                    analytic[i]
                ));
            }
            max_z = max_z.max(z);
        }
    }
    Ok(format!("100 models, max |dPsi| {worst:e}; Monte Carlo max {max_z:.2} standard errors"))
}

fn total_of_fit(data: &DMatrix<f64>) -> Result<f64, String> {
    let model = fit_var(data, 1).map_err(|e| e.to_string())?;
    let fevd = FevdMatrix::from_model(&model, 10, SigmaConvention::Variance).map_err(|e| e.to_string())?;
    Ok(SpilloverSet::from_normalized(&fevd.normalized, ReportingConvention::Table)
        .map_err(|e| e.to_string())?
        .total)
}

fn null_spillover() -> Check {
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5]));
    let phi = vec![DMatrix::zeros(3, 3)];
    let known = VarModel::from_parts(phi.clone(), sigma.clone()).map_err(|e| e.to_string())?;
    let fevd = FevdMatrix::from_model(&known, 10, SigmaConvention::Variance).map_err(|e| e.to_string())?;
    let total = SpilloverSet::from_normalized(&fevd.normalized, ReportingConvention::Table)
        .map_err(|e| e.to_string())?
        .total;
    if total != 0.0 {
        return Err(format!("known-parameter total {total:e}, expected exactly 0"));
    }
    let mut means = [0.0; 2];
    for (slot, t) in [500usize, 5000].into_iter().enumerate() {
        let mut acc = 0.0;
        for seed in 0..20u64 {
            let data = simulate_var(&SynthSpec {
                phi: phi.clone(),
                sigma: sigma.clone(),
                t,
                seed: 500 + seed,
            })
            .map_err(|e| e.to_string())?;
            acc += total_of_fit(&data)?;
        }
        means[slot] = acc / 20.0;
    }
    if !(means[1] < means[0]) {
        return Err(format!("mean at T=5000 {} not below T=500 {}", means[1], means[0]));
    }
    if !(means[1] < 10.0) {
        return Err(format!("mean at T=5000 {} not below 10", means[1]));
    }
    Ok(format!("known total 0; estimated means {:.4} (T=500) > {:.4} (T=5000)", means[0], means[1]))
}

fn sweep_config() -> RollingConfig {
    RollingConfig {
        window_length: 200,
        horizon: 10,
        kinds: MeasureKind::ALL.to_vec(),
        ..RollingConfig::default()
    }
}

fn symmetry_null() -> Check {
    let base = synthetic_panel(&SyntheticPanelSpec::persistent(3, 700, 31)).map_err(|e| e.to_string())?;
    let mirrored = base.map_cells(|m| DailyMeasure {
        rs_minus: m.rs_plus,
        ..*m
    });
    let series = run_rolling_with_workers(&mirrored, &sweep_config(), 4).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for w in &series.windows {
        let point = w.sam.as_ref().ok_or_else(|| format!("{}: no SAM", w.date))?;
        let all = std::iter::once(point.sam).chain(point.sam_from.iter().copied()).chain(point.sam_to.iter().copied());
        for v in all {
            if v != Some(0.0) {
                return Err(format!("{}: sam {v:?}", w.date));
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} windows, every SAM exactly 0"))
}

fn full_panel() -> SyntheticPanelSpec {
    SyntheticPanelSpec::persistent(3, 6600, 2014)
}

fn bounds(series: &SpilloverSeries) -> Check {
    let mut failures = 0;
    let mut worst_row = 0.0f64;
    let mut worst_net = 0.0f64;
    for w in &series.windows {
        for (k, outcome) in series.kinds.iter().zip(&w.outcomes) {
            let est = match outcome {
                Ok(e) => e,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            for i in 0..3 {
                let s: f64 = est.fevd.normalized.row(i).sum();
                worst_row = worst_row.max((s - 1.0).abs());
            }
            let t = est.spillovers.total;
            if !(0.0..=100.0).contains(&t) {
                return Err(format!("{} {k}: total {t}", w.date));
            }
            let net: f64 = est.spillovers.net.iter().sum();
            worst_net = worst_net.max(net.abs());
        }
        if let Some(p) = &w.sam {
            for v in std::iter::once(p.sam).chain(p.sam_from.iter().copied()).chain(p.sam_to.iter().copied()).flatten() {
                if !(-200.0..=200.0).contains(&v) {
                    return Err(format!("{}: sam {v}", w.date));
                }
            }
        }
    }
    if worst_row > 1e-12 {
        return Err(format!("row sum error {worst_row:e}"));
    }
    if worst_net > 1e-10 {
        return Err(format!("net sum {worst_net:e}"));
    }
    Ok(format!(
        "{} windows x {} kinds, {failures} soft failures, row error {worst_row:e}, net sum {worst_net:e}",
        series.windows.len(),
        series.kinds.len()
    ))
}

/// Every number in the series at full precision.
fn render(series: &SpilloverSeries) -> String {
    let mut s = String::new();
    for w in &series.windows {
        write!(s, "{}", w.date).unwrap();
        for o in &w.outcomes {
            match o {
                Ok(e) => {
                    for v in e.fevd.raw.iter().chain(e.fevd.normalized.iter()) {
                        write!(s, ",{v:e}").unwrap();
                    }
                    write!(s, ",{:e},{:e},{:e}", e.spillovers.total, e.spectral_radius, e.condition).unwrap();
                }
                Err(f) => write!(s, ",{}", f.code()).unwrap(),
            }
        }
        if let Some(p) = &w.sam {
            write!(s, ",{:?},{:?},{:?}", p.sam, p.sam_from, p.sam_to).unwrap();
        }
        s.push('\n');
    }
    s
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Check)> = vec![
        ("1 table margins", table_margins()),
        ("2 decomposition identity", decomposition_identity()),
        ("3 decomposition hand case", hand_case()),
        ("4 oracle equivalence", oracle_equivalence()),
        ("5 null spillover", null_spillover()),
        ("6 symmetry null", symmetry_null()),
    ];

    let sweep = synthetic_panel(&full_panel()).map_err(|e| e.to_string());
    let started = Instant::now();
    let single = sweep.clone().and_then(|p| run_rolling_with_workers(&p, &sweep_config(), 1).map_err(|e| e.to_string()));
    let single_time = started.elapsed();
    results.push((
        "7 normalization and bounds",
        single.as_ref().map_err(Clone::clone).and_then(bounds),
    ));
    let determinism = match (&sweep, &single) {
        (Ok(panel), Ok(one)) => run_rolling_with_workers(panel, &sweep_config(), 8)
            .map_err(|e| e.to_string())
            .and_then(|eight| {
                let (a, b) = (render(one), render(&eight));
                if a != b {
                    Err("1-worker and 8-worker outputs differ".to_string())
                } else if single_time.as_secs_f64() >= 60.0 {
                    Err(format!("single-threaded sweep took {single_time:?}"))
                } else {
                    Ok(format!("{} bytes identical across 1 and 8 workers; single-threaded {single_time:?}", a.len()))
                }
            }),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    results.push(("8 determinism and performance", determinism));

    let mut ok = true;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS  criterion {name}: {msg}"),
            Err(msg) => {
                ok = false;
                println!("FAIL  criterion {name}: {msg}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
