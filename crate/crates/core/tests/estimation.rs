use nalgebra::DMatrix;
use volspill::gfevd::{FevdMatrix, SigmaConvention};
use volspill::realized::{DailyMeasure, MeasureKind};
use volspill::rolling::{run_rolling, RollingConfig};
use volspill::spillover::{net_pairwise, net_spillover, ReportingConvention};
use volspill::synth::{
    analytic_forecast_variances, impulse_psi, mc_forecast_error_shares, simulate_var, synthetic_panel, SynthSpec, SyntheticPanelSpec,
};
use volspill::var::{fit_var, ma_coefficients, VarModel};

fn published_table() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[0.499025, 0.219881, 0.281094, 0.253731, 0.447523, 0.298746, 0.251333, 0.213211, 0.535456],
    )
}

#[test]
fn table_net_and_pairwise() {
    let net = net_spillover(&published_table(), 0, ReportingConvention::Table).unwrap();
    assert!((net - 0.4089).abs() < 1e-9);
    let pair = net_pairwise(&published_table(), 0, 1, ReportingConvention::EqN).unwrap();
    assert!((pair - 1.1283).abs() < 1e-4, "{pair}");
}

#[test]
fn white_noise_covariance() {
    let out = simulate_var(&SynthSpec {
        phi: vec![DMatrix::zeros(3, 3)],
        sigma: DMatrix::identity(3, 3),
        t: 50_000,
        seed: 11,
    })
    .unwrap();
    let cov = out.transpose() * &out / out.nrows() as f64;
    assert!((cov - DMatrix::<f64>::identity(3, 3)).amax() < 0.05);
}

#[test]
fn ar1_autocorrelation() {
    let out = simulate_var(&SynthSpec {
        phi: vec![DMatrix::identity(2, 2) * 0.9],
        sigma: DMatrix::identity(2, 2),
        t: 50_000,
        seed: 12,
    })
    .unwrap();
    for c in 0..2 {
        let x = out.column(c);
        let mean = x.mean();
        let num: f64 = (1..x.len()).map(|t| (x[t] - mean) * (x[t - 1] - mean)).sum();
        let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((num / den - 0.9).abs() < 0.02, "{}", num / den);
    }
}

#[test]
fn monte_carlo_denominators() {
    let model = VarModel::from_parts(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2)).unwrap();
    // with no dynamics only the final shock reaches the horizon
    let mc = mc_forecast_error_shares(&model, 5, 200_000, 3).unwrap();
    let analytic = analytic_forecast_variances(&ma_coefficients(&model, 5), &model.sigma);
    for i in 0..2 {
        assert_eq!(analytic[i], 1.0);
        assert!((mc.variance(i) / analytic[i] - 1.0).abs() < 0.02, "{}", mc.variance(i));
    }
    let walk_like = VarModel::from_parts(vec![DMatrix::identity(2, 2) * 0.999], DMatrix::identity(2, 2)).unwrap();
    let mc = mc_forecast_error_shares(&walk_like, 5, 200_000, 3).unwrap();
    for i in 0..2 {
        assert!((mc.variance(i) / 5.0 - 1.0).abs() < 0.02, "{}", mc.variance(i));
    }
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
    let model = VarModel::from_parts(vec![DMatrix::identity(2, 2) * 0.4], sigma.clone()).unwrap();
    let mc = mc_forecast_error_shares(&model, 1, 100_000, 4).unwrap();
    for i in 0..2 {
        assert!((mc.variance(i) - sigma[(i, i)]).abs() < 3.0 * mc.std_error[i]);
    }
    assert!(mc_forecast_error_shares(
        &VarModel::from_parts(vec![DMatrix::identity(2, 2)], sigma).unwrap(),
        3,
        10,
        0
    )
    .is_err());
}

#[test]
fn impulse_oracle_trivial_cases() {
    let zero = VarModel::from_parts(vec![DMatrix::zeros(3, 3)], DMatrix::identity(3, 3)).unwrap();
    let psi = impulse_psi(&zero, 4);
    assert!(psi.as_slice()[1..].iter().all(|m| m.amax() == 0.0));
    let diag = VarModel::from_parts(
        vec![DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.3, 0.9]))],
        DMatrix::identity(3, 3),
    )
    .unwrap();
    for m in impulse_psi(&diag, 6).as_slice() {
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }
}

#[test]
fn var1_recovery() {
    let phi = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.2, 0.3, -0.1, 0.0, 0.25, 0.6]);
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0]);
    let data = simulate_var(&SynthSpec {
        phi: vec![phi.clone()],
        sigma: sigma.clone(),
        t: 50_000,
        seed: 5,
    })
    .unwrap();
    let fit = fit_var(&data, 1).unwrap();
    assert!((&fit.phi[0] - &phi).amax() < 0.02, "{}", fit.phi[0]);
    assert!((&fit.sigma - &sigma).amax() < 0.05);
}

#[test]
fn white_noise_coefficients_vanish() {
    let t = 20_000;
    let data = simulate_var(&SynthSpec {
        phi: vec![DMatrix::zeros(2, 2)],
        sigma: DMatrix::identity(2, 2),
        t,
        seed: 6,
    })
    .unwrap();
    let fit = fit_var(&data, 2).unwrap();
    // coefficient standard errors are about 1/sqrt(T) here
    let se = 1.0 / (t as f64).sqrt();
    for m in &fit.phi {
        assert!(m.amax() < 3.0 * se * 1.5, "{m}");
    }
}

#[test]
fn constant_column_is_singular() {
    let mut data = simulate_var(&SynthSpec {
        phi: vec![DMatrix::zeros(2, 2)],
        sigma: DMatrix::identity(2, 2),
        t: 100,
        seed: 7,
    })
    .unwrap();
    data.column_mut(1).fill(3.0);
    assert!(matches!(fit_var(&data, 1), Err(volspill::var::VarError::SingularDesign { .. })));
}

fn small_cfg() -> RollingConfig {
    RollingConfig {
        window_length: 60,
        ..RollingConfig::default()
    }
}

#[test]
fn prepending_rows_leaves_windows_unchanged() {
    let long = synthetic_panel(&SyntheticPanelSpec::persistent(3, 150, 8)).unwrap();
    let short = long.slice(37, long.len());
    let a = run_rolling(&long, &small_cfg()).unwrap();
    let b = run_rolling(&short, &small_cfg()).unwrap();
    assert_eq!(a.windows.len(), b.windows.len() + 37);
    for (wa, wb) in a.windows[37..].iter().zip(&b.windows) {
        assert_eq!(wa.date, wb.date);
        assert_eq!(wa.outcomes, wb.outcomes);
        assert_eq!(wa.sam, wb.sam);
    }
}

#[test]
fn exact_window_gives_one_point() {
    let panel = synthetic_panel(&SyntheticPanelSpec::persistent(3, 60, 9)).unwrap();
    let series = run_rolling(&panel, &small_cfg()).unwrap();
    assert_eq!(series.windows.len(), 1);
    assert_eq!(series.dates(), vec![*panel.dates().last().unwrap()]);
}

#[test]
fn mirrored_semivariances_give_zero_sam() {
    let panel = synthetic_panel(&SyntheticPanelSpec::persistent(3, 100, 10))
        .unwrap()
        .map_cells(|m| DailyMeasure { rs_plus: m.rs_minus, ..*m });
    let series = run_rolling(&panel, &small_cfg()).unwrap();
    assert!(series.windows.iter().all(|w| w.sam.as_ref().unwrap().sam == Some(0.0)));
}

#[test]
fn stationary_fixture_mean_tracks_population_total() {
    // population spillover of the generating process vs the average of
    // rolling estimates on one long draw
    let phi = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.15, 0.45, 0.2, 0.1, 0.1, 0.55]);
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.35, 0.4, 1.0, 0.45, 0.35, 0.45, 1.0]);
    let model = VarModel::from_parts(vec![phi.clone()], sigma.clone()).unwrap();
    let fevd = FevdMatrix::from_model(&model, 10, SigmaConvention::Variance).unwrap();
    let truth = volspill::spillover::total_spillover(&fevd.normalized);

    let data = simulate_var(&SynthSpec { phi: vec![phi], sigma, t: 3000, seed: 13 }).unwrap();
    let dates = volspill::synth::weekdays_from(chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(), 3000);
    let values = (0..3000)
        .map(|t| {
            (0..3)
                .map(|c| DailyMeasure { date: dates[t], rv: data[(t, c)], rs_minus: data[(t, c)], rs_plus: data[(t, c)] })
                .collect()
        })
        .collect();
    let panel = volspill::realized::MeasurePanel::new(vec!["x".into(), "y".into(), "z".into()], dates, values).unwrap();
    let cfg = RollingConfig {
        window_length: 200,
        lag: volspill::rolling::LagChoice::Fixed(1),
        kinds: vec![MeasureKind::Rv],
        ..RollingConfig::default()
    };
    let series = run_rolling(&panel, &cfg).unwrap();
    let totals: Vec<f64> = (0..series.windows.len()).filter_map(|w| series.estimate(w, MeasureKind::Rv)).map(|e| e.spillovers.total).collect();
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    assert!((mean - truth).abs() < 3.0, "mean {mean} vs population {truth}");
}
