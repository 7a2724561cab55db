//! Simulation from known VAR processes and independent oracles for the
//! analytic pipeline.
//!
//! # Random numbers
//!
//! All draws come from [`GaussianStream`]:
//!
//! * ChaCha20 (`rand_chacha::ChaCha20Rng`) keyed with the 64-bit seed in
//!   little-endian order in key bytes 0..8 and zeros elsewhere, with the
//!   64-bit stream id selected by `set_stream`.
//! * Uniforms `u = ((x >> 11) + 0.5) * 2^-53` from successive `next_u64`
//!   outputs, so `u` lies strictly inside (0, 1).
//! * Standard normals by Box-Muller on consecutive uniform pairs `(u1, u2)`:
//!   `sqrt(-2 ln u1) cos(2 pi u2)` first, then `sqrt(-2 ln u1) sin(2 pi u2)`.
//!
//! [`simulate_var`] uses stream 0. Monte Carlo path `k` uses stream `k`, so
//! results never depend on how paths are spread over threads.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

use crate::realized::{DailyMeasure, MeasurePanel, realized_semivariances, realized_variance};
use crate::var::{MaCoefficients, VarModel, spectral_radius};

pub const BURN_IN: usize = 1000;

const MC_CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("process is not stable (companion spectral radius {0})")]
    Unstable(f64),
    #[error("sigma is not positive definite")]
    NotPositiveDefinite,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }
}

/// Known VAR(p) to simulate: `y_t = sum_j phi[j - 1] y_{t-j} + eps_t`,
/// `eps_t ~ N(0, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub phi: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    pub t: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn model(&self) -> Result<VarModel> {
        VarModel::from_parts(self.phi.clone(), self.sigma.clone()).map_err(|e| SynthError::Invalid(e.to_string()))
    }
}

fn stable_model(model: &VarModel) -> Result<()> {
    let radius = spectral_radius(model);
    if !(radius < 1.0) {
        return Err(SynthError::Unstable(radius));
    }
    Ok(())
}

fn cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(SynthError::NotPositiveDefinite)
}

/// `out = sum_j phi_j hist[j - 1]`, `hist` holding the last `p` states with
/// the most recent first.
fn propagate(phi: &[DMatrix<f64>], hist: &[Vec<f64>], out: &mut [f64]) {
    out.fill(0.0);
    for (j, m) in phi.iter().enumerate() {
        let prev = &hist[j];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, v) in prev.iter().enumerate() {
                acc += m[(r, c)] * v;
            }
            *o += acc;
        }
    }
}

/// `spec.t x N` draw from the process after discarding [`BURN_IN`] steps.
pub fn simulate_var(spec: &SynthSpec) -> Result<DMatrix<f64>> {
    let model = spec.model()?;
    stable_model(&model)?;
    let chol = cholesky(&spec.sigma)?;
    let n = spec.n();
    let p = spec.p();
    let mut rng = GaussianStream::new(spec.seed, 0);
    let mut hist = vec![vec![0.0; n]; p];
    let mut out = DMatrix::zeros(spec.t, n);
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    for step in 0..(BURN_IN + spec.t) {
        propagate(&spec.phi, &hist, &mut y);
        rng.fill_normal(&mut z);
        for r in 0..n {
            let mut e = 0.0;
            for c in 0..=r {
                e += chol[(r, c)] * z[c];
            }
            y[r] += e;
        }
        hist.rotate_right(1);
        hist[0].copy_from_slice(&y);
        if step >= BURN_IN {
            for (c, v) in y.iter().enumerate() {
                out[(step - BURN_IN, c)] = *v;
            }
        }
    }
    Ok(out)
}

/// MA coefficients by pushing each unit impulse through the noise-free,
/// intercept-free recursion: column `k` of `Psi_h` is the state `h` steps
/// after a unit shock to variable `k`.
pub fn impulse_psi(model: &VarModel, horizon: usize) -> MaCoefficients {
    let n = model.n_vars();
    let p = model.lags();
    let mut psi = vec![DMatrix::zeros(n, n); horizon];
    for k in 0..n {
        let mut hist = vec![vec![0.0; n]; p];
        let mut y = vec![0.0; n];
        y[k] = 1.0;
        for (h, m) in psi.iter_mut().enumerate() {
            if h > 0 {
                propagate(&model.phi, &hist, &mut y);
            }
            for (r, v) in y.iter().enumerate() {
                m[(r, k)] = *v;
            }
            hist.rotate_right(1);
            hist[0].copy_from_slice(&y);
        }
    }
    MaCoefficients(psi)
}

/// Monte Carlo estimate of the H-step forecast error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct McForecastErrors {
    /// Mean outer product of the simulated H-step errors.
    pub covariance: DMatrix<f64>,
    /// Standard error of each diagonal entry.
    pub std_error: DVector<f64>,
    pub n_paths: usize,
}

impl McForecastErrors {
    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }
}

/// Simulate `n_paths` H-step forecast errors. Starting each path from a zero
/// state with zero intercept makes the optimal forecast zero, so the state
/// after `H` shocks is the forecast error itself.
pub fn mc_forecast_error_shares(model: &VarModel, horizon: usize, n_paths: usize, seed: u64) -> Result<McForecastErrors> {
    stable_model(model)?;
    if horizon == 0 || n_paths < 2 {
        return Err(SynthError::Invalid("need horizon >= 1 and at least two paths".into()));
    }
    let chol = cholesky(&model.sigma)?;
    let n = model.n_vars();
    let p = model.lags();

    let chunks: Vec<(usize, usize)> = (0..n_paths)
        .step_by(MC_CHUNK)
        .map(|s| (s, (s + MC_CHUNK).min(n_paths)))
        .collect();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut outer = vec![0.0; n * n];
            let mut fourth = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut y = vec![0.0; n];
            for path in start..end {
                let mut rng = GaussianStream::new(seed, path as u64);
                let mut hist = vec![vec![0.0; n]; p];
                for _ in 0..horizon {
                    propagate(&model.phi, &hist, &mut y);
                    rng.fill_normal(&mut z);
                    for r in 0..n {
                        let mut e = 0.0;
                        for c in 0..=r {
                            e += chol[(r, c)] * z[c];
                        }
                        y[r] += e;
                    }
                    hist.rotate_right(1);
                    hist[0].copy_from_slice(&y);
                }
                for r in 0..n {
                    for c in 0..n {
                        outer[r * n + c] += y[r] * y[c];
                    }
                    fourth[r] += y[r].powi(4);
                }
            }
            (outer, fourth)
        })
        .collect();

    let mut outer = vec![0.0; n * n];
    let mut fourth = vec![0.0; n];
    for (o, f) in &partial {
        for (a, b) in outer.iter_mut().zip(o) {
            *a += b;
        }
        for (a, b) in fourth.iter_mut().zip(f) {
            *a += b;
        }
    }
    let m = n_paths as f64;
    let covariance = DMatrix::from_row_slice(n, n, &outer) / m;
    let std_error = DVector::from_fn(n, |i, _| {
        let mean = covariance[(i, i)];
        let var_sq = (fourth[i] / m - mean * mean) * m / (m - 1.0);
        (var_sq.max(0.0) / m).sqrt()
    });
    Ok(McForecastErrors {
        covariance,
        std_error,
        n_paths,
    })
}

/// Analytic H-step forecast error variances `sum_h e_i' Psi_h Sigma Psi_h' e_i`.
pub fn analytic_forecast_variances(psi: &MaCoefficients, sigma: &DMatrix<f64>) -> DVector<f64> {
    let n = sigma.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for m in psi.as_slice() {
        acc += m * sigma * m.transpose();
    }
    acc.diagonal()
}

/// Random stable VAR(p) for property checks: coefficient draws rescaled so
/// the companion spectral radius equals a draw from [0.2, 0.95), and
/// `Sigma = A A' / N + 0.1 I`.
pub fn random_stable_model(seed: u64, n: usize, p: usize) -> VarModel {
    let mut g = GaussianStream::new(seed, 0);
    let mut phi: Vec<DMatrix<f64>> = (0..p)
        .map(|_| DMatrix::from_fn(n, n, |_, _| 0.4 * g.standard_normal()))
        .collect();
    let a = DMatrix::from_fn(n, n, |_, _| g.standard_normal());
    let mut sigma = (&a * a.transpose()) / n as f64 + DMatrix::identity(n, n) * 0.1;
    for i in 0..n {
        for j in 0..i {
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    let target = 0.2 + 0.75 * g.uniform();
    let probe = VarModel::from_parts(phi.clone(), sigma.clone()).expect("valid shapes");
    let radius = spectral_radius(&probe);
    if radius > 0.0 {
        // scaling Phi_j by c^j scales every companion eigenvalue by c
        let c = target / radius;
        for (j, m) in phi.iter_mut().enumerate() {
            *m *= c.powi(j as i32 + 1);
        }
    }
    VarModel::from_parts(phi, sigma).expect("valid shapes")
}

/// Synthetic daily panel built from simulated intraday returns.
///
/// Daily log-variances follow a stable VAR(1) around `mean_log_variance`;
/// each day draws `intraday_returns` cross-correlated normal returns scaled
/// to that day's variance, and the realized measures are computed from
/// them. Dates are consecutive weekdays from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanelSpec {
    pub assets: Vec<String>,
    pub days: usize,
    pub seed: u64,
    pub intraday_returns: usize,
    pub log_variance_phi: DMatrix<f64>,
    pub log_variance_sigma: DMatrix<f64>,
    pub mean_log_variance: f64,
    pub intraday_correlation: f64,
    pub start: NaiveDate,
}

impl SyntheticPanelSpec {
    /// Persistent, cross-linked volatility with moderate return correlation.
    pub fn persistent(n_assets: usize, days: usize, seed: u64) -> Self {
        let n = n_assets;
        let phi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.7 } else { 0.15 / (n.max(2) - 1) as f64 });
        let sigma = DMatrix::from_fn(n, n, |i, j| if i == j { 0.2 } else { 0.1 });
        Self {
            assets: (0..n).map(|i| format!("a{}", i + 1)).collect(),
            days,
            seed,
            intraday_returns: 66,
            log_variance_phi: phi,
            log_variance_sigma: sigma,
            mean_log_variance: (2e-4f64).ln(),
            intraday_correlation: 0.5,
            start: NaiveDate::from_ymd_opt(1987, 9, 1).unwrap(),
        }
    }
}

pub fn weekdays_from(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

pub fn synthetic_panel(spec: &SyntheticPanelSpec) -> Result<MeasurePanel> {
    let n = spec.assets.len();
    if n < 2 || spec.intraday_returns == 0 || spec.days == 0 {
        return Err(SynthError::Invalid("need two assets, one intraday return and one day".into()));
    }
    if !(spec.intraday_correlation > -1.0 / (n as f64 - 1.0) && spec.intraday_correlation < 1.0) {
        return Err(SynthError::Invalid("intraday correlation must keep the matrix positive definite".into()));
    }
    let latent = simulate_var(&SynthSpec {
        phi: vec![spec.log_variance_phi.clone()],
        sigma: spec.log_variance_sigma.clone(),
        t: spec.days,
        seed: spec.seed,
    })?;
    let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { spec.intraday_correlation });
    let chol = cholesky(&corr)?;
    let mut rng = GaussianStream::new(spec.seed, 1);
    let dates = weekdays_from(spec.start, spec.days);
    let m = spec.intraday_returns;
    let mut z = vec![0.0; n];
    let mut returns = vec![vec![0.0; m]; n];
    let mut values = Vec::with_capacity(spec.days);
    for (t, date) in dates.iter().enumerate() {
        for k in 0..m {
            rng.fill_normal(&mut z);
            for r in 0..n {
                let mut e = 0.0;
                for c in 0..=r {
                    e += chol[(r, c)] * z[c];
                }
                let sd = ((spec.mean_log_variance + latent[(t, r)]).exp() / m as f64).sqrt();
                returns[r][k] = sd * e;
            }
        }
        let row = returns
            .iter()
            .map(|r| {
                let rv = realized_variance(r).expect("non-empty finite");
                let (rs_minus, rs_plus) = realized_semivariances(r).expect("non-empty finite");
                DailyMeasure {
                    date: *date,
                    rv,
                    rs_minus,
                    rs_plus,
                }
            })
            .collect();
        values.push(row);
    }
    MeasurePanel::new(spec.assets.clone(), dates, values).map_err(|e| SynthError::Invalid(e.to_string()))
}
