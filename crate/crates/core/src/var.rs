//! VAR(p) estimation by equation-wise least squares, the moving-average
//! recursion, and companion-matrix stability diagnostics.

use nalgebra::{DMatrix, DVector, Schur};
use thiserror::Error;

/// Scaled-design condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarError {
    #[error("lag order must be at least 1")]
    ZeroLag,
    #[error("{rows} rows cannot identify a VAR({p}) in {n} variables with intercept")]
    InsufficientObservations { rows: usize, n: usize, p: usize },
    #[error("non-finite value in column {0}")]
    NonFinite(usize),
    #[error("singular design (condition estimate {condition:e})")]
    SingularDesign { condition: f64 },
    #[error("residual variance of equation {0} is not positive")]
    DegenerateResidual(usize),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, VarError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub intercept: DVector<f64>,
    /// `phi[l - 1]` multiplies the `l`-th lag.
    pub phi: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    pub n_obs: usize,
    /// Condition number of the column-equilibrated regressor matrix; `1.0`
    /// for models not estimated from data.
    pub condition: f64,
}

impl VarModel {
    /// Model with known parameters and zero intercept.
    pub fn from_parts(phi: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        if phi.is_empty() {
            return Err(VarError::ZeroLag);
        }
        let n = sigma.nrows();
        if sigma.ncols() != n || phi.iter().any(|m| m.shape() != (n, n)) {
            return Err(VarError::Invalid("coefficient and covariance shapes disagree".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * sigma[(i, i)].abs().max(1.0) {
                    return Err(VarError::Invalid("sigma is not symmetric".into()));
                }
            }
            if !(sigma[(i, i)] > 0.0) {
                return Err(VarError::DegenerateResidual(i));
            }
        }
        Ok(Self {
            intercept: DVector::zeros(n),
            phi,
            sigma,
            n_obs: 0,
            condition: 1.0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn lags(&self) -> usize {
        self.phi.len()
    }

    /// `(N p) x (N p)` companion matrix of the lag polynomial.
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.n_vars();
        let p = self.lags();
        let mut c = DMatrix::zeros(n * p, n * p);
        for (l, phi) in self.phi.iter().enumerate() {
            c.view_mut((0, l * n), (n, n)).copy_from(phi);
        }
        for k in 0..n * (p - 1) {
            c[(n + k, k)] = 1.0;
        }
        c
    }

    /// Residuals of this model on `window` (rows `p..T`).
    pub fn residuals(&self, window: &DMatrix<f64>) -> DMatrix<f64> {
        let (x, y) = design(window, self.lags());
        let mut coef = DMatrix::zeros(x.ncols(), self.n_vars());
        coef.row_mut(0).copy_from(&self.intercept.transpose());
        let n = self.n_vars();
        for (l, phi) in self.phi.iter().enumerate() {
            coef.view_mut((1 + l * n, 0), (n, n)).copy_from(&phi.transpose());
        }
        y - x * coef
    }
}

/// Regressors `[1, y_{t-1}', ..., y_{t-p}']` and targets `y_t'` for
/// `t = p..T`.
fn design(window: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, n) = window.shape();
    let t_eff = rows - p;
    let k = 1 + n * p;
    let x = DMatrix::from_fn(t_eff, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / n + 1;
            let var = (c - 1) % n;
            window[(r + p - lag, var)]
        }
    });
    let y = window.rows(p, t_eff).into_owned();
    (x, y)
}

/// Least-squares fit with intercept. The residual covariance uses the
/// degrees-of-freedom divisor `T - p - (N p + 1)`.
pub fn fit_var(window: &DMatrix<f64>, p: usize) -> Result<VarModel> {
    let (rows, n) = window.shape();
    if p == 0 {
        return Err(VarError::ZeroLag);
    }
    let k = 1 + n * p;
    if rows <= p || rows - p <= k {
        return Err(VarError::InsufficientObservations { rows, n, p });
    }
    for c in 0..n {
        if window.column(c).iter().any(|v| !v.is_finite()) {
            return Err(VarError::NonFinite(c));
        }
    }
    let (x, y) = design(window, p);
    let t_eff = rows - p;

    // Equilibrate columns so the condition estimate reflects collinearity
    // rather than units.
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if scale.iter().any(|s| *s == 0.0) {
        return Err(VarError::SingularDesign { condition: f64::INFINITY });
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(VarError::SingularDesign { condition });
    }
    let qty = qr.q().transpose() * &y;
    let mut coef = r
        .solve_upper_triangular(&qty)
        .ok_or(VarError::SingularDesign { condition })?;
    for (j, s) in scale.iter().enumerate() {
        coef.row_mut(j).unscale_mut(*s);
    }

    let resid = &y - &x * &coef;
    let dof = (t_eff - k) as f64;
    let mut sigma = (resid.transpose() * &resid) / dof;
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = m;
            sigma[(j, i)] = m;
        }
    }
    if let Some(i) = (0..n).find(|&i| !(sigma[(i, i)] > 0.0)) {
        return Err(VarError::DegenerateResidual(i));
    }

    let intercept = coef.row(0).transpose();
    let phi = (0..p)
        .map(|l| coef.view((1 + l * n, 0), (n, n)).transpose())
        .collect();
    Ok(VarModel {
        intercept,
        phi,
        sigma,
        n_obs: t_eff,
        condition,
    })
}

/// Pick the lag in `1..=p_max` minimising AIC. All candidates are fitted on
/// the same effective sample (the last `T - p_max` rows as targets). Ties go
/// to the smaller lag.
pub fn select_lag_aic(window: &DMatrix<f64>, p_max: usize) -> Result<usize> {
    if p_max == 0 {
        return Err(VarError::ZeroLag);
    }
    let (rows, n) = window.shape();
    if rows <= p_max {
        return Err(VarError::InsufficientObservations { rows, n, p: p_max });
    }
    let mut best: Option<(usize, f64)> = None;
    let mut last_err = None;
    for p in 1..=p_max {
        let sub = window.rows(p_max - p, rows - (p_max - p)).into_owned();
        let model = match fit_var(&sub, p) {
            Ok(m) => m,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let t_eff = model.n_obs as f64;
        let k = (1 + n * p) as f64;
        // maximum likelihood covariance
        let ml = &model.sigma * ((t_eff - k) / t_eff);
        let det = ml.determinant();
        if !(det > 0.0) {
            continue;
        }
        let aic = det.ln() + 2.0 * (n as f64) * k / t_eff;
        if best.is_none_or(|(_, b)| aic < b) {
            best = Some((p, aic));
        }
    }
    match (best, last_err) {
        (Some((p, _)), _) => Ok(p),
        (None, Some(e)) => Err(e),
        (None, None) => Err(VarError::Invalid("no lag produced a positive-definite covariance".into())),
    }
}

/// Moving-average coefficients `Psi_0..Psi_{H-1}`, `Psi_0 = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaCoefficients(pub Vec<DMatrix<f64>>);

impl MaCoefficients {
    pub fn horizon(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[DMatrix<f64>] {
        &self.0
    }
}

/// `Psi_h = sum_{j=1}^{min(h,p)} Phi_j Psi_{h-j}` for `h = 1..H-1`.
pub fn ma_coefficients(model: &VarModel, horizon: usize) -> MaCoefficients {
    let n = model.n_vars();
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    if horizon == 0 {
        return MaCoefficients(psi);
    }
    psi.push(DMatrix::identity(n, n));
    for h in 1..horizon {
        let mut acc = DMatrix::zeros(n, n);
        for j in 1..=h.min(model.lags()) {
            acc += &model.phi[j - 1] * &psi[h - j];
        }
        psi.push(acc);
    }
    MaCoefficients(psi)
}

/// Largest eigenvalue modulus of the companion matrix. Values at or above
/// one mark a non-stationary fit.
pub fn spectral_radius(model: &VarModel) -> f64 {
    let c = model.companion();
    if let Some(r) = schur_radius(c.clone()) {
        return r;
    }
    // the unshifted QR sweep occasionally stalls; a balanced similarity
    // transform usually converges, and Gelfand's formula is the last resort
    if let Some(r) = schur_radius(balance(c.clone())) {
        return r;
    }
    gelfand_radius(&c)
}

fn schur_radius(m: DMatrix<f64>) -> Option<f64> {
    let niter = 200 * m.nrows().max(1);
    let schur = Schur::try_new(m, f64::EPSILON, niter)?;
    Some(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Parlett-Reinsch diagonal balancing with powers of two, which keeps the
/// eigenvalues exact.
fn balance(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for _ in 0..100 {
        let mut converged = true;
        for i in 0..n {
            let col: f64 = (0..n).filter(|&k| k != i).map(|k| m[(k, i)].abs()).sum();
            let row: f64 = (0..n).filter(|&k| k != i).map(|k| m[(i, k)].abs()).sum();
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let s = col + row;
            let mut f: f64 = 1.0;
            let mut c = col;
            while c < row / 2.0 {
                f *= 2.0;
                c *= 4.0;
            }
            while c > row * 2.0 {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + row) / f < 0.95 * s {
                converged = false;
                m.row_mut(i).unscale_mut(f);
                m.column_mut(i).scale_mut(f);
            }
        }
        if converged {
            break;
        }
    }
    m
}

/// `lim ||C^k||^(1/k)` by repeated squaring with renormalisation.
fn gelfand_radius(c: &DMatrix<f64>) -> f64 {
    let mut m = c.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..60 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale += norm.ln() / k;
        m = &m * &m;
        k *= 2.0;
    }
    (log_scale + m.norm().ln() / k).exp()
}
