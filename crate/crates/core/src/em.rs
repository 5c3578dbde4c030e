//! Expectation-maximisation for the dynamic factor model.
//!
//! Each iteration runs the Kalman filter and smoother at the current
//! parameters (E-step) and then maximises the expected complete-data
//! log-likelihood in closed form (M-step): the factor VAR by a moment
//! regression, random-walk variances from smoothed increments, loadings and
//! measurement variances series by series, and the initial state from its
//! smoothed moments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::init::{pre_estimate, InitOptions, PreEstimate};
use crate::kalman::{kf_filter, ks_smooth, SmootherOutput};
use crate::linalg::{spd_solve, symmetrize};
use crate::model::{build_state_space, ModelSpec, Panel, Params};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_PHI: f64 = 1e-5;
const VARIANCE_FLOOR: f64 = 1e-12;

/// Treatment of the measurement-error variance on series with extra states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPolicy {
    /// Start at the pre-estimate value and update at each M-step.
    Estimated,
    /// Hold every `sigma2_nu` at the given value.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub phi: PhiPolicy,
    /// Divide every series by the standard deviation of its differences
    /// before estimation; outputs are mapped back to the data scale.
    pub standardize: bool,
    pub init: InitOptions,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            phi: PhiPolicy::Estimated,
            standardize: false,
            init: InitOptions::default(),
        }
    }
}

/// Result of a fit. Parameters and the smoother output are in the
/// (possibly standardised) estimation scale; `factors` likewise, while
/// `common` and `trend` are on the data scale.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: Params,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub loglik: f64,
    /// Log-likelihood at every evaluated parameter vector, starting with the
    /// pre-estimate.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub smoothed: SmootherOutput,
    /// Smoothed factors, q x T.
    pub factors: DMatrix<f64>,
    /// `lambda_i' F_t`, n x T.
    pub common: DMatrix<f64>,
    /// Smoothed `alpha_it + beta_it t` (zero outside the trend sets), n x T.
    pub trend: DMatrix<f64>,
    /// Per-series scale divided out before estimation (ones when not
    /// standardising).
    pub scale: DVector<f64>,
    pub pre: PreEstimate,
}

impl EmFit {
    pub fn common_with_trend(&self) -> DMatrix<f64> {
        &self.common + &self.trend
    }
}

/// Relative change used by the stopping rule.
pub fn relative_change(current: f64, previous: f64) -> f64 {
    let denom = 0.5 * (current.abs() + previous.abs());
    if denom == 0.0 {
        0.0
    } else {
        (current - previous).abs() / denom
    }
}

/// Loading row solving `gram * lambda = cross`.
pub fn m_step_loading_row(gram: &DMatrix<f64>, cross: &DVector<f64>) -> DVector<f64> {
    let c = DMatrix::from_column_slice(cross.len(), 1, cross.as_slice());
    spd_solve(gram, &c).column(0).into_owned()
}

fn floor_psd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let mut m = m.clone();
    symmetrize(&mut m);
    if m.clone().cholesky().is_some() {
        return m;
    }
    let eig = SymmetricEigen::new(m);
    let d = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&d) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Closed-form maximiser of the expected complete-data log-likelihood given
/// the smoothed moments at `params`. Returns the new parameters and the new
/// initial-state mean and covariance.
pub fn m_step(
    spec: &ModelSpec,
    panel: &Panel,
    params: &Params,
    smooth: &SmootherOutput,
    phi: PhiPolicy,
) -> Result<(Params, DVector<f64>, DMatrix<f64>)> {
    let layout = spec.layout();
    let q = spec.q;
    let t_len = spec.t_len;
    let tf = t_len as f64;
    let lf = spec.loading_dim();
    let vf = q * spec.p;

    let second: Vec<DMatrix<f64>> = (0..=t_len).map(|t| smooth.second_moment(t)).collect();
    let cross: Vec<DMatrix<f64>> = (1..=t_len).map(|t| smooth.cross_moment(t)).collect();

    let mut out = params.clone();

    // Factor VAR.
    let mut s_fz = DMatrix::zeros(q, vf);
    let mut g = DMatrix::zeros(vf, vf);
    let mut s_ff = DMatrix::zeros(q, q);
    for t in 1..=t_len {
        s_fz += cross[t - 1].view((0, 0), (q, vf));
        g += second[t - 1].view((0, 0), (vf, vf));
        s_ff += second[t].view((0, 0), (q, q));
    }
    let a = spd_solve(&g, &s_fz.transpose()).transpose();
    let gamma_u = (&s_ff - &a * s_fz.transpose()) / tf;
    out.gamma_u = floor_psd(&gamma_u, VARIANCE_FLOOR);
    out.var_coeffs = (0..spec.p)
        .map(|k| a.columns(k * q, q).into_owned())
        .collect();

    // Random-walk innovation variances.
    let increment_var = |k: usize| {
        let mut v = 0.0;
        for t in 1..=t_len {
            v += second[t][(k, k)] + second[t - 1][(k, k)] - 2.0 * cross[t - 1][(k, k)];
        }
        (v / tf).max(VARIANCE_FLOOR)
    };
    for i in 0..spec.n {
        if let Some(k) = layout.xi(i) {
            out.gamma_e_diag[i] = increment_var(k);
        }
        if let Some(k) = layout.alpha(i) {
            out.sigma2_omega[i] = increment_var(k);
        }
        if let Some(k) = layout.beta(i) {
            out.sigma2_eta[i] = increment_var(k);
        }
    }

    // Loadings and measurement variances.
    let mut gram_all = DMatrix::zeros(lf, lf);
    for t in 1..=t_len {
        gram_all += second[t].view((0, 0), (lf, lf));
    }
    for i in 0..spec.n {
        let obs: Vec<usize> = (1..=t_len)
            .filter(|&t| panel.observed[(i, t - 1)])
            .collect();
        if obs.is_empty() {
            continue;
        }
        let mut gram = gram_all.clone();
        if obs.len() < t_len {
            for t in 1..=t_len {
                if !panel.observed[(i, t - 1)] {
                    gram -= second[t].view((0, 0), (lf, lf));
                }
            }
        }
        let mut rhs = DVector::zeros(lf);
        for &t in &obs {
            let x = panel.data[(i, t - 1)];
            rhs += smooth.mean[t].rows(0, lf) * x;
            for (k, w) in layout.w_selector(i, t) {
                rhs -= second[t].view((0, k), (lf, 1)) * w;
            }
        }
        let lambda = m_step_loading_row(&gram, &rhs);
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("loadings of series {i}")));
        }
        out.set_loading_row(i, &lambda);

        let mut ss = 0.0;
        for &t in &obs {
            let mut idx: Vec<(usize, f64)> = (0..lf).map(|k| (k, lambda[k])).collect();
            idx.extend(layout.w_selector(i, t));
            let m = &smooth.mean[t];
            let p = &smooth.cov[t];
            let fit: f64 = idx.iter().map(|&(k, z)| z * m[k]).sum();
            let mut var = 0.0;
            for &(k, zk) in &idx {
                for &(l, zl) in &idx {
                    var += zk * zl * p[(k, l)];
                }
            }
            ss += (panel.data[(i, t - 1)] - fit).powi(2) + var;
        }
        let v = (ss / obs.len() as f64).max(VARIANCE_FLOOR);
        if spec.in_im(i) {
            out.sigma2_nu[i] = match phi {
                PhiPolicy::Estimated => v,
                PhiPolicy::Fixed(val) => val,
            };
        } else {
            out.gamma_e_diag[i] = v;
        }
    }

    let init_mean = smooth.mean[0].clone();
    let mut init_cov = smooth.cov[0].clone();
    symmetrize(&mut init_cov);
    if out
        .gamma_u
        .iter()
        .chain(init_mean.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("M-step".into()));
    }
    Ok((out, init_mean, init_cov))
}

/// Log-likelihood and smoothed moments at `params`.
pub fn e_step(
    spec: &ModelSpec,
    panel: &Panel,
    params: &Params,
    init_mean: &DVector<f64>,
    init_cov: &DMatrix<f64>,
) -> Result<SmootherOutput> {
    let ss = build_state_space(spec, params)?;
    let filt = kf_filter(&ss, panel, init_mean, init_cov)?;
    if !filt.loglik.is_finite() {
        return Err(Error::NonFinite("log-likelihood".into()));
    }
    ks_smooth(&filt, &ss)
}

fn series_scale(panel: &Panel) -> DVector<f64> {
    let (n, t_len) = panel.data.shape();
    DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let d: Vec<f64> = (1..t_len)
                .filter(|&c| panel.observed[(i, c)] && panel.observed[(i, c - 1)])
                .map(|c| panel.data[(i, c)] - panel.data[(i, c - 1)])
                .collect();
            if d.len() < 2 {
                return 1.0;
            }
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        }),
    )
}

/// Runs EM from the pre-estimate until the relative log-likelihood change
/// drops below `opts.tol` or `opts.max_iter` M-steps have been taken.
pub fn fit(spec: &ModelSpec, panel: &Panel, opts: &EmOptions) -> Result<EmFit> {
    panel.check_spec(spec)?;
    let scale = if opts.standardize {
        series_scale(panel)
    } else {
        DVector::from_element(spec.n, 1.0)
    };
    let mut work = panel.clone();
    if opts.standardize {
        for i in 0..spec.n {
            work.data.row_mut(i).unscale_mut(scale[i]);
        }
    }

    let pre = pre_estimate(spec, &work, &opts.init)?;
    let mut params = pre.params.clone();
    if let PhiPolicy::Fixed(v) = opts.phi {
        if v <= 0.0 {
            return Err(Error::InvalidParams(
                "fixed measurement-error variance must be positive".into(),
            ));
        }
        for i in 0..spec.n {
            if spec.in_im(i) {
                params.sigma2_nu[i] = v;
            }
        }
    }
    let mut init_mean = pre.init_mean.clone();
    let mut init_cov = pre.init_cov.clone();

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let smoothed = loop {
        let smooth = e_step(spec, &work, &params, &init_mean, &init_cov)?;
        let ll = smooth.loglik;
        if let Some(&prev) = history.last() {
            if relative_change(ll, prev) < opts.tol {
                converged = true;
            }
        }
        history.push(ll);
        if converged || iterations >= opts.max_iter {
            break smooth;
        }
        let (next, m0, p0) = m_step(spec, &work, &params, &smooth, opts.phi)?;
        params = next;
        init_mean = m0;
        init_cov = p0;
        iterations += 1;
    };

    let layout = spec.layout();
    let lf = spec.loading_dim();
    let lambda = params.stacked_loadings();
    let t_len = spec.t_len;
    let mut factors = DMatrix::zeros(spec.q, t_len);
    let mut common = DMatrix::zeros(spec.n, t_len);
    let mut trend = DMatrix::zeros(spec.n, t_len);
    for t in 1..=t_len {
        let m = &smoothed.mean[t];
        factors.set_column(t - 1, &m.rows(0, spec.q));
        common.set_column(t - 1, &(&lambda * m.rows(0, lf)));
        for i in 0..spec.n {
            let mut v = 0.0;
            if let Some(k) = layout.alpha(i) {
                v += m[k];
            }
            if let Some(k) = layout.beta(i) {
                v += m[k] * t as f64;
            }
            trend[(i, t - 1)] = v;
        }
    }
    for i in 0..spec.n {
        common.row_mut(i).scale_mut(scale[i]);
        trend.row_mut(i).scale_mut(scale[i]);
    }

    Ok(EmFit {
        loglik: *history.last().unwrap(),
        params,
        init_mean,
        init_cov,
        history,
        iterations,
        converged,
        smoothed,
        factors,
        common,
        trend,
        scale,
        pre,
    })
}
