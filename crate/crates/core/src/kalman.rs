//! Kalman filter and fixed-interval smoother.
//!
//! The measurement covariance is diagonal, so the update is carried out in
//! factored information form: with `P = L L'`, `C = Z' R^-1 Z` and
//! `S = I + L' C L`, the filtered covariance is `L S^-1 L'` and the innovation
//! determinant is `det(R) det(S)`. This costs `O(n K^2 + K^3)` per period and
//! keeps every filtered covariance PSD by construction. Missing cells are
//! handled by dropping their rows from `Z`, `R` and the data at that period.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, spd_solve, symmetrize, trace};
use crate::model::{Panel, StateLayout, StateSpace};

/// Default "very large" initial variance for diffuse states.
pub const DEFAULT_KAPPA: f64 = 1e7;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A linear Gaussian state-space system with diagonal measurement noise.
pub trait StateSpaceModel {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn transition(&self) -> &DMatrix<f64>;
    fn state_cov(&self) -> &DMatrix<f64>;
    /// Measurement map at one-based time `t`.
    fn measurement(&self, t: usize) -> DMatrix<f64>;
    fn measurement_var(&self) -> &DVector<f64>;
}

impl StateSpaceModel for StateSpace {
    fn state_dim(&self) -> usize {
        self.layout.state_dim
    }
    fn obs_dim(&self) -> usize {
        self.loadings.nrows()
    }
    fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }
    fn state_cov(&self) -> &DMatrix<f64> {
        &self.state_cov
    }
    fn measurement(&self, t: usize) -> DMatrix<f64> {
        self.measurement_map(t)
    }
    fn measurement_var(&self) -> &DVector<f64> {
        &self.measurement_cov_diag
    }
}

/// Time-invariant system, mostly useful for tests and small experiments.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    pub transition: DMatrix<f64>,
    pub state_cov: DMatrix<f64>,
    pub measurement: DMatrix<f64>,
    pub measurement_var: DVector<f64>,
}

impl StateSpaceModel for LinearGaussian {
    fn state_dim(&self) -> usize {
        self.transition.nrows()
    }
    fn obs_dim(&self) -> usize {
        self.measurement.nrows()
    }
    fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }
    fn state_cov(&self) -> &DMatrix<f64> {
        &self.state_cov
    }
    fn measurement(&self, _t: usize) -> DMatrix<f64> {
        self.measurement.clone()
    }
    fn measurement_var(&self) -> &DVector<f64> {
        &self.measurement_var
    }
}

/// Output of the forward pass. Vectors are indexed by `t - 1` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub predicted_mean: Vec<DVector<f64>>,
    pub predicted_cov: Vec<DMatrix<f64>>,
    pub filtered_mean: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
    /// Prediction errors of the observed rows.
    pub innovations: Vec<DVector<f64>>,
    pub observed_rows: Vec<Vec<usize>>,
    /// Per-period log-likelihood contributions.
    pub loglik_terms: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn t_len(&self) -> usize {
        self.filtered_mean.len()
    }

    /// Log-likelihood excluding periods `t <= burn_in`.
    pub fn loglik_after(&self, burn_in: usize) -> f64 {
        self.loglik_terms.iter().skip(burn_in).sum()
    }

    /// Innovation covariance `Z_o P_{t|t-1} Z_o' + R_o` at one-based `t`.
    pub fn innovation_cov<M: StateSpaceModel>(&self, model: &M, t: usize) -> DMatrix<f64> {
        let rows = &self.observed_rows[t - 1];
        let z = model.measurement(t).select_rows(rows.iter());
        let mut f = &z * &self.predicted_cov[t - 1] * z.transpose();
        for (k, &i) in rows.iter().enumerate() {
            f[(k, k)] += model.measurement_var()[i];
        }
        f
    }
}

/// Runs the filter from `s_0 ~ N(init_mean, init_cov)` over the panel.
pub fn kf_filter<M: StateSpaceModel>(
    model: &M,
    panel: &Panel,
    init_mean: &DVector<f64>,
    init_cov: &DMatrix<f64>,
) -> Result<FilterOutput> {
    let k_dim = model.state_dim();
    let n = model.obs_dim();
    if panel.n() != n {
        return Err(Error::Dimension(format!(
            "panel has {} series, model {}",
            panel.n(),
            n
        )));
    }
    if init_mean.len() != k_dim || init_cov.shape() != (k_dim, k_dim) {
        return Err(Error::Dimension("initial state has wrong dimension".into()));
    }
    if init_mean
        .iter()
        .chain(init_cov.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("initial state".into()));
    }
    let t_len = panel.t_len();
    let theta = model.transition();
    let theta_t = theta.transpose();
    let q_cov = model.state_cov();
    let r_all = model.measurement_var();

    let mut out = FilterOutput {
        init_mean: init_mean.clone(),
        init_cov: init_cov.clone(),
        predicted_mean: Vec::with_capacity(t_len),
        predicted_cov: Vec::with_capacity(t_len),
        filtered_mean: Vec::with_capacity(t_len),
        filtered_cov: Vec::with_capacity(t_len),
        innovations: Vec::with_capacity(t_len),
        observed_rows: Vec::with_capacity(t_len),
        loglik_terms: Vec::with_capacity(t_len),
        loglik: 0.0,
    };

    let mut a = init_mean.clone();
    let mut p = init_cov.clone();
    for col in 0..t_len {
        let t = col + 1;
        let a_pred = theta * &a;
        let mut p_pred = theta * &p * &theta_t + q_cov;
        symmetrize(&mut p_pred);

        let rows = panel.observed_rows(col);
        let (a_filt, p_filt, innov, ll) = if rows.is_empty() {
            (a_pred.clone(), p_pred.clone(), DVector::zeros(0), 0.0)
        } else {
            let z_full = model.measurement(t);
            let n_o = rows.len();
            let mut zs = DMatrix::zeros(n_o, k_dim);
            let mut v = DVector::zeros(n_o);
            let mut weighted_v = DVector::zeros(n_o);
            let mut log_r = 0.0;
            let mut quad_r = 0.0;
            for (k, &i) in rows.iter().enumerate() {
                let r = r_all[i];
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::Singular(format!(
                        "innovation covariance (measurement variance of series {i} is {r})"
                    )));
                }
                let zi = z_full.row(i);
                let pred = zi.dot(&a_pred.transpose());
                let vi = panel.data[(i, col)] - pred;
                v[k] = vi;
                let sd = r.sqrt();
                zs.row_mut(k).copy_from(&(zi / sd));
                weighted_v[k] = vi / sd;
                log_r += r.ln();
                quad_r += vi * vi / r;
            }
            // C = Z' R^-1 Z, b = Z' R^-1 v
            let c = zs.transpose() * &zs;
            let b = zs.transpose() * &weighted_v;
            let l = psd_factor(&p_pred);
            let lt = l.transpose();
            let mut s = &lt * &c * &l;
            for d in 0..k_dim {
                s[(d, d)] += 1.0;
            }
            symmetrize(&mut s);
            let chol = s
                .cholesky()
                .ok_or_else(|| Error::Singular(format!("innovation covariance at t = {t}")))?;
            let lb = &lt * &b;
            let y = chol.solve(&lb);
            let a_filt = &a_pred + &l * &y;
            let l_s = chol.l();
            let yy = l_s
                .solve_lower_triangular(&lt)
                .ok_or_else(|| Error::Singular(format!("filter update at t = {t}")))?;
            let mut p_filt = yy.transpose() * &yy;
            symmetrize(&mut p_filt);
            let log_det_s: f64 = 2.0 * l_s.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let quad = quad_r - lb.dot(&y);
            let ll = -0.5 * (n_o as f64 * LN_2PI + log_r + log_det_s + quad);
            if !ll.is_finite() || a_filt.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("filter output at t = {t}")));
            }
            (a_filt, p_filt, v, ll)
        };

        out.predicted_mean.push(a_pred);
        out.predicted_cov.push(p_pred);
        out.filtered_mean.push(a_filt.clone());
        out.filtered_cov.push(p_filt.clone());
        out.innovations.push(innov);
        out.observed_rows.push(rows);
        out.loglik_terms.push(ll);
        out.loglik += ll;
        a = a_filt;
        p = p_filt;
    }
    Ok(out)
}

/// Smoothed moments. `mean`/`cov` are indexed by `t = 0..=T` (index 0 is the
/// initial state); `lag_one_cov[t - 1]` holds `P_{t,t-1|T}` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
    pub lag_one_cov: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

impl SmootherOutput {
    pub fn t_len(&self) -> usize {
        self.mean.len() - 1
    }

    /// `E[s_t s_t' | X] = s_{t|T} s_{t|T}' + P_{t|T}`.
    pub fn second_moment(&self, t: usize) -> DMatrix<f64> {
        &self.mean[t] * self.mean[t].transpose() + &self.cov[t]
    }

    /// `E[s_t s_{t-1}' | X]` for `t >= 1`.
    pub fn cross_moment(&self, t: usize) -> DMatrix<f64> {
        &self.mean[t] * self.mean[t - 1].transpose() + &self.lag_one_cov[t - 1]
    }

    /// Factor-companion block of `P_{t|T}`.
    pub fn factor_cov(&self, layout: &StateLayout, t: usize) -> DMatrix<f64> {
        let d = layout.factor_dim;
        self.cov[t].view((0, 0), (d, d)).into_owned()
    }

    /// Factor-companion block of `P_{t,t-1|T}`.
    pub fn factor_lag_cov(&self, layout: &StateLayout, t: usize) -> DMatrix<f64> {
        let d = layout.factor_dim;
        self.lag_one_cov[t - 1].view((0, 0), (d, d)).into_owned()
    }

    /// Smoothed `f_t`, the first `q` state coordinates.
    pub fn factors(&self, layout: &StateLayout, t: usize) -> DVector<f64> {
        self.mean[t].rows(0, layout.q).into_owned()
    }

    /// `(s_{t|T}[k], P_{t|T}[k,k], P_{t,t-1|T}[k,k])` for a scalar state such
    /// as `xi_i`, `alpha_i` or `beta_i` (the diagonal P-blocks).
    pub fn scalar_state(&self, k: usize, t: usize) -> (f64, f64, f64) {
        let lag = if t >= 1 {
            self.lag_one_cov[t - 1][(k, k)]
        } else {
            f64::NAN
        };
        (self.mean[t][k], self.cov[t][(k, k)], lag)
    }

    /// Smoothed `w_it` and its variance `P^w`.
    pub fn w(&self, layout: &StateLayout, i: usize, t: usize) -> (f64, f64) {
        let sel = layout.w_selector(i, t);
        let mean = sel.iter().map(|&(k, w)| w * self.mean[t][k]).sum();
        let mut var = 0.0;
        for &(k, wk) in &sel {
            for &(l, wl) in &sel {
                var += wk * wl * self.cov[t][(k, l)];
            }
        }
        (mean, var)
    }
}

/// Rauch-Tung-Striebel fixed-interval smoother with lag-one covariances
/// `P_{t,t-1|T} = P_{t|T} J_{t-1}'`, smoothing back to the initial state.
pub fn ks_smooth<M: StateSpaceModel>(filter: &FilterOutput, model: &M) -> Result<SmootherOutput> {
    let t_len = filter.t_len();
    let k_dim = model.state_dim();
    let theta = model.transition();
    let mut mean = vec![DVector::zeros(k_dim); t_len + 1];
    let mut cov = vec![DMatrix::zeros(k_dim, k_dim); t_len + 1];
    let mut lag_one_cov = vec![DMatrix::zeros(k_dim, k_dim); t_len];
    if t_len == 0 {
        mean[0] = filter.init_mean.clone();
        cov[0] = filter.init_cov.clone();
        return Ok(SmootherOutput {
            mean,
            cov,
            lag_one_cov,
            loglik: filter.loglik,
        });
    }
    mean[t_len] = filter.filtered_mean[t_len - 1].clone();
    cov[t_len] = filter.filtered_cov[t_len - 1].clone();
    for t in (0..t_len).rev() {
        let (a_tt, p_tt) = if t == 0 {
            (&filter.init_mean, &filter.init_cov)
        } else {
            (&filter.filtered_mean[t - 1], &filter.filtered_cov[t - 1])
        };
        let p_next_pred = &filter.predicted_cov[t];
        let a_next_pred = &filter.predicted_mean[t];
        // J_t = P_{t|t} Theta' P_{t+1|t}^{-1}
        let j = spd_solve(p_next_pred, &(theta * p_tt)).transpose();
        let m = a_tt + &j * (&mean[t + 1] - a_next_pred);
        let mut c = p_tt + &j * (&cov[t + 1] - p_next_pred) * j.transpose();
        symmetrize(&mut c);
        lag_one_cov[t] = &cov[t + 1] * j.transpose();
        if m.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("smoother output at t = {t}")));
        }
        mean[t] = m;
        cov[t] = c;
    }
    Ok(SmootherOutput {
        mean,
        cov,
        lag_one_cov,
        loglik: filter.loglik,
    })
}

/// Per-period covariance traces of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProfile {
    pub n: usize,
    pub q: usize,
    pub init_trace: f64,
    /// `tr(P_{t|t-1})` for `t = 1..=horizon`.
    pub predicted: Vec<f64>,
    pub filtered: Vec<f64>,
    pub smoothed: Vec<f64>,
}

impl TraceProfile {
    pub fn predicted_per_factor(&self) -> Vec<f64> {
        self.predicted.iter().map(|v| v / self.q as f64).collect()
    }
    pub fn filtered_per_factor(&self) -> Vec<f64> {
        self.filtered.iter().map(|v| v / self.q as f64).collect()
    }
    pub fn smoothed_per_factor(&self) -> Vec<f64> {
        self.smoothed.iter().map(|v| v / self.q as f64).collect()
    }
    /// `tr(P_{t|t}) n / q`.
    pub fn filtered_scaled(&self) -> Vec<f64> {
        self.filtered
            .iter()
            .map(|v| v * self.n as f64 / self.q as f64)
            .collect()
    }
    /// `tr(P_{t|T}) n / q`.
    pub fn smoothed_scaled(&self) -> Vec<f64> {
        self.smoothed
            .iter()
            .map(|v| v * self.n as f64 / self.q as f64)
            .collect()
    }
    pub fn steady_state_period(&self, tol: f64) -> Option<usize> {
        first_steady_period(&self.predicted, tol)
    }
}

/// First one-based `t` such that `|v_{t+1} - v_t| <= tol * |v_t|`, i.e. the
/// period from which the sequence no longer moves at relative precision `tol`.
pub fn first_steady_period(values: &[f64], tol: f64) -> Option<usize> {
    values
        .windows(2)
        .position(|w| (w[1] - w[0]).abs() <= tol * w[0].abs().max(f64::MIN_POSITIVE))
        .map(|k| k + 1)
}

/// Filter and smoother covariance traces over `block` for a fully observed
/// sample of length `t_len`; covariances do not depend on the data values.
pub fn trace_profile<M: StateSpaceModel>(
    model: &M,
    init_cov: &DMatrix<f64>,
    t_len: usize,
    horizon: usize,
    block: Range<usize>,
    q: usize,
) -> Result<TraceProfile> {
    let n = model.obs_dim();
    let k_dim = model.state_dim();
    let panel = Panel::complete(DMatrix::zeros(n, t_len))?;
    let f = kf_filter(model, &panel, &DVector::zeros(k_dim), init_cov)?;
    let s = ks_smooth(&f, model)?;
    let horizon = horizon.min(t_len);
    let block_trace = |p: &DMatrix<f64>| {
        let len = block.end - block.start;
        trace(&p.view((block.start, block.start), (len, len)).into_owned())
    };
    Ok(TraceProfile {
        n,
        q,
        init_trace: block_trace(init_cov),
        predicted: (0..horizon)
            .map(|k| block_trace(&f.predicted_cov[k]))
            .collect(),
        filtered: (0..horizon)
            .map(|k| block_trace(&f.filtered_cov[k]))
            .collect(),
        smoothed: (1..=horizon).map(|t| block_trace(&s.cov[t])).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn local_level() -> LinearGaussian {
        LinearGaussian {
            transition: dmatrix![1.0],
            state_cov: dmatrix![1.0],
            measurement: dmatrix![1.0],
            measurement_var: DVector::from_element(1, 1.0),
        }
    }

    #[test]
    fn local_level_reaches_riccati_fixed_point() {
        let m = local_level();
        let panel = Panel::complete(DMatrix::from_fn(1, 60, |_, t| (t as f64).sin())).unwrap();
        let f = kf_filter(&m, &panel, &DVector::zeros(1), &dmatrix![DEFAULT_KAPPA]).unwrap();
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        assert!((f.predicted_cov[59][(0, 0)] - golden).abs() < 1e-10);
    }

    #[test]
    fn missing_period_is_prediction_only() {
        let m = local_level();
        let mut data = DMatrix::from_fn(1, 5, |_, t| t as f64);
        data[(0, 2)] = f64::NAN;
        let panel = Panel::from_nan(data);
        let f = kf_filter(&m, &panel, &DVector::zeros(1), &dmatrix![10.0]).unwrap();
        assert_eq!(f.filtered_mean[2], f.predicted_mean[2]);
        assert_eq!(f.filtered_cov[2], f.predicted_cov[2]);
        assert_eq!(f.loglik_terms[2], 0.0);
    }

    #[test]
    fn single_period_smoother_equals_filter() {
        let m = local_level();
        let panel = Panel::complete(dmatrix![0.7]).unwrap();
        let f = kf_filter(&m, &panel, &DVector::zeros(1), &dmatrix![2.0]).unwrap();
        let s = ks_smooth(&f, &m).unwrap();
        assert_eq!(s.mean[1], f.filtered_mean[0]);
        assert_eq!(s.cov[1], f.filtered_cov[0]);
    }

    #[test]
    fn zero_measurement_variance_is_reported() {
        let mut m = local_level();
        m.measurement_var[0] = 0.0;
        let panel = Panel::complete(dmatrix![0.7]).unwrap();
        let err = kf_filter(&m, &panel, &DVector::zeros(1), &dmatrix![2.0]).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }

    #[test]
    fn burn_in_drops_leading_terms() {
        let m = local_level();
        let panel = Panel::complete(DMatrix::from_fn(1, 6, |_, t| t as f64 * 0.3)).unwrap();
        let f = kf_filter(&m, &panel, &DVector::zeros(1), &dmatrix![2.0]).unwrap();
        let tail: f64 = f.loglik_terms[2..].iter().sum();
        assert!((f.loglik_after(2) - tail).abs() < 1e-14);
        assert!((f.loglik_after(0) - f.loglik).abs() < 1e-12);
    }

    #[test]
    fn steady_period_detection() {
        assert_eq!(
            first_steady_period(&[3.0, 2.0, 1.5, 1.5, 1.5], 1e-6),
            Some(3)
        );
        assert_eq!(first_steady_period(&[3.0, 2.0, 1.0], 1e-6), None);
    }
}
