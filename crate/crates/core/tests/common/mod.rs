//! Shared helpers for the integration tests: a brute-force joint-Gaussian
//! oracle for the smoother and random small state-space instances.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nsdfm::kalman::{LinearGaussian, StateSpaceModel};
use nsdfm::model::{build_state_space, initial_state_mean, StateSpace};
use nsdfm::{ModelSpec, Panel, Params};

/// Conditional moments of `(s_0, ..., s_T)` given the observed cells,
/// computed from the joint Gaussian distribution of states and data.
pub struct Oracle {
    pub loglik: f64,
    /// `E[s_t | X]`, t = 0..=T.
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
    /// `Cov(s_t, s_{t-1} | X)` at index `t - 1`.
    pub lag_one: Vec<DMatrix<f64>>,
}

pub fn oracle<M: StateSpaceModel>(
    model: &M,
    panel: &Panel,
    m0: &DVector<f64>,
    p0: &DMatrix<f64>,
) -> Oracle {
    let k = model.state_dim();
    let t_len = panel.t_len();
    let theta = model.transition();
    let q = model.state_cov();
    let dim = k * (t_len + 1);

    // Unconditional moments of the stacked states.
    let mut mu_s = DVector::zeros(dim);
    let mut sig_s = DMatrix::zeros(dim, dim);
    let mut m = m0.clone();
    let mut var = vec![p0.clone()];
    mu_s.rows_mut(0, k).copy_from(&m);
    for t in 1..=t_len {
        m = theta * &m;
        mu_s.rows_mut(t * k, k).copy_from(&m);
        let v = theta * &var[t - 1] * theta.transpose() + q;
        var.push(v);
    }
    for t in 0..=t_len {
        let mut c = var[t].clone();
        for u in t..=t_len {
            // Cov(s_u, s_t) = Theta^{u-t} Var(s_t)
            sig_s.view_mut((u * k, t * k), (k, k)).copy_from(&c);
            sig_s
                .view_mut((t * k, u * k), (k, k))
                .copy_from(&c.transpose());
            c = theta * &c;
        }
    }

    // Observed cells as a linear map of the stacked states plus noise.
    let mut cells = Vec::new();
    for t in 1..=t_len {
        for i in 0..panel.n() {
            if panel.observed[(i, t - 1)] {
                cells.push((i, t));
            }
        }
    }
    let nobs = cells.len();
    let mut h = DMatrix::zeros(nobs, dim);
    let mut x = DVector::zeros(nobs);
    let mut r = DMatrix::zeros(nobs, nobs);
    for (row, &(i, t)) in cells.iter().enumerate() {
        let z = model.measurement(t);
        for j in 0..k {
            h[(row, t * k + j)] = z[(i, j)];
        }
        x[row] = panel.data[(i, t - 1)];
        r[(row, row)] = model.measurement_var()[i];
    }
    let mu_x = &h * &mu_s;
    let sig_sx = &sig_s * h.transpose();
    let mut sig_xx = &h * &sig_sx + r;
    sig_xx = (&sig_xx + sig_xx.transpose()) * 0.5;
    let chol = sig_xx
        .clone()
        .cholesky()
        .expect("observation covariance is PD");
    let resid = &x - &mu_x;
    let alpha = chol.solve(&resid);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let loglik =
        -0.5 * (nobs as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + resid.dot(&alpha));

    let post_mean = &mu_s + &sig_sx * alpha;
    let post_cov = &sig_s - &sig_sx * chol.solve(&sig_sx.transpose());
    let mean = (0..=t_len)
        .map(|t| post_mean.rows(t * k, k).into_owned())
        .collect();
    let cov = (0..=t_len)
        .map(|t| post_cov.view((t * k, t * k), (k, k)).into_owned())
        .collect();
    let lag_one = (1..=t_len)
        .map(|t| post_cov.view((t * k, (t - 1) * k), (k, k)).into_owned())
        .collect();
    Oracle {
        loglik,
        mean,
        cov,
        lag_one,
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `A A' / c + eps I`, a random positive definite matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, k: usize, eps: f64) -> DMatrix<f64> {
    let a = gaussian(rng, k, k);
    &a * a.transpose() / k as f64 + DMatrix::identity(k, k) * eps
}

/// Largest elementwise gap relative to the scale of `b`.
pub fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn rel_gap_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn random_mask(rng: &mut ChaCha8Rng, n: usize, t_len: usize, p_missing: f64) -> DMatrix<bool> {
    DMatrix::from_fn(n, t_len, |_, _| rng.random::<f64>() >= p_missing)
}

/// Random time-invariant system with state-dim x T at most 30.
pub fn random_linear_instance(seed: u64) -> (LinearGaussian, Panel, DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let t_len = rng.random_range(1..=30 / k);
    let n = rng.random_range(1..=4);
    let raw = gaussian(&mut rng, k, k);
    let transition = &raw * (0.9 / nsdfm::linalg::spectral_radius(&raw).max(1e-3));
    let lg = LinearGaussian {
        transition,
        state_cov: random_spd(&mut rng, k, 0.1),
        measurement: gaussian(&mut rng, n, k),
        measurement_var: DVector::from_fn(n, |_, _| 0.2 + rng.random::<f64>()),
    };
    let mask = random_mask(&mut rng, n, t_len, 0.15);
    let panel = Panel::new(gaussian(&mut rng, n, t_len), mask).unwrap();
    let m0 = DVector::from_fn(k, |_, _| rng.sample(StandardNormal));
    let p0 = random_spd(&mut rng, k, 0.5);
    (lg, panel, m0, p0)
}

/// Random instance of the factor model itself (companion, random-walk
/// idiosyncratic, level and slope states) with state-dim x T at most 30.
pub fn random_model_instance(seed: u64) -> (StateSpace, Panel, DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let q = 1;
        let s = rng.random_range(0..=1);
        let p = rng.random_range(1..=2);
        let n = rng.random_range(2..=4);
        let pick = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..n).filter(|_| rng.random::<f64>() < 0.3).collect()
        };
        let i1 = pick(&mut rng);
        let level = pick(&mut rng);
        let trend = pick(&mut rng);
        let k = q * (s + 1).max(p) + i1.len() + level.len() + trend.len();
        if k > 6 {
            continue;
        }
        let t_len = rng.random_range(2..=30 / k);
        let spec = ModelSpec::new(n, t_len, q, s, p, &i1, &level, &trend).unwrap();
        let mut params = Params::zeros(&spec);
        for b in params.loadings.iter_mut() {
            *b = gaussian(&mut rng, n, q);
        }
        for a in params.var_coeffs.iter_mut() {
            *a = DMatrix::from_element(q, q, rng.random_range(-0.6..0.6) / p as f64);
        }
        params.gamma_u = random_spd(&mut rng, q, 0.2);
        for i in 0..n {
            params.gamma_e_diag[i] = 0.2 + rng.random::<f64>();
            if spec.in_level(i) {
                params.sigma2_omega[i] = 0.05 + 0.1 * rng.random::<f64>();
            }
            if spec.in_trend(i) {
                params.sigma2_eta[i] = 0.01 + 0.01 * rng.random::<f64>();
                params.beta0[i] = rng.sample(StandardNormal);
            }
            if spec.in_im(i) {
                params.sigma2_nu[i] = 0.1 + 0.1 * rng.random::<f64>();
            }
        }
        let ss = build_state_space(&spec, &params).unwrap();
        let mask = random_mask(&mut rng, n, t_len, 0.1);
        let panel = Panel::new(gaussian(&mut rng, n, t_len), mask).unwrap();
        let m0 = initial_state_mean(&spec, &params);
        let p0 = random_spd(&mut rng, k, 0.5);
        return (ss, panel, m0, p0);
    }
}

/// One period of a system restricted to the observed rows of that period.
struct Deleted<'a, M: StateSpaceModel> {
    inner: &'a M,
    rows: Vec<usize>,
    t: usize,
    z: DMatrix<f64>,
    r: DVector<f64>,
}

impl<'a, M: StateSpaceModel> Deleted<'a, M> {
    fn new(inner: &'a M, rows: Vec<usize>, t: usize) -> Self {
        let z = inner.measurement(t).select_rows(rows.iter());
        let r =
            DVector::from_iterator(rows.len(), rows.iter().map(|&i| inner.measurement_var()[i]));
        Deleted {
            inner,
            rows,
            t,
            z,
            r,
        }
    }
}

impl<M: StateSpaceModel> StateSpaceModel for Deleted<'_, M> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn obs_dim(&self) -> usize {
        self.rows.len()
    }
    fn transition(&self) -> &DMatrix<f64> {
        self.inner.transition()
    }
    fn state_cov(&self) -> &DMatrix<f64> {
        self.inner.state_cov()
    }
    fn measurement(&self, _t: usize) -> DMatrix<f64> {
        let _ = self.t;
        self.z.clone()
    }
    fn measurement_var(&self) -> &DVector<f64> {
        &self.r
    }
}

/// Filter run period by period on systems with the missing rows deleted.
/// Returns the filtered means, covariances and the total log-likelihood.
/// Every period needs at least one observed cell.
pub fn filter_by_deletion<M: StateSpaceModel>(
    model: &M,
    panel: &Panel,
    m0: &DVector<f64>,
    p0: &DMatrix<f64>,
) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>, f64) {
    let mut mean = m0.clone();
    let mut cov = p0.clone();
    let mut means = Vec::new();
    let mut covs = Vec::new();
    let mut loglik = 0.0;
    for t in 1..=panel.t_len() {
        let rows = panel.observed_rows(t - 1);
        assert!(!rows.is_empty(), "period {t} has no observations");
        let data = DMatrix::from_fn(rows.len(), 1, |k, _| panel.data[(rows[k], t - 1)]);
        let sub = Deleted::new(model, rows, t);
        let out =
            nsdfm::kalman::kf_filter(&sub, &Panel::complete(data).unwrap(), &mean, &cov).unwrap();
        mean = out.filtered_mean[0].clone();
        cov = out.filtered_cov[0].clone();
        loglik += out.loglik;
        means.push(mean.clone());
        covs.push(cov.clone());
    }
    (means, covs, loglik)
}

/// Masks each cell with probability `p`, keeping one cell per period.
pub fn mask_cells(panel: &Panel, p: f64, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = panel.observed.clone();
    for t in 0..panel.t_len() {
        for i in 0..panel.n() {
            if rng.random::<f64>() < p {
                observed[(i, t)] = false;
            }
        }
        if (0..panel.n()).all(|i| !observed[(i, t)]) {
            observed[(0, t)] = true;
        }
    }
    let mut data = panel.data.clone();
    for (v, &o) in data.iter_mut().zip(observed.iter()) {
        if !o {
            // Masked values must never be read.
            *v = f64::NAN;
        }
    }
    Panel::new(data, observed).unwrap()
}
