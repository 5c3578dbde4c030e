//! Domain types and assembly of the compact state-space form.
//!
//! State ordering is `[factor companion | xi (I1) | alpha (Ia) | beta (Ib)]`.
//! The factor block holds `f_t, f_{t-1}, ..., f_{t-L+1}` with
//! `L = max(s+1, p)` so a single companion carries both the loading lags and
//! the VAR lags. Series indices are zero-based throughout the library.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dimensions and index sets of a non-stationary dynamic factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n: usize,
    pub t_len: usize,
    pub q: usize,
    /// Loading lag order.
    pub s: usize,
    /// Factor VAR order.
    pub p: usize,
    /// Series whose idiosyncratic component is a random walk (I1).
    pub idio_i1: Vec<usize>,
    /// Series with a random-walk intercept (Ia).
    pub local_level: Vec<usize>,
    /// Series with a random-walk slope (Ib).
    pub local_trend: Vec<usize>,
}

fn normalize_set(name: &str, set: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidSpec(format!(
            "{name} contains series index {bad} but n = {n}"
        )));
    }
    Ok(v)
}

impl ModelSpec {
    pub fn new(
        n: usize,
        t_len: usize,
        q: usize,
        s: usize,
        p: usize,
        idio_i1: &[usize],
        local_level: &[usize],
        local_trend: &[usize],
    ) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidSpec("q must be at least 1".into()));
        }
        if q >= n {
            return Err(Error::InvalidSpec(format!(
                "q = {q} must be smaller than n = {n}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidSpec("VAR order p must be at least 1".into()));
        }
        if t_len < 2 {
            return Err(Error::InvalidSpec("need at least two time periods".into()));
        }
        Ok(ModelSpec {
            n,
            t_len,
            q,
            s,
            p,
            idio_i1: normalize_set("idio_i1", idio_i1, n)?,
            local_level: normalize_set("local_level", local_level, n)?,
            local_trend: normalize_set("local_trend", local_trend, n)?,
        })
    }

    /// Stationary-idiosyncratic model with no extra latent states.
    pub fn basic(n: usize, t_len: usize, q: usize, s: usize, p: usize) -> Result<Self> {
        Self::new(n, t_len, q, s, p, &[], &[], &[])
    }

    pub fn in_i1(&self, i: usize) -> bool {
        self.idio_i1.binary_search(&i).is_ok()
    }

    pub fn in_level(&self, i: usize) -> bool {
        self.local_level.binary_search(&i).is_ok()
    }

    pub fn in_trend(&self, i: usize) -> bool {
        self.local_trend.binary_search(&i).is_ok()
    }

    /// Membership of `I_m = I1 ∪ Ia ∪ Ib`.
    pub fn in_im(&self, i: usize) -> bool {
        self.in_i1(i) || self.in_level(i) || self.in_trend(i)
    }

    /// Number of additional latent states `n1 + na + nb`.
    pub fn extra_states(&self) -> usize {
        self.idio_i1.len() + self.local_level.len() + self.local_trend.len()
    }

    pub fn factor_lags(&self) -> usize {
        (self.s + 1).max(self.p)
    }

    pub fn factor_dim(&self) -> usize {
        self.q * self.factor_lags()
    }

    /// Width of the loading row `(b_{i0}', ..., b_{is}')'`.
    pub fn loading_dim(&self) -> usize {
        self.q * (self.s + 1)
    }

    pub fn state_dim(&self) -> usize {
        self.factor_dim() + self.extra_states()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self)
    }
}

/// What a single state coordinate represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateRole {
    /// Factor `factor` at lag `lag` (`f_{t-lag}`).
    Factor {
        lag: usize,
        factor: usize,
    },
    Xi(usize),
    Alpha(usize),
    Beta(usize),
}

/// Maps state coordinates to model components.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub q: usize,
    pub lags: usize,
    pub factor_dim: usize,
    pub xi_offset: usize,
    pub alpha_offset: usize,
    pub beta_offset: usize,
    pub state_dim: usize,
    xi_pos: Vec<Option<usize>>,
    alpha_pos: Vec<Option<usize>>,
    beta_pos: Vec<Option<usize>>,
    roles: Vec<StateRole>,
}

impl StateLayout {
    fn new(spec: &ModelSpec) -> Self {
        let q = spec.q;
        let lags = spec.factor_lags();
        let factor_dim = q * lags;
        let xi_offset = factor_dim;
        let alpha_offset = xi_offset + spec.idio_i1.len();
        let beta_offset = alpha_offset + spec.local_level.len();
        let state_dim = beta_offset + spec.local_trend.len();
        let mut roles = Vec::with_capacity(state_dim);
        for lag in 0..lags {
            for factor in 0..q {
                roles.push(StateRole::Factor { lag, factor });
            }
        }
        let mut xi_pos = vec![None; spec.n];
        let mut alpha_pos = vec![None; spec.n];
        let mut beta_pos = vec![None; spec.n];
        for (k, &i) in spec.idio_i1.iter().enumerate() {
            xi_pos[i] = Some(xi_offset + k);
            roles.push(StateRole::Xi(i));
        }
        for (k, &i) in spec.local_level.iter().enumerate() {
            alpha_pos[i] = Some(alpha_offset + k);
            roles.push(StateRole::Alpha(i));
        }
        for (k, &i) in spec.local_trend.iter().enumerate() {
            beta_pos[i] = Some(beta_offset + k);
            roles.push(StateRole::Beta(i));
        }
        StateLayout {
            q,
            lags,
            factor_dim,
            xi_offset,
            alpha_offset,
            beta_offset,
            state_dim,
            xi_pos,
            alpha_pos,
            beta_pos,
            roles,
        }
    }

    pub fn role(&self, k: usize) -> StateRole {
        self.roles[k]
    }

    pub fn xi(&self, i: usize) -> Option<usize> {
        self.xi_pos[i]
    }

    pub fn alpha(&self, i: usize) -> Option<usize> {
        self.alpha_pos[i]
    }

    pub fn beta(&self, i: usize) -> Option<usize> {
        self.beta_pos[i]
    }

    /// Sparse selector of `w_it = xi_it + alpha_it + beta_it * t` as
    /// `(state index, weight)` pairs; empty for series outside `I_m`.
    pub fn w_selector(&self, i: usize, t: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(3);
        if let Some(k) = self.xi_pos[i] {
            out.push((k, 1.0));
        }
        if let Some(k) = self.alpha_pos[i] {
            out.push((k, 1.0));
        }
        if let Some(k) = self.beta_pos[i] {
            out.push((k, t as f64));
        }
        out
    }

    /// Extra (non-factor) state indices.
    pub fn extra_range(&self) -> std::ops::Range<usize> {
        self.factor_dim..self.state_dim
    }
}

/// Full parameter vector of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `B_0, ..., B_s`, each n x q.
    pub loadings: Vec<DMatrix<f64>>,
    /// `A_1, ..., A_p`, each q x q.
    pub var_coeffs: Vec<DMatrix<f64>>,
    pub gamma_u: DMatrix<f64>,
    /// Diagonal of the idiosyncratic innovation covariance.
    pub gamma_e_diag: DVector<f64>,
    /// AR root of the idiosyncratic component: 1 on I1, 0 elsewhere.
    pub rho: DVector<f64>,
    pub sigma2_omega: DVector<f64>,
    pub sigma2_eta: DVector<f64>,
    /// Measurement-error variance on I_m, zero elsewhere.
    pub sigma2_nu: DVector<f64>,
    pub alpha0: DVector<f64>,
    pub beta0: DVector<f64>,
}

impl Params {
    /// Parameters with every structural zero in place and unit variances.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let n = spec.n;
        let q = spec.q;
        let mut rho = DVector::zeros(n);
        let mut sigma2_omega = DVector::zeros(n);
        let mut sigma2_eta = DVector::zeros(n);
        let mut sigma2_nu = DVector::zeros(n);
        for i in 0..n {
            if spec.in_i1(i) {
                rho[i] = 1.0;
            }
            if spec.in_level(i) {
                sigma2_omega[i] = 1e-2;
            }
            if spec.in_trend(i) {
                sigma2_eta[i] = 1e-2;
            }
            if spec.in_im(i) {
                sigma2_nu[i] = 1e-5;
            }
        }
        Params {
            loadings: vec![DMatrix::zeros(n, q); spec.s + 1],
            var_coeffs: vec![DMatrix::zeros(q, q); spec.p],
            gamma_u: DMatrix::identity(q, q),
            gamma_e_diag: DVector::from_element(n, 1.0),
            rho,
            sigma2_omega,
            sigma2_eta,
            sigma2_nu,
            alpha0: DVector::zeros(n),
            beta0: DVector::zeros(n),
        }
    }

    /// `Lambda = (B_0 ... B_s)`, n x q(s+1).
    pub fn stacked_loadings(&self) -> DMatrix<f64> {
        let n = self.loadings[0].nrows();
        let q = self.loadings[0].ncols();
        let mut out = DMatrix::zeros(n, q * self.loadings.len());
        for (k, b) in self.loadings.iter().enumerate() {
            out.view_mut((0, k * q), (n, q)).copy_from(b);
        }
        out
    }

    pub fn set_loading_row(&mut self, i: usize, lambda: &DVector<f64>) {
        let q = self.loadings[0].ncols();
        for (k, b) in self.loadings.iter_mut().enumerate() {
            for j in 0..q {
                b[(i, j)] = lambda[k * q + j];
            }
        }
    }

    /// Measurement-equation variance for series `i`.
    pub fn measurement_var(&self, spec: &ModelSpec, i: usize) -> f64 {
        if spec.in_im(i) {
            self.sigma2_nu[i]
        } else {
            self.gamma_e_diag[i]
        }
    }

    /// Checks dimensions and the structural constraints of the model.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.n;
        let q = spec.q;
        if self.loadings.len() != spec.s + 1 {
            return Err(Error::Dimension(format!(
                "expected {} loading matrices, got {}",
                spec.s + 1,
                self.loadings.len()
            )));
        }
        if self.loadings.iter().any(|b| b.shape() != (n, q)) {
            return Err(Error::Dimension(format!("loadings must be {n} x {q}")));
        }
        if self.var_coeffs.len() != spec.p || self.var_coeffs.iter().any(|a| a.shape() != (q, q)) {
            return Err(Error::Dimension(format!(
                "expected {} VAR matrices of size {q} x {q}",
                spec.p
            )));
        }
        if self.gamma_u.shape() != (q, q) {
            return Err(Error::Dimension("gamma_u must be q x q".into()));
        }
        for (name, v) in [
            ("gamma_e_diag", &self.gamma_e_diag),
            ("rho", &self.rho),
            ("sigma2_omega", &self.sigma2_omega),
            ("sigma2_eta", &self.sigma2_eta),
            ("sigma2_nu", &self.sigma2_nu),
            ("alpha0", &self.alpha0),
            ("beta0", &self.beta0),
        ] {
            if v.len() != n {
                return Err(Error::Dimension(format!("{name} must have length {n}")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.to_string()));
            }
        }
        let asym = (&self.gamma_u - self.gamma_u.transpose()).amax();
        if asym > 1e-10 * self.gamma_u.amax().max(1.0) || self.gamma_u.clone().cholesky().is_none()
        {
            return Err(Error::InvalidParams(
                "gamma_u is not symmetric positive definite".into(),
            ));
        }
        for i in 0..n {
            let i1 = spec.in_i1(i);
            if i1 && self.rho[i] != 1.0 {
                return Err(Error::InvalidParams(format!(
                    "rho[{i}] must be 1 for a series in I1"
                )));
            }
            if !i1 && self.rho[i] != 0.0 {
                return Err(Error::InvalidParams(format!(
                    "rho[{i}] must be 0 outside I1"
                )));
            }
            if spec.in_level(i) != (self.sigma2_omega[i] > 0.0) || self.sigma2_omega[i] < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "sigma2_omega[{i}] must be positive exactly on Ia"
                )));
            }
            if spec.in_trend(i) != (self.sigma2_eta[i] > 0.0) || self.sigma2_eta[i] < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "sigma2_eta[{i}] must be positive exactly on Ib"
                )));
            }
            if spec.in_im(i) != (self.sigma2_nu[i] > 0.0) || self.sigma2_nu[i] < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "sigma2_nu[{i}] must be positive exactly on I_m"
                )));
            }
            let needs_gamma_e = i1 || !spec.in_im(i);
            if needs_gamma_e && self.gamma_e_diag[i] <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "gamma_e_diag[{i}] must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Companion matrix of the factor VAR with `lags` blocks.
    pub fn companion(&self, lags: usize) -> DMatrix<f64> {
        let q = self.gamma_u.nrows();
        let dim = q * lags;
        let mut a = DMatrix::zeros(dim, dim);
        for (k, ak) in self.var_coeffs.iter().enumerate() {
            a.view_mut((0, k * q), (q, q)).copy_from(ak);
        }
        for j in 1..lags {
            for d in 0..q {
                a[(j * q + d, (j - 1) * q + d)] = 1.0;
            }
        }
        a
    }
}

/// Assembled measurement and transition system.
///
/// The measurement matrix depends on `t` only through the trend-slope
/// loadings; it is built on demand by [`StateSpace::measurement_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub layout: StateLayout,
    pub transition: DMatrix<f64>,
    pub state_cov: DMatrix<f64>,
    /// Factor part of the measurement map, n x q(s+1).
    pub loadings: DMatrix<f64>,
    pub measurement_cov_diag: DVector<f64>,
}

impl StateSpace {
    pub fn state_dim(&self) -> usize {
        self.layout.state_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.loadings.nrows()
    }

    /// Measurement map at the one-based time index `t`.
    pub fn measurement_map(&self, t: usize) -> DMatrix<f64> {
        let n = self.obs_dim();
        let mut z = DMatrix::zeros(n, self.state_dim());
        z.view_mut((0, 0), (n, self.loadings.ncols()))
            .copy_from(&self.loadings);
        for i in 0..n {
            for (k, w) in self.layout.w_selector(i, t) {
                z[(i, k)] = w;
            }
        }
        z
    }
}

/// Builds the state-space system for `params`.
pub fn build_state_space(spec: &ModelSpec, params: &Params) -> Result<StateSpace> {
    params.validate(spec)?;
    let layout = spec.layout();
    let k_dim = layout.state_dim;
    let q = spec.q;
    let mut transition = DMatrix::zeros(k_dim, k_dim);
    transition
        .view_mut((0, 0), (layout.factor_dim, layout.factor_dim))
        .copy_from(&params.companion(layout.lags));
    let mut state_cov = DMatrix::zeros(k_dim, k_dim);
    state_cov
        .view_mut((0, 0), (q, q))
        .copy_from(&params.gamma_u);
    for i in 0..spec.n {
        if let Some(k) = layout.xi(i) {
            transition[(k, k)] = params.rho[i];
            state_cov[(k, k)] = params.gamma_e_diag[i];
        }
        if let Some(k) = layout.alpha(i) {
            transition[(k, k)] = 1.0;
            state_cov[(k, k)] = params.sigma2_omega[i];
        }
        if let Some(k) = layout.beta(i) {
            transition[(k, k)] = 1.0;
            state_cov[(k, k)] = params.sigma2_eta[i];
        }
    }
    let measurement_cov_diag =
        DVector::from_iterator(spec.n, (0..spec.n).map(|i| params.measurement_var(spec, i)));
    Ok(StateSpace {
        layout,
        transition,
        state_cov,
        loadings: params.stacked_loadings(),
        measurement_cov_diag,
    })
}

/// Mean of the initial state implied by `params`: zero factors and
/// idiosyncratic states, `alpha_{i0}` and `beta_{i0}` on the level/slope states.
pub fn initial_state_mean(spec: &ModelSpec, params: &Params) -> DVector<f64> {
    let layout = spec.layout();
    let mut m = DVector::zeros(layout.state_dim);
    for i in 0..spec.n {
        if let Some(k) = layout.alpha(i) {
            m[k] = params.alpha0[i];
        }
        if let Some(k) = layout.beta(i) {
            m[k] = params.beta0[i];
        }
    }
    m
}

/// `chi_it = sum_k b_{ik}' f_{t-k}` from a q x T factor path.
///
/// `t` is one-based and must satisfy `t >= s+1` so every lag exists.
pub fn common_component(
    loadings: &[DMatrix<f64>],
    factors: &DMatrix<f64>,
    t: usize,
    i: usize,
) -> Result<f64> {
    let s = loadings.len().saturating_sub(1);
    if loadings.is_empty() {
        return Err(Error::Dimension("no loading matrices".into()));
    }
    if t < s + 1 || t > factors.ncols() {
        return Err(Error::Dimension(format!(
            "time index {t} outside {}..={}",
            s + 1,
            factors.ncols()
        )));
    }
    if i >= loadings[0].nrows() {
        return Err(Error::Dimension(format!("series index {i} out of range")));
    }
    let mut acc = 0.0;
    for (k, b) in loadings.iter().enumerate() {
        let col = t - 1 - k;
        for j in 0..b.ncols() {
            acc += b[(i, j)] * factors[(j, col)];
        }
    }
    Ok(acc)
}

/// Observation panel with a mask (`true` = observed).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    /// n x T observations; masked cells hold arbitrary values.
    pub data: DMatrix<f64>,
    pub observed: DMatrix<bool>,
}

impl Panel {
    pub fn new(data: DMatrix<f64>, observed: DMatrix<bool>) -> Result<Self> {
        if data.shape() != observed.shape() {
            return Err(Error::Dimension("data and mask shapes differ".into()));
        }
        for ((r, c), v) in data
            .iter()
            .enumerate()
            .map(|(k, v)| ((k % data.nrows(), k / data.nrows()), v))
        {
            if observed[(r, c)] && !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "panel cell (series {r}, t {})",
                    c + 1
                )));
            }
        }
        Ok(Panel { data, observed })
    }

    pub fn complete(data: DMatrix<f64>) -> Result<Self> {
        let observed = DMatrix::from_element(data.nrows(), data.ncols(), true);
        Self::new(data, observed)
    }

    /// Treats every non-finite cell as missing.
    pub fn from_nan(data: DMatrix<f64>) -> Self {
        let observed = data.map(|v| v.is_finite());
        Panel { data, observed }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn t_len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&b| b)
    }

    /// Observed series at zero-based column `col`.
    pub fn observed_rows(&self, col: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.observed[(i, col)]).collect()
    }

    pub fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        if self.n() != spec.n || self.t_len() != spec.t_len {
            return Err(Error::Dimension(format!(
                "panel is {} x {}, model expects {} x {}",
                self.n(),
                self.t_len(),
                spec.n,
                spec.t_len
            )));
        }
        Ok(())
    }

    /// Copy with masked cells set to NaN.
    pub fn to_nan_matrix(&self) -> DMatrix<f64> {
        let mut d = self.data.clone();
        for c in 0..d.ncols() {
            for r in 0..d.nrows() {
                if !self.observed[(r, c)] {
                    d[(r, c)] = f64::NAN;
                }
            }
        }
        d
    }
}
