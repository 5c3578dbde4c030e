//! Monte Carlo data-generating process.
//!
//! Factors follow a VAR(2) with `q - d` unit roots built from
//! `(I - U_1 L) diag((1 - L) I_{q-d}, I_d)`; idiosyncratic components are
//! AR(2) with a unit root on a random subset; a random subset of series gets
//! a deterministic linear trend. Idiosyncratic paths are rescaled so that the
//! common component explains a share `theta / (1 + theta)` of the variance of
//! each differenced series.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::model::{ModelSpec, Panel, Params};

pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationDist {
    Gaussian,
    /// Student t with 4 degrees of freedom, scaled to unit variance.
    StudentT4,
}

impl InnovationDist {
    pub fn name(self) -> &'static str {
        match self {
            InnovationDist::Gaussian => "gaussian",
            InnovationDist::StudentT4 => "student_t4",
        }
    }
}

impl std::str::FromStr for InnovationDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InnovationDist::Gaussian),
            "student_t4" | "t4" => Ok(InnovationDist::StudentT4),
            other => Err(Error::Config(format!(
                "unknown innovation distribution `{other}`"
            ))),
        }
    }
}

/// One Monte Carlo design cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub t_len: usize,
    pub q: usize,
    pub s: usize,
    /// Number of cointegration relations among the factors.
    pub d: usize,
    pub n1: usize,
    pub nb: usize,
    pub tau: f64,
    pub theta: f64,
    pub mu: f64,
    pub dist: InnovationDist,
    /// Overrides the stationary AR root of every idiosyncratic component.
    pub delta: Option<f64>,
    pub burn_in: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n: 100,
            t_len: 100,
            q: 2,
            s: 0,
            d: 1,
            n1: 0,
            nb: 0,
            tau: 0.5,
            theta: 0.5,
            mu: 0.5,
            dist: InnovationDist::Gaussian,
            delta: None,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Factor VAR order of the design.
pub const FACTOR_VAR_ORDER: usize = 2;

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.d == 0 || self.d > self.q {
            return Err(Error::Config(format!(
                "need 0 < d <= q, got d = {}, q = {}",
                self.d, self.q
            )));
        }
        if self.q >= self.n {
            return Err(Error::Config("q must be smaller than n".into()));
        }
        if self.n1 >= self.n || self.nb >= self.n {
            return Err(Error::Config("n1 and nb must be smaller than n".into()));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config("theta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config("tau must lie in [0, 1)".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::Config("mu must lie in (0, 1)".into()));
        }
        if let Some(delta) = self.delta {
            if !(delta.abs() < 1.0) {
                return Err(Error::Config("delta must lie in (-1, 1)".into()));
            }
        }
        if self.t_len < 3 {
            return Err(Error::Config("T must be at least 3".into()));
        }
        Ok(())
    }

    /// Model specification matching the design: true idiosyncratic unit
    /// roots and trend sets, factor VAR order 2.
    pub fn model_spec(&self, sim: &SimulatedPanel) -> Result<ModelSpec> {
        ModelSpec::new(
            self.n,
            self.t_len,
            self.q,
            self.s,
            FACTOR_VAR_ORDER,
            &sim.idio_i1,
            &[],
            &sim.trend_set,
        )
    }
}

/// One simulated panel together with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    /// Observations, n x T.
    pub x: DMatrix<f64>,
    /// Common component.
    pub chi: DMatrix<f64>,
    /// Deterministic trend `beta_i0 t`.
    pub trend: DMatrix<f64>,
    /// Rescaled idiosyncratic component.
    pub xi: DMatrix<f64>,
    /// Factors, q x T.
    pub factors: DMatrix<f64>,
    pub loadings: Vec<DMatrix<f64>>,
    pub var_coeffs: Vec<DMatrix<f64>>,
    pub idio_i1: Vec<usize>,
    pub trend_set: Vec<usize>,
    pub beta0: DVector<f64>,
    pub rho1: DVector<f64>,
    pub rho2: DVector<f64>,
    /// Idiosyncratic innovation variances before rescaling.
    pub innovation_var: DVector<f64>,
    /// Rescaling factor applied to each idiosyncratic path.
    pub xi_scale: DVector<f64>,
}

impl SimulatedPanel {
    pub fn panel(&self) -> Panel {
        Panel {
            observed: DMatrix::from_element(self.x.nrows(), self.x.ncols(), true),
            data: self.x.clone(),
        }
    }

    /// Benchmark target: common component plus deterministic trend.
    pub fn target(&self) -> DMatrix<f64> {
        &self.chi + &self.trend
    }

    /// Parameters of the estimated (white-noise idiosyncratic) model implied
    /// by the design: variances are the population variances of the rescaled
    /// idiosyncratic levels (stationary series) or increments (unit-root
    /// series).
    pub fn true_params(&self, spec: &ModelSpec, phi: f64) -> Result<Params> {
        let q = self.factors.nrows();
        let mut params = Params::zeros(spec);
        params.loadings = self.loadings.clone();
        params.var_coeffs = self.var_coeffs.clone();
        params.gamma_u = DMatrix::identity(q, q);
        for i in 0..spec.n {
            let r2 = self.rho2[i];
            params.gamma_e_diag[i] =
                self.xi_scale[i].powi(2) * self.innovation_var[i] / (1.0 - r2 * r2);
            if spec.in_trend(i) {
                params.sigma2_eta[i] = 1e-12;
                params.beta0[i] = self.beta0[i];
            }
            if spec.in_level(i) {
                params.sigma2_omega[i] = 1e-12;
            }
            if spec.in_im(i) {
                params.sigma2_nu[i] = phi;
            }
        }
        params.validate(spec)?;
        Ok(params)
    }
}

/// Replication generator: stream `replication` of the ChaCha8 generator
/// seeded with `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// `(A_1, A_2)` with `I - A_1 z - A_2 z^2 = (I - U_1 z) diag((1 - z) I_{q-d}, I_d)`.
pub fn gen_factor_var<R: Rng>(
    q: usize,
    d: usize,
    mu: f64,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if d == 0 || d > q {
        return Err(Error::Config(format!(
            "need 0 < d <= q, got d = {d}, q = {q}"
        )));
    }
    let diag = Uniform::new(0.5, 0.8).unwrap();
    let off = Uniform::new(0.0, 0.3).unwrap();
    let raw = DMatrix::from_fn(q, q, |i, j| {
        if i == j {
            diag.sample(rng)
        } else {
            off.sample(rng)
        }
    });
    let u1 = &raw * (mu / spectral_radius(&raw));
    let mut j = DMatrix::zeros(q, q);
    for k in 0..(q - d) {
        j[(k, k)] = 1.0;
    }
    let a1 = &u1 + &j;
    let a2 = -(&u1 * &j);
    Ok((a1, a2))
}

/// `B_0, ..., B_s` with N(1, 1) entries; for `s = 1`, `ceil(n/2)` random
/// entries of each column of `B_1` are zeroed.
pub fn gen_loadings<R: Rng>(n: usize, q: usize, s: usize, rng: &mut R) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(s + 1);
    for k in 0..=s {
        let mut b = DMatrix::from_fn(n, q, |_, _| 1.0 + rng.sample::<f64, _>(StandardNormal));
        if k >= 1 {
            for j in 0..q {
                for i in sample(rng, n, n.div_ceil(2)) {
                    b[(i, j)] = 0.0;
                }
            }
        }
        out.push(b);
    }
    out
}

/// `count` draws from N(0, cov) or the unit-variance multivariate t4 with
/// the same correlation, one draw per column.
pub fn gen_innovations<R: Rng>(
    dim: usize,
    count: usize,
    dist: InnovationDist,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(Error::Dimension("innovation covariance shape".into()));
    }
    let factor = cov.clone().cholesky().map(|c| c.l()).ok_or_else(|| {
        Error::InvalidParams("innovation covariance is not positive definite".into())
    })?;
    let chi2 = ChiSquared::new(4.0).unwrap();
    let mut out = DMatrix::zeros(dim, count);
    let mut z = DVector::zeros(dim);
    for c in 0..count {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut draw = &factor * &z;
        if dist == InnovationDist::StudentT4 {
            let w: f64 = chi2.sample(rng);
            draw *= 1.0 / ((w / 4.0).sqrt() * std::f64::consts::SQRT_2);
        }
        out.set_column(c, &draw);
    }
    Ok(out)
}

/// Idiosyncratic covariance: Toeplitz `tau^|i-j|` when `tau > 0`, otherwise
/// diagonal with U[0.5, 1.5] entries.
pub fn idiosyncratic_cov<R: Rng>(n: usize, tau: f64, rng: &mut R) -> DMatrix<f64> {
    if tau > 0.0 {
        DMatrix::from_fn(n, n, |i, j| tau.powi((i as i32 - j as i32).abs()))
    } else {
        let u = Uniform::new(0.5, 1.5).unwrap();
        DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| u.sample(rng)))
    }
}

fn sorted_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut v = sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

fn diff_var(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let vals: Vec<f64> = row.collect();
    let d: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64
}

/// Factor `c_i` making the sample variance of `Δ(c_i xi_i)` equal to that of
/// `Δchi_i` divided by `theta`.
pub fn variance_share_scale(
    chi: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    theta: f64,
) -> Result<DVector<f64>> {
    let n = chi.nrows();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let vc = diff_var(chi.row(i).iter().copied());
        let vx = diff_var(xi.row(i).iter().copied());
        if !(vc > 0.0) || !(vx > 0.0) {
            return Err(Error::Singular(format!(
                "zero variance of differenced component {i}"
            )));
        }
        out[i] = (vc / (theta * vx)).sqrt();
    }
    Ok(out)
}

/// Draws one panel. All randomness comes from `rng`, in a fixed order.
pub fn simulate<R: Rng>(cfg: &McConfig, rng: &mut R) -> Result<SimulatedPanel> {
    cfg.validate()?;
    let (n, t_len, q, s) = (cfg.n, cfg.t_len, cfg.q, cfg.s);
    let burn = cfg.burn_in;

    let loadings = gen_loadings(n, q, s, rng);
    let (a1, a2) = gen_factor_var(q, cfg.d, cfg.mu, rng)?;

    let idio_i1 = sorted_subset(rng, n, cfg.n1);
    let mut rho1 = DVector::zeros(n);
    for &i in &idio_i1 {
        rho1[i] = 1.0;
    }
    let root = Uniform::new(0.2, 0.6).unwrap();
    let mut rho2 = DVector::from_fn(n, |_, _| root.sample(rng));
    if let Some(delta) = cfg.delta {
        rho2.fill(delta);
    }
    let gamma_e = idiosyncratic_cov(n, cfg.tau, rng);
    let innovation_var = gamma_e.diagonal();

    // Factors over burn-in, s pre-sample lags, and the sample.
    let total = burn + s + t_len;
    let u = gen_innovations(q, total, cfg.dist, &DMatrix::identity(q, q), rng)?;
    let mut f_all = DMatrix::zeros(q, total);
    for t in 0..total {
        let mut v = u.column(t).into_owned();
        if t >= 1 {
            v += &a1 * f_all.column(t - 1);
        }
        if t >= 2 {
            v += &a2 * f_all.column(t - 2);
        }
        f_all.set_column(t, &v);
    }
    let first = burn + s;
    let factors = f_all.columns(first, t_len).into_owned();
    let mut chi = DMatrix::zeros(n, t_len);
    for c in 0..t_len {
        let mut v = DVector::zeros(n);
        for (k, b) in loadings.iter().enumerate() {
            v += b * f_all.column(first + c - k);
        }
        chi.set_column(c, &v);
    }

    let e = gen_innovations(n, burn + t_len, cfg.dist, &gamma_e, rng)?;
    let mut xi_all = DMatrix::zeros(n, burn + t_len);
    for i in 0..n {
        let (r1, r2) = (rho1[i], rho2[i]);
        for t in 0..burn + t_len {
            let mut v = e[(i, t)];
            if t >= 1 {
                v += (r1 + r2) * xi_all[(i, t - 1)];
            }
            if t >= 2 {
                v -= r1 * r2 * xi_all[(i, t - 2)];
            }
            xi_all[(i, t)] = v;
        }
    }
    let mut xi = xi_all.columns(burn, t_len).into_owned();
    let xi_scale = variance_share_scale(&chi, &xi, cfg.theta)?;
    for i in 0..n {
        xi.row_mut(i).scale_mut(xi_scale[i]);
    }

    let trend_set = sorted_subset(rng, n, cfg.nb);
    let slope = Uniform::new_inclusive(0.3, 0.5).unwrap();
    let mut beta0 = DVector::zeros(n);
    let mut trend = DMatrix::zeros(n, t_len);
    for &i in &trend_set {
        beta0[i] = slope.sample(rng);
        for c in 0..t_len {
            trend[(i, c)] = beta0[i] * (c + 1) as f64;
        }
    }

    let x = &chi + &trend + &xi;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("simulated panel".into()));
    }
    Ok(SimulatedPanel {
        x,
        chi,
        trend,
        xi,
        factors,
        loadings,
        var_coeffs: vec![a1, a2],
        idio_i1,
        trend_set,
        beta0,
        rho1,
        rho2,
        innovation_var,
        xi_scale,
    })
}

/// Panel for replication `replication` of a cell.
pub fn simulate_replication(cfg: &McConfig, seed: u64, replication: u64) -> Result<SimulatedPanel> {
    simulate(cfg, &mut replication_rng(seed, replication))
}

/// Coefficients (ascending powers) of `det(I - A_1 z - ... - A_p z^p)`,
/// recovered by evaluating the determinant on the unit circle and inverting
/// the discrete Fourier transform.
pub fn var_determinant_poly(coeffs: &[DMatrix<f64>]) -> Vec<f64> {
    use nalgebra::Complex;
    let q = coeffs[0].nrows();
    let deg = q * coeffs.len();
    let m = deg + 1;
    let mut values = Vec::with_capacity(m);
    for k in 0..m {
        let z = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64);
        let mut mat = DMatrix::<Complex<f64>>::identity(q, q);
        let mut zp = Complex::new(1.0, 0.0);
        for a in coeffs {
            zp *= z;
            mat -= a.map(|v| Complex::new(v, 0.0)) * zp;
        }
        values.push(mat.determinant());
    }
    (0..m)
        .map(|j| {
            let mut acc = Complex::new(0.0, 0.0);
            for (k, v) in values.iter().enumerate() {
                let w = Complex::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64,
                );
                acc += v * w;
            }
            acc.re / m as f64
        })
        .collect()
}

/// Roots of a real polynomial given by ascending coefficients, via the
/// eigenvalues of its companion matrix. Leading coefficients below
/// `1e-10` times the largest are dropped.
pub fn poly_roots(coeffs: &[f64]) -> Vec<nalgebra::Complex<f64>> {
    let scale = coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-10 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -coeffs[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn full_rank_cointegration_collapses_to_var1() {
        let (a1, a2) = gen_factor_var(3, 3, 0.5, &mut rng(1)).unwrap();
        assert_eq!(a2, DMatrix::zeros(3, 3));
        assert!((spectral_radius(&a1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_roots_count() {
        let mut r = rng(2);
        for _ in 0..20 {
            let (a1, a2) = gen_factor_var(2, 1, 0.5, &mut r).unwrap();
            let roots = poly_roots(&var_determinant_poly(&[a1, a2]));
            let unit = roots
                .iter()
                .filter(|z| (z.norm() - 1.0).abs() < 1e-6)
                .count();
            assert_eq!(unit, 1);
            assert!(roots
                .iter()
                .all(|z| (z.norm() - 1.0).abs() < 1e-6 || z.norm() > 1.0));
        }
    }

    #[test]
    fn b1_zero_count() {
        let b = gen_loadings(11, 3, 1, &mut rng(3));
        assert_eq!(b.len(), 2);
        for j in 0..3 {
            assert_eq!(b[1].column(j).iter().filter(|v| **v == 0.0).count(), 6);
        }
        assert_eq!(gen_loadings(11, 3, 0, &mut rng(3)).len(), 1);
    }

    #[test]
    fn loading_mean_clt_band() {
        let b = gen_loadings(200, 4, 0, &mut rng(4));
        let mean = b[0].mean();
        assert!((mean - 1.0).abs() < 3.0 / (800.0f64).sqrt());
    }

    #[test]
    fn toeplitz_correlation() {
        let cov = idiosyncratic_cov(5, 0.5, &mut rng(0));
        let e = gen_innovations(5, 20000, InnovationDist::Gaussian, &cov, &mut rng(5)).unwrap();
        let r = corr(&e.row(1).transpose(), &e.row(2).transpose());
        assert!((r - 0.5).abs() < 4.0 / (20000.0f64).sqrt());
        let diag = idiosyncratic_cov(5, 0.0, &mut rng(6));
        let e = gen_innovations(5, 20000, InnovationDist::Gaussian, &diag, &mut rng(7)).unwrap();
        let r = corr(&e.row(0).transpose(), &e.row(3).transpose());
        assert!(r.abs() < 4.0 / (20000.0f64).sqrt());
        assert!(diag.diagonal().iter().all(|v| (0.5..1.5).contains(v)));
    }

    fn corr(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let (ma, mb) = (a.mean(), b.mean());
        let ca = a.map(|v| v - ma);
        let cb = b.map(|v| v - mb);
        ca.dot(&cb) / (ca.norm() * cb.norm())
    }

    #[test]
    fn t4_moments() {
        let e = gen_innovations(
            1,
            10000,
            InnovationDist::StudentT4,
            &DMatrix::identity(1, 1),
            &mut rng(8),
        )
        .unwrap();
        let m = e.mean();
        let var = e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 10000.0;
        let kurt = e.iter().map(|v| (v - m).powi(4)).sum::<f64>() / 10000.0 / (var * var);
        assert!((var - 1.0).abs() < 0.1, "{var}");
        assert!(kurt > 4.0, "{kurt}");
    }

    #[test]
    fn gaussian_identity_cov() {
        let t = 5000;
        let e = gen_innovations(
            3,
            t,
            InnovationDist::Gaussian,
            &DMatrix::identity(3, 3),
            &mut rng(9),
        )
        .unwrap();
        let cov = &e * e.transpose() / t as f64;
        let err = (cov - DMatrix::identity(3, 3))
            .svd(false, false)
            .singular_values
            .max();
        assert!(err < 5.0 / (t as f64).sqrt());
    }

    #[test]
    fn decomposition_share_and_trends() {
        let cfg = McConfig {
            n: 30,
            t_len: 80,
            n1: 5,
            nb: 7,
            s: 1,
            ..McConfig::default()
        };
        let sim = simulate_replication(&cfg, 11, 0).unwrap();
        assert_eq!(sim.x, &sim.chi + &sim.trend + &sim.xi);
        assert_eq!(sim.idio_i1.len(), 5);
        assert_eq!(sim.trend_set.len(), 7);
        for &i in &sim.trend_set {
            assert!((0.3..=0.5).contains(&sim.beta0[i]));
        }
        for i in 0..30 {
            let vc = diff_var(sim.chi.row(i).iter().copied());
            let vx = diff_var(sim.xi.row(i).iter().copied());
            assert!((vc / (vc + vx) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_trend_means_no_deterministic_part() {
        let cfg = McConfig {
            n: 10,
            t_len: 30,
            ..McConfig::default()
        };
        let sim = simulate_replication(&cfg, 1, 0).unwrap();
        assert_eq!(sim.trend, DMatrix::zeros(10, 30));
        assert_eq!(sim.x, &sim.chi + &sim.xi);
    }

    #[test]
    fn seeded_determinism_and_streams() {
        let cfg = McConfig {
            n: 12,
            t_len: 20,
            n1: 2,
            nb: 2,
            ..McConfig::default()
        };
        let a = simulate_replication(&cfg, 42, 3).unwrap();
        let b = simulate_replication(&cfg, 42, 3).unwrap();
        let c = simulate_replication(&cfg, 42, 4).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn unit_root_variance_grows() {
        let cfg = McConfig {
            n: 4,
            t_len: 60,
            n1: 1,
            tau: 0.0,
            burn_in: 0,
            ..McConfig::default()
        };
        // Cross-path variance of the integrated component at each t.
        let paths = 200;
        let mut sums = vec![0.0; 60];
        let mut sq = vec![0.0; 60];
        for r in 0..paths {
            let sim = simulate_replication(&cfg, 9, r).unwrap();
            let i = sim.idio_i1[0];
            for t in 0..60 {
                let v = sim.xi[(i, t)] / sim.xi_scale[i];
                sums[t] += v;
                sq[t] += v * v;
            }
        }
        let var: Vec<f64> = (0..60)
            .map(|t| sq[t] / paths as f64 - (sums[t] / paths as f64).powi(2))
            .collect();
        let tbar = 29.5;
        let vbar = var.iter().sum::<f64>() / 60.0;
        let stt: f64 = (0..60).map(|t| (t as f64 - tbar).powi(2)).sum();
        let slope: f64 = (0..60)
            .map(|t| (t as f64 - tbar) * (var[t] - vbar))
            .sum::<f64>()
            / stt;
        let resid: f64 = (0..60)
            .map(|t| (var[t] - vbar - slope * (t as f64 - tbar)).powi(2))
            .sum::<f64>();
        let se = (resid / 58.0 / stt).sqrt();
        assert!(slope > 5.0 * se, "slope {slope} se {se}");
    }

    #[test]
    fn invalid_configs() {
        let bad = McConfig {
            n1: 100,
            ..McConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = McConfig {
            d: 3,
            ..McConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
