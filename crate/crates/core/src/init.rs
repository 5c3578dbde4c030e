//! Pre-estimation: iteration zero of the EM algorithm.
//!
//! Everything here works on first differences of the (detrended) data:
//! principal components of `Δx`, a projection of the residual differences on
//! lagged factor differences for the lagged loadings, an unrestricted VAR on
//! the pre-factors, and a Lyapunov solution for the initial factor covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    gram_solve, solve_discrete_lyapunov, spectral_radius, sym_eigen_desc, symmetrize,
};
use crate::model::{ModelSpec, Panel, Params};

pub const SIGMA2_OMEGA_INIT: f64 = 1e-2;
pub const SIGMA2_ETA_INIT: f64 = 1e-2;
pub const SIGMA2_NU_INIT: f64 = 1e-5;
/// Largest eigenvalue modulus of the companion used for the initial factor
/// covariance.
pub const COMPANION_SHRINK: f64 = 0.99;
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct InitOptions {
    /// Initial variance of the idiosyncratic, level and slope states.
    pub kappa: f64,
    /// Use the levels-based residual variance for stationary series.
    pub gamma_e_from_levels: bool,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            kappa: crate::kalman::DEFAULT_KAPPA,
            gamma_e_from_levels: false,
        }
    }
}

/// Principal components of the differenced panel.
#[derive(Debug, Clone)]
pub struct PcDifferences {
    /// `B_0 = V M^{1/2}`, n x q.
    pub loadings: DMatrix<f64>,
    /// The q leading eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    /// n x q normalised eigenvectors with a positive first row.
    pub eigenvectors: DMatrix<f64>,
}

/// Iteration-zero estimates together with the filter initialisation.
#[derive(Debug, Clone)]
pub struct PreEstimate {
    pub pc: PcDifferences,
    /// Pre-factors, q x T.
    pub factors: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub params: Params,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

/// OLS of a series on `(1, t)`, `t = 1..=T`. Series outside the trend sets
/// are returned untouched with zero intercept and slope.
pub fn detrend_ols(series: &DVector<f64>, in_trend_set: bool) -> Result<(f64, f64, DVector<f64>)> {
    let t_len = series.len();
    if t_len < 3 {
        return Err(Error::Dimension("detrending needs T >= 3".into()));
    }
    if !in_trend_set {
        return Ok((0.0, 0.0, series.clone()));
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .map(|(k, &v)| ((k + 1) as f64, v))
        .collect();
    let (a, b) = line_fit(&points)?;
    let resid = DVector::from_iterator(t_len, points.iter().map(|&(t, v)| v - a - b * t));
    Ok((a, b, resid))
}

/// Least-squares line through `(t, y)` pairs.
pub(crate) fn line_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let m = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Singular(
            "trend regression with fewer than two points".into(),
        ));
    }
    let tbar = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = points.iter().map(|p| (p.0 - tbar).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - tbar) * (p.1 - ybar)).sum();
    if stt <= 0.0 {
        return Err(Error::Singular(
            "trend regression with a single distinct t".into(),
        ));
    }
    let b = sty / stt;
    Ok((ybar - b * tbar, b))
}

/// Eigendecomposition of the sample covariance of `dx` (n x (T-1)).
pub fn pc_first_differences(dx: &DMatrix<f64>, q: usize) -> Result<PcDifferences> {
    let (n, m) = dx.shape();
    if m < q + 1 {
        return Err(Error::Dimension(format!(
            "need T >= q + 2 for {q} components"
        )));
    }
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("differenced panel".into()));
    }
    let mean = dx.column_mean();
    let mut centered = dx.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / m as f64;
    let (vals, vecs) = sym_eigen_desc(&cov);
    let scale = vals[0].abs().max(f64::MIN_POSITIVE);
    if (0..q).any(|j| vals[j] <= 1e-12 * scale) || vals[0] <= 0.0 {
        return Err(Error::Singular(format!(
            "differenced covariance has fewer than {q} positive eigenvalues"
        )));
    }
    let eigenvalues = vals.rows(0, q).into_owned();
    let eigenvectors = vecs.columns(0, q).into_owned();
    let mut loadings = eigenvectors.clone();
    for j in 0..q {
        loadings.column_mut(j).scale_mut(eigenvalues[j].sqrt());
    }
    debug_assert_eq!(loadings.nrows(), n);
    Ok(PcDifferences {
        loadings,
        eigenvalues,
        eigenvectors,
    })
}

/// `f_t = M^{-1} B_0' x_t` for every column of `levels`.
pub fn pre_factors(pc: &PcDifferences, levels: &DMatrix<f64>) -> DMatrix<f64> {
    let minv = DMatrix::from_diagonal(&pc.eigenvalues.map(|v| 1.0 / v));
    minv * pc.loadings.transpose() * levels
}

fn differences(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(r, c.saturating_sub(1), |i, j| m[(i, j + 1)] - m[(i, j)])
}

/// Lagged loadings `B_1..B_s` by projecting `Δx_t - B_0 Δf_t` on
/// `(Δf_{t-1}, ..., Δf_{t-s})`. `dx` is n x (T-1) with column `k` holding
/// `Δx_{k+2}`; `factors` is q x T.
pub fn lagged_loadings(
    dx: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    s: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if s == 0 {
        return Ok(Vec::new());
    }
    let q = factors.nrows();
    let n = dx.nrows();
    let df = differences(factors);
    let m = df.ncols();
    if m <= s + q * s {
        return Err(Error::Dimension(
            "too few periods for lagged loadings".into(),
        ));
    }
    let resid = dx - b0 * &df;
    let mut gram = DMatrix::zeros(q * s, q * s);
    let mut cross = DMatrix::zeros(n, q * s);
    for col in s..m {
        let mut z = DVector::zeros(q * s);
        for k in 1..=s {
            z.rows_mut((k - 1) * q, q).copy_from(&df.column(col - k));
        }
        gram += &z * z.transpose();
        cross += resid.column(col) * z.transpose();
    }
    let coef = gram_solve(
        &gram,
        &cross.transpose(),
        "lagged factor-difference Gram matrix",
    )?
    .transpose();
    Ok((0..s)
        .map(|k| coef.columns(k * q, q).into_owned())
        .collect())
}

/// Unrestricted VAR(p) on the pre-factors. Returns `(A_1..A_p, Γu)` with
/// `Γu = T^{-1} Σ u_t u_t'`.
pub fn var_prefit(factors: &DMatrix<f64>, p: usize) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let (q, t_len) = factors.shape();
    if t_len < p * q + p + 1 {
        return Err(Error::Dimension(format!(
            "VAR({p}) pre-fit needs T >= {}",
            p * q + p + 1
        )));
    }
    let mut gram = DMatrix::zeros(q * p, q * p);
    let mut cross = DMatrix::zeros(q, q * p);
    let lagged = |col: usize| {
        let mut z = DVector::zeros(q * p);
        for k in 1..=p {
            z.rows_mut((k - 1) * q, q)
                .copy_from(&factors.column(col - k));
        }
        z
    };
    for col in p..t_len {
        let z = lagged(col);
        gram += &z * z.transpose();
        cross += factors.column(col) * z.transpose();
    }
    let coef = gram_solve(&gram, &cross.transpose(), "VAR regressor moment matrix")?.transpose();
    let mut gamma_u = DMatrix::zeros(q, q);
    for col in p..t_len {
        let u = factors.column(col) - &coef * lagged(col);
        gamma_u += &u * u.transpose();
    }
    gamma_u /= t_len as f64;
    symmetrize(&mut gamma_u);
    let a = (0..p)
        .map(|k| coef.columns(k * q, q).into_owned())
        .collect();
    Ok((a, gamma_u))
}

/// Idiosyncratic variances from differenced residuals: normalised by `1/T`
/// for I1 series and `1/(2T)` otherwise (the MA(1) variance of a differenced
/// white noise is twice its level variance).
pub fn gamma_e_init(
    dx: &DMatrix<f64>,
    loadings: &[DMatrix<f64>],
    factors: &DMatrix<f64>,
    in_i1: &[bool],
) -> DVector<f64> {
    let n = dx.nrows();
    let s = loadings.len() - 1;
    let df = differences(factors);
    let t_len = factors.ncols() as f64;
    let mut out = DVector::zeros(n);
    for col in s..df.ncols() {
        let mut fit = DVector::zeros(n);
        for (k, b) in loadings.iter().enumerate() {
            fit += b * df.column(col - k);
        }
        for i in 0..n {
            out[i] += (dx[(i, col)] - fit[i]).powi(2);
        }
    }
    for i in 0..n {
        out[i] /= if in_i1[i] { t_len } else { 2.0 * t_len };
    }
    out
}

/// Levels-based alternative for stationary series:
/// `T^{-1} Σ (x_it - Σ_k b_ik' f_{t-k})^2`.
pub fn gamma_e_levels(
    levels: &DMatrix<f64>,
    loadings: &[DMatrix<f64>],
    factors: &DMatrix<f64>,
) -> DVector<f64> {
    let n = levels.nrows();
    let s = loadings.len() - 1;
    let t_len = factors.ncols();
    let mut out = DVector::zeros(n);
    for col in s..t_len {
        let mut fit = DVector::zeros(n);
        for (k, b) in loadings.iter().enumerate() {
            fit += b * factors.column(col - k);
        }
        for i in 0..n {
            out[i] += (levels[(i, col)] - fit[i]).powi(2);
        }
    }
    out / t_len as f64
}

/// Initial covariance of the factor companion: rescale the companion so its
/// largest eigenvalue modulus is 0.99 and solve `P = A P A' + H Γu H'`.
pub fn p00_init(companion: &DMatrix<f64>, gamma_u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = companion.nrows();
    let q = gamma_u.nrows();
    let norm = spectral_radius(companion);
    let shrunk = if norm > 0.0 {
        companion * (COMPANION_SHRINK / norm)
    } else {
        companion.clone()
    };
    let mut rhs = DMatrix::zeros(dim, dim);
    rhs.view_mut((0, 0), (q, q)).copy_from(gamma_u);
    solve_discrete_lyapunov(&shrunk, &rhs)
}

/// Fills masked cells by linear interpolation between observed neighbours
/// (flat beyond the first/last observation; zero for an empty series).
fn interpolate_levels(panel: &Panel) -> DMatrix<f64> {
    let (n, t_len) = panel.data.shape();
    let mut out = panel.data.clone();
    for i in 0..n {
        let obs: Vec<usize> = (0..t_len).filter(|&t| panel.observed[(i, t)]).collect();
        if obs.is_empty() {
            for t in 0..t_len {
                out[(i, t)] = 0.0;
            }
            continue;
        }
        for t in 0..t_len {
            if panel.observed[(i, t)] {
                continue;
            }
            let next = obs.iter().position(|&o| o > t);
            out[(i, t)] = match next {
                None => panel.data[(i, *obs.last().unwrap())],
                Some(0) => panel.data[(i, obs[0])],
                Some(k) => {
                    let (t0, t1) = (obs[k - 1], obs[k]);
                    let (y0, y1) = (panel.data[(i, t0)], panel.data[(i, t1)]);
                    y0 + (y1 - y0) * (t - t0) as f64 / (t1 - t0) as f64
                }
            };
        }
    }
    out
}

/// Differences of observed neighbouring pairs, with all other cells filled
/// by the per-series mean of the available differences.
fn masked_differences(levels: &DMatrix<f64>, panel: &Panel) -> DMatrix<f64> {
    let (n, t_len) = levels.shape();
    let mut dx = DMatrix::zeros(n, t_len - 1);
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for c in 1..t_len {
            if panel.observed[(i, c)] && panel.observed[(i, c - 1)] {
                let d = levels[(i, c)] - levels[(i, c - 1)];
                dx[(i, c - 1)] = d;
                sum += d;
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        for c in 1..t_len {
            if !(panel.observed[(i, c)] && panel.observed[(i, c - 1)]) {
                dx[(i, c - 1)] = mean;
            }
        }
    }
    dx
}

/// Runs every pre-estimator and assembles the starting parameters and the
/// filter initialisation for the first E-step.
pub fn pre_estimate(spec: &ModelSpec, panel: &Panel, opts: &InitOptions) -> Result<PreEstimate> {
    panel.check_spec(spec)?;
    let n = spec.n;
    let t_len = spec.t_len;
    let q = spec.q;
    if t_len < 3 {
        return Err(Error::Dimension("pre-estimation needs T >= 3".into()));
    }

    // Detrend the trend-set series on their observed points.
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    for i in 0..n {
        if spec.in_level(i) || spec.in_trend(i) {
            let pts: Vec<(f64, f64)> = (0..t_len)
                .filter(|&c| panel.observed[(i, c)])
                .map(|c| ((c + 1) as f64, panel.data[(i, c)]))
                .collect();
            let (a, b) = line_fit(&pts)?;
            alpha[i] = a;
            beta[i] = b;
        }
    }
    let mut detrended = panel.clone();
    for i in 0..n {
        if alpha[i] != 0.0 || beta[i] != 0.0 {
            for c in 0..t_len {
                detrended.data[(i, c)] -= alpha[i] + beta[i] * (c + 1) as f64;
            }
        }
    }
    let levels = interpolate_levels(&detrended);
    let dx = masked_differences(&levels, &detrended);

    let pc = pc_first_differences(&dx, q)?;
    let factors = pre_factors(&pc, &levels);
    let mut loadings = vec![pc.loadings.clone()];
    loadings.extend(lagged_loadings(&dx, &pc.loadings, &factors, spec.s)?);

    let (var_coeffs, mut gamma_u) = var_prefit(&factors, spec.p)?;
    if gamma_u.clone().cholesky().is_none() {
        let ridge = 1e-8 * gamma_u.trace().abs().max(1.0);
        for d in 0..q {
            gamma_u[(d, d)] += ridge;
        }
    }

    let in_i1: Vec<bool> = (0..n).map(|i| spec.in_i1(i)).collect();
    let mut gamma_e = gamma_e_init(&dx, &loadings, &factors, &in_i1);
    if opts.gamma_e_from_levels {
        let lev = gamma_e_levels(&levels, &loadings, &factors);
        for i in 0..n {
            if !in_i1[i] {
                gamma_e[i] = lev[i];
            }
        }
    }

    let mut params = Params::zeros(spec);
    params.loadings = loadings;
    params.var_coeffs = var_coeffs;
    params.gamma_u = gamma_u;
    params.gamma_e_diag = gamma_e.map(|v| v.max(VARIANCE_FLOOR));
    for i in 0..n {
        if spec.in_level(i) {
            params.sigma2_omega[i] = SIGMA2_OMEGA_INIT;
            params.alpha0[i] = alpha[i];
        }
        if spec.in_trend(i) {
            params.sigma2_eta[i] = SIGMA2_ETA_INIT;
            params.beta0[i] = beta[i];
        }
        if spec.in_im(i) {
            params.sigma2_nu[i] = SIGMA2_NU_INIT;
        }
    }

    let layout = spec.layout();
    let companion = params.companion(layout.lags);
    let p_factor = p00_init(&companion, &params.gamma_u)?;
    let mut init_cov = DMatrix::zeros(layout.state_dim, layout.state_dim);
    init_cov
        .view_mut((0, 0), (layout.factor_dim, layout.factor_dim))
        .copy_from(&p_factor);
    for k in layout.extra_range() {
        init_cov[(k, k)] = opts.kappa;
    }
    let mut init_mean = crate::model::initial_state_mean(spec, &params);
    for lag in 0..layout.lags {
        init_mean.rows_mut(lag * q, q).copy_from(&factors.column(0));
    }

    Ok(PreEstimate {
        pc,
        factors,
        alpha,
        beta,
        params,
        init_mean,
        init_cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn detrend_exact_line() {
        let x = DVector::from_iterator(10, (1..=10).map(|t| 2.0 + 3.0 * t as f64));
        let (a, b, r) = detrend_ols(&x, true).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
        assert!(r.amax() < 1e-11);
        let (a, b, r) = detrend_ols(&x, false).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
        assert_eq!(r, x);
    }

    #[test]
    fn detrend_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t_len = 200;
        let x = DVector::from_fn(t_len, |k, _| {
            1.0 + 0.5 * (k + 1) as f64 + rng.sample::<f64, _>(StandardNormal)
        });
        // Oracle: solve (X'X) c = X'y with X = [1, t].
        let design = DMatrix::from_fn(t_len, 2, |k, j| if j == 0 { 1.0 } else { (k + 1) as f64 });
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * &x;
        let c = xtx.lu().solve(&xty).unwrap();
        let (a, b, _) = detrend_ols(&x, true).unwrap();
        assert!((a - c[0]).abs() < 1e-10 && (b - c[1]).abs() < 1e-10);
    }

    #[test]
    fn pc_recovers_exact_factor_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        // Orthogonal columns via QR.
        let b0 = normal_matrix(&mut rng, n, 2).qr().q()
            * DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
        let df = normal_matrix(&mut rng, 2, 150);
        let dx = &b0 * &df;
        let pc = pc_first_differences(&dx, 2).unwrap();
        // Principal angles: residual of projecting B0 onto span(V).
        let v = &pc.eigenvectors;
        let resid = &b0 - v * (v.transpose() * &b0);
        assert!(resid.amax() < 1e-8);
        let gram = pc.loadings.transpose() * &pc.loadings;
        let m = DMatrix::from_diagonal(&pc.eigenvalues);
        assert!((gram - m).amax() < 1e-10);
        for j in 0..2 {
            assert!(pc.eigenvectors[(0, j)] > 0.0);
        }
    }

    #[test]
    fn pc_leading_pair_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let common = normal_matrix(&mut rng, 20, 1) * normal_matrix(&mut rng, 1, 200);
        let dx = common * 2.0 + normal_matrix(&mut rng, 20, 200);
        let pc = pc_first_differences(&dx, 1).unwrap();
        let mean = dx.column_mean();
        let mut c = dx.clone();
        for mut col in c.column_iter_mut() {
            col -= &mean;
        }
        let cov = &c * c.transpose() / 200.0;
        let mut v = DVector::from_element(20, 1.0).normalize();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w = &cov * &v;
            lambda = w.norm();
            v = w / lambda;
        }
        if v[0] < 0.0 {
            v = -v;
        }
        assert!((pc.eigenvalues[0] - lambda).abs() < 1e-8 * lambda);
        assert!((pc.eigenvectors.column(0) - &v).amax() < 1e-8);
    }

    #[test]
    fn pc_rejects_rank_deficiency() {
        let dx = DMatrix::from_fn(5, 30, |i, t| if i == 0 { (t as f64).sin() } else { 0.0 });
        assert!(matches!(
            pc_first_differences(&dx, 2),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn lagged_loadings_skip_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = normal_matrix(&mut rng, 2, 120);
        let dx = normal_matrix(&mut rng, 6, 119);
        let b0 = normal_matrix(&mut rng, 6, 2);
        assert!(lagged_loadings(&dx, &b0, &f, 0).unwrap().is_empty());
        let b1 = &lagged_loadings(&dx, &b0, &f, 1).unwrap()[0];
        let df = differences(&f);
        let resid = &dx - &b0 * &df;
        let mut gp = DMatrix::<f64>::zeros(6, 2);
        for col in 1..df.ncols() {
            let e = resid.column(col) - b1 * df.column(col - 1);
            gp += e * df.column(col - 1).transpose();
        }
        assert!(gp.amax() < 1e-10);
    }

    #[test]
    fn var_prefit_white_noise_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t_len = 4000;
        let f = normal_matrix(&mut rng, 2, t_len);
        let (a, gu) = var_prefit(&f, 2).unwrap();
        for ak in &a {
            assert!(crate::linalg::spectral_norm(ak) < 3.0 / (t_len as f64).sqrt() * 2.0);
        }
        assert!((gu - DMatrix::identity(2, 2)).amax() < 0.1);
    }

    #[test]
    fn var_prefit_random_walk_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t_len = 5000;
        let mut f = DMatrix::zeros(1, t_len);
        for t in 1..t_len {
            f[(0, t)] = f[(0, t - 1)] + rng.sample::<f64, _>(StandardNormal);
        }
        let (a, _) = var_prefit(&f, 1).unwrap();
        assert!((a[0][(0, 0)] - 1.0).abs() < 20.0 / t_len as f64);
    }

    #[test]
    fn gamma_e_zero_and_scaling() {
        let f = DMatrix::zeros(1, 50);
        let dx = DMatrix::zeros(3, 49);
        let b = vec![DMatrix::zeros(3, 1)];
        assert_eq!(
            gamma_e_init(&dx, &b, &f, &[false, true, false]),
            DVector::zeros(3)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t_len = 1000;
        let f = DMatrix::zeros(1, t_len);
        // Series 0: white noise e_t with variance 4, differenced.
        let e: Vec<f64> = (0..t_len)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        // Series 1: random walk whose increment has variance 4.
        let inc: Vec<f64> = (0..t_len)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let dx = DMatrix::from_fn(2, t_len - 1, |i, c| {
            if i == 0 {
                e[c + 1] - e[c]
            } else {
                inc[c + 1]
            }
        });
        let b = vec![DMatrix::zeros(2, 1)];
        let g = gamma_e_init(&dx, &b, &f, &[false, true]);
        assert!((g[0] - 4.0).abs() < 0.4, "{}", g[0]);
        assert!((g[1] - 4.0).abs() < 0.4, "{}", g[1]);
    }

    #[test]
    fn p00_scalar_and_residual() {
        let p = p00_init(&dmatrix![1.3], &dmatrix![1.0]).unwrap();
        assert!((p[(0, 0)] - 1.0 / (1.0 - 0.9801)).abs() < 1e-9);

        let a = dmatrix![0.6, 0.3, -0.2, 0.1; 0.1, 0.5, 0.0, -0.3; 1.0, 0.0, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0];
        let gu = dmatrix![1.0, 0.3; 0.3, 0.8];
        let p = p00_init(&a, &gu).unwrap();
        let shrunk = &a * (0.99 / spectral_radius(&a));
        let mut h = DMatrix::zeros(4, 4);
        h.view_mut((0, 0), (2, 2)).copy_from(&gu);
        let resid = &p - &shrunk * &p * shrunk.transpose() - &h;
        assert!(resid.amax() < 1e-8);
        // Fixed-point iteration oracle.
        let mut it = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..20000 {
            it = &shrunk * &it * shrunk.transpose() + &h;
        }
        assert!((&it - &p).amax() < 1e-8 * p.amax());
    }

    #[test]
    fn interpolation_fills_gaps() {
        let mut d = dmatrix![1.0, f64::NAN, 3.0, f64::NAN];
        let p = Panel::from_nan(d.clone());
        let l = interpolate_levels(&p);
        d[(0, 1)] = 2.0;
        d[(0, 3)] = 3.0;
        assert_eq!(l, d);
    }
}
