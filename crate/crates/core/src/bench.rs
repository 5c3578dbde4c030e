//! Monte Carlo benchmark of the EM estimator against the principal
//! components competitors, and filter/smoother covariance diagnostics at
//! the true parameters.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::competitors::{self, Method};
use crate::em::{self, EmOptions};
use crate::error::{Error, Result};
use crate::init::p00_init;
use crate::kalman::{first_steady_period, trace_profile, DEFAULT_KAPPA};
use crate::model::build_state_space;
use crate::simulate::{simulate_replication, McConfig};

/// First period (one-based) entering the MSE.
pub const DEFAULT_T_BAR: usize = 3;
/// Largest share of failed replications before a cell is marked invalid.
pub const MAX_FAILURE_RATE: f64 = 0.05;
/// Relative tolerance of the steady-state flag.
pub const DEFAULT_STEADY_TOL: f64 = 1e-5;

/// Mean squared difference over all series and periods `t >= t_bar`.
pub fn mse_common(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, t_bar: usize) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let t_bar = t_bar.max(1);
    let (n, t_len) = truth.shape();
    if t_bar > t_len || n == 0 {
        return Err(Error::Dimension(format!("no periods from t = {t_bar} on")));
    }
    let mut acc = 0.0;
    for c in (t_bar - 1)..t_len {
        for i in 0..n {
            acc += (estimate[(i, c)] - truth[(i, c)]).powi(2);
        }
    }
    Ok(acc / (n * (t_len - t_bar + 1)) as f64)
}

pub fn relative_mse(a: f64, b: f64) -> f64 {
    a / b
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub t_bar: usize,
    pub em: EmOptions,
    /// Remove series means before the levels principal components.
    pub pc_demean: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            replications: 100,
            seed: 1,
            jobs: 0,
            t_bar: DEFAULT_T_BAR,
            em: EmOptions::default(),
            pc_demean: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: u64,
    pub mse_em: f64,
    /// Competitor MSEs in the order of [`Method::ALL`].
    pub mse_competitors: [f64; 3],
    pub em_iterations: usize,
    pub converged: bool,
    pub loglik: f64,
}

impl ReplicationResult {
    pub fn relative(&self, method: Method) -> f64 {
        relative_mse(self.mse_em, self.mse_competitors[method_index(method)])
    }
}

pub(crate) fn method_index(method: Method) -> usize {
    Method::ALL.iter().position(|&m| m == method).unwrap()
}

/// Simulates replication `replication`, fits EM and the competitors, and
/// scores each against the common component plus deterministic trend.
pub fn run_replication(
    cfg: &McConfig,
    opts: &BenchOptions,
    replication: u64,
) -> Result<ReplicationResult> {
    let sim = simulate_replication(cfg, opts.seed, replication)?;
    let spec = cfg.model_spec(&sim)?;
    let panel = sim.panel();
    let target = sim.target();
    let fit = em::fit(&spec, &panel, &opts.em)?;
    let mse_em = mse_common(&fit.common_with_trend(), &target, opts.t_bar)?;
    let r = cfg.q * (cfg.s + 1);
    let mut mse_competitors = [0.0; 3];
    for (k, m) in Method::ALL.iter().enumerate() {
        let est = match m {
            Method::PcLevels => competitors::pc_levels(&panel, r, opts.pc_demean)?,
            _ => competitors::estimate(*m, &panel, r)?,
        };
        mse_competitors[k] = mse_common(&est.chi, &target, opts.t_bar)?;
    }
    Ok(ReplicationResult {
        replication,
        mse_em,
        mse_competitors,
        em_iterations: fit.iterations,
        converged: fit.converged,
        loglik: fit.loglik,
    })
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub completed: usize,
    pub failed: usize,
    /// False when more than [`MAX_FAILURE_RATE`] of the replications failed.
    pub valid: bool,
    pub mean_relative: [f64; 3],
    pub median_relative: [f64; 3],
    pub mean_mse_em: f64,
    pub median_mse_em: f64,
    pub median_mse_competitors: [f64; 3],
    pub nonconverged: usize,
    pub mean_iterations: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CellReport {
    pub config: McConfig,
    pub summary: CellSummary,
    pub replications: Vec<ReplicationResult>,
    /// `(replication, error message)` of every failed replication.
    pub failures: Vec<(u64, String)>,
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every replication of a cell; results are in replication order and
/// do not depend on the number of workers.
pub fn run_cell(cfg: &McConfig, opts: &BenchOptions) -> Result<CellReport> {
    cfg.validate()?;
    if opts.replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    let start = Instant::now();
    let outcomes: Vec<(u64, Result<ReplicationResult>)> = with_pool(opts.jobs, || {
        (0..opts.replications as u64)
            .into_par_iter()
            .map(|r| (r, run_replication(cfg, opts, r)))
            .collect()
    })?;
    let seconds = start.elapsed().as_secs_f64();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(res) => replications.push(res),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let summary = summarize(&replications, failures.len(), seconds);
    Ok(CellReport {
        config: cfg.clone(),
        summary,
        replications,
        failures,
    })
}

pub fn summarize(reps: &[ReplicationResult], failed: usize, seconds: f64) -> CellSummary {
    let completed = reps.len();
    let total = completed + failed;
    let mut mean_relative = [f64::NAN; 3];
    let mut median_relative = [f64::NAN; 3];
    let mut median_mse_competitors = [f64::NAN; 3];
    for (k, m) in Method::ALL.iter().enumerate() {
        let rel: Vec<f64> = reps.iter().map(|r| r.relative(*m)).collect();
        let raw: Vec<f64> = reps.iter().map(|r| r.mse_competitors[k]).collect();
        if completed > 0 {
            mean_relative[k] = mean(&rel);
            median_relative[k] = median(&rel);
            median_mse_competitors[k] = median(&raw);
        }
    }
    let em: Vec<f64> = reps.iter().map(|r| r.mse_em).collect();
    let iters: Vec<f64> = reps.iter().map(|r| r.em_iterations as f64).collect();
    CellSummary {
        completed,
        failed,
        valid: completed > 0 && (failed as f64) <= MAX_FAILURE_RATE * total as f64,
        mean_relative,
        median_relative,
        mean_mse_em: if completed > 0 { mean(&em) } else { f64::NAN },
        median_mse_em: median(&em),
        median_mse_competitors,
        nonconverged: reps.iter().filter(|r| !r.converged).count(),
        mean_iterations: if completed > 0 {
            mean(&iters)
        } else {
            f64::NAN
        },
        seconds,
    }
}

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub replications: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Number of periods reported.
    pub horizon: usize,
    pub kappa: f64,
    pub phi: f64,
    pub steady_tol: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            replications: 50,
            seed: 1,
            jobs: 0,
            horizon: 10,
            kappa: DEFAULT_KAPPA,
            phi: em::DEFAULT_PHI,
            steady_tol: DEFAULT_STEADY_TOL,
        }
    }
}

/// Replication averages of `tr(P)/q` for the covariance of the current
/// factors `f_t`, for one cross-section size.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDiagnostics {
    pub n: usize,
    pub init: f64,
    /// `tr(P_{t|t-1})/q` for `t = 1..=horizon`.
    pub predicted: Vec<f64>,
    pub filtered: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// First period from which the averaged predicted trace is flat.
    pub steady_period: Option<usize>,
}

impl TraceDiagnostics {
    pub fn filtered_scaled(&self) -> Vec<f64> {
        self.filtered.iter().map(|v| v * self.n as f64).collect()
    }
    pub fn smoothed_scaled(&self) -> Vec<f64> {
        self.smoothed.iter().map(|v| v * self.n as f64).collect()
    }
}

/// Covariance traces of the current-factor block under the true
/// parameters of `cfg`, for each cross-section size in `ns`.
pub fn diagnose(
    cfg: &McConfig,
    ns: &[usize],
    opts: &DiagnoseOptions,
) -> Result<Vec<TraceDiagnostics>> {
    if opts.replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let cell = McConfig { n, ..cfg.clone() };
        cell.validate()?;
        let profiles: Vec<Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>> =
            with_pool(opts.jobs, || {
                (0..opts.replications as u64)
                    .into_par_iter()
                    .map(|r| {
                        let sim = simulate_replication(&cell, opts.seed, r)?;
                        let spec = cell.model_spec(&sim)?;
                        let params = sim.true_params(&spec, opts.phi)?;
                        let ss = build_state_space(&spec, &params)?;
                        let layout = &ss.layout;
                        let p_factor = p00_init(&params.companion(layout.lags), &params.gamma_u)?;
                        let mut init_cov = DMatrix::zeros(layout.state_dim, layout.state_dim);
                        init_cov
                            .view_mut((0, 0), (layout.factor_dim, layout.factor_dim))
                            .copy_from(&p_factor);
                        for k in layout.extra_range() {
                            init_cov[(k, k)] = opts.kappa;
                        }
                        let prof = trace_profile(
                            &ss,
                            &init_cov,
                            cell.t_len,
                            opts.horizon,
                            0..cell.q,
                            cell.q,
                        )?;
                        Ok((
                            prof.init_trace / cell.q as f64,
                            prof.predicted_per_factor(),
                            prof.filtered_per_factor(),
                            prof.smoothed_per_factor(),
                        ))
                    })
                    .collect()
            })?;
        let profiles: Vec<_> = profiles.into_iter().collect::<Result<_>>()?;
        let reps = profiles.len() as f64;
        let h = profiles[0].1.len();
        let avg = |sel: fn(&(f64, Vec<f64>, Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
            (0..h)
                .map(|t| profiles.iter().map(|p| sel(p)[t]).sum::<f64>() / reps)
                .collect()
        };
        let predicted = avg(|p| &p.1);
        let steady_period = first_steady_period(&predicted, opts.steady_tol);
        out.push(TraceDiagnostics {
            n,
            init: profiles.iter().map(|p| p.0).sum::<f64>() / reps,
            predicted,
            filtered: avg(|p| &p.2),
            smoothed: avg(|p| &p.3),
            steady_period,
        });
    }
    Ok(out)
}
