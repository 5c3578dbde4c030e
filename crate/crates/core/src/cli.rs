//! The four commands behind the `nsdfm` binary. Each one reads a
//! [`RunConfig`], writes its files under `io.out_dir` and returns the paths
//! written with the exit code the process should use.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::bench::{self, BenchOptions, CellReport, DiagnoseOptions};
use crate::competitors::Method;
use crate::em;
use crate::error::{Error, Result};
use crate::io::{default_names, fmt_f64, read_panel, write_panel, Report, RunConfig, Table};
use crate::simulate::{simulate_replication, SimulatedPanel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Estimate,
    Benchmark,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Benchmark => "benchmark",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
    /// One-line summary for standard error.
    pub message: String,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Estimate => cmd_estimate(cfg),
        Command::Benchmark => cmd_benchmark(cfg),
        Command::Diagnose => cmd_diagnose(cfg),
    }
}

fn new_report(command: Command, cfg: &RunConfig) -> Report {
    let mut r = Report::default();
    r.set_meta_str("command", command.name());
    for (k, v) in cfg.to_meta() {
        r.set_meta(k, v);
    }
    r
}

fn report_path(cfg: &RunConfig, stem: &str) -> PathBuf {
    cfg.io
        .out_dir
        .join(format!("{stem}.{}", cfg.io.format.extension()))
}

fn one_based_list(set: &[usize]) -> String {
    let items: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("[{}]", items.join(", "))
}

/// Table with a leading `t` column and one column per series; `m` is
/// n x T (or q x T for factors).
fn time_table(name: &str, labels: &[String], m: &DMatrix<f64>) -> Table {
    let mut cols = vec!["t".to_string()];
    cols.extend(labels.iter().cloned());
    let mut t = Table::with_columns(name, cols);
    for c in 0..m.ncols() {
        let mut row = vec![(c + 1).to_string()];
        row.extend((0..m.nrows()).map(|r| fmt_f64(m[(r, c)])));
        t.push(row);
    }
    t
}

fn loadings_table(names: &[String], loadings: &[DMatrix<f64>]) -> Table {
    let q = loadings.first().map_or(0, |b| b.ncols());
    let mut cols = vec!["series".to_string()];
    for lag in 0..loadings.len() {
        cols.extend((1..=q).map(|j| format!("b{lag}_{j}")));
    }
    let mut t = Table::with_columns("loadings", cols);
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        for b in loadings {
            row.extend((0..q).map(|j| fmt_f64(b[(i, j)])));
        }
        t.push(row);
    }
    t
}

fn var_table(coeffs: &[DMatrix<f64>]) -> Table {
    let q = coeffs.first().map_or(0, |a| a.nrows());
    let mut cols = vec!["lag".to_string(), "row".to_string()];
    cols.extend((1..=q).map(|j| format!("a{j}")));
    let mut t = Table::with_columns("var", cols);
    for (l, a) in coeffs.iter().enumerate() {
        for r in 0..q {
            let mut row = vec![(l + 1).to_string(), (r + 1).to_string()];
            row.extend((0..q).map(|j| fmt_f64(a[(r, j)])));
            t.push(row);
        }
    }
    t
}

fn factor_labels(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("f{j}")).collect()
}

pub fn truth_report(cfg: &RunConfig, sim: &SimulatedPanel, names: &[String]) -> Report {
    let mut r = new_report(Command::Simulate, cfg);
    r.set_meta("truth.i1", one_based_list(&sim.idio_i1));
    r.set_meta("truth.trend", one_based_list(&sim.trend_set));
    r.tables.push(time_table("target", names, &sim.target()));
    r.tables.push(time_table("common", names, &sim.chi));
    r.tables.push(time_table(
        "factors",
        &factor_labels(sim.factors.nrows()),
        &sim.factors,
    ));
    r.tables.push(loadings_table(names, &sim.loadings));
    r.tables.push(var_table(&sim.var_coeffs));
    let mut t = Table::new(
        "series",
        &[
            "series",
            "i1",
            "trend",
            "beta0",
            "rho1",
            "rho2",
            "innovation_var",
            "xi_scale",
        ],
    );
    for (i, name) in names.iter().enumerate() {
        t.push(vec![
            name.clone(),
            (sim.idio_i1.contains(&i) as u8).to_string(),
            (sim.trend_set.contains(&i) as u8).to_string(),
            fmt_f64(sim.beta0[i]),
            fmt_f64(sim.rho1[i]),
            fmt_f64(sim.rho2[i]),
            fmt_f64(sim.innovation_var[i]),
            fmt_f64(sim.xi_scale[i]),
        ]);
    }
    r.tables.push(t);
    r
}

/// Simulates replication 0 of the `[mc]` design and writes `panel.csv` and
/// the truth report.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let mc = cfg.mc.base();
    let sim = simulate_replication(&mc, cfg.mc.seed, 0)?;
    let names = default_names(mc.n);
    let panel_path = cfg.io.out_dir.join("panel.csv");
    write_panel(&panel_path, &names, &sim.panel())?;
    let truth_path = report_path(cfg, "truth");
    truth_report(cfg, &sim, &names).write(&truth_path, cfg.io.format)?;
    Ok(Outcome {
        files: vec![panel_path, truth_path],
        exit_code: EXIT_OK,
        message: format!(
            "simulated {} x {} panel with seed {}",
            mc.n, mc.t_len, cfg.mc.seed
        ),
    })
}

/// Reads the `target` table of a truth report as an n x T matrix.
pub fn read_truth_target(path: &Path) -> Result<DMatrix<f64>> {
    let report = Report::read(path)?;
    let table = report
        .table("target")
        .ok_or_else(|| Error::Config(format!("{} has no target table", path.display())))?;
    Ok(table.to_matrix(1)?.transpose())
}

/// Fits the `[model]` specification to `io.input` and writes the estimate
/// report. Exits with [`EXIT_NOT_CONVERGED`] when EM hits `max_iter`.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Outcome> {
    let input = cfg
        .io
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("estimate needs io.input".into()))?;
    let file = read_panel(input)?;
    let panel = &file.panel;
    let spec = cfg.model.to_spec(panel.n(), panel.t_len())?;
    let fit = em::fit(&spec, panel, &cfg.em.options()?)?;
    let mse = match &cfg.io.truth {
        Some(path) => Some(bench::mse_common(
            &fit.common_with_trend(),
            &read_truth_target(path)?,
            cfg.mc.t_bar,
        )?),
        None => None,
    };

    let mut r = new_report(Command::Estimate, cfg);
    r.set_meta("loglik", fmt_f64(fit.loglik));
    r.set_meta("iterations", fit.iterations.to_string());
    r.set_meta("converged", fit.converged.to_string());
    if let Some(m) = mse {
        r.set_meta("mse", fmt_f64(m));
    }
    let names = &file.names;
    r.tables.push(time_table("common", names, &fit.common));
    r.tables.push(time_table(
        "common_with_trend",
        names,
        &fit.common_with_trend(),
    ));
    r.tables
        .push(time_table("factors", &factor_labels(spec.q), &fit.factors));
    r.tables.push(loadings_table(names, &fit.params.loadings));
    r.tables.push(var_table(&fit.params.var_coeffs));
    let mut t = Table::with_columns("factor_cov", factor_labels(spec.q));
    for row in fit.params.gamma_u.row_iter() {
        t.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }
    r.tables.push(t);
    let mut t = Table::new(
        "series",
        &[
            "series",
            "scale",
            "gamma_e",
            "sigma2_omega",
            "sigma2_eta",
            "sigma2_nu",
            "alpha0",
            "beta0",
        ],
    );
    let p = &fit.params;
    for (i, name) in names.iter().enumerate() {
        t.push(vec![
            name.clone(),
            fmt_f64(fit.scale[i]),
            fmt_f64(p.gamma_e_diag[i]),
            fmt_f64(p.sigma2_omega[i]),
            fmt_f64(p.sigma2_eta[i]),
            fmt_f64(p.sigma2_nu[i]),
            fmt_f64(p.alpha0[i]),
            fmt_f64(p.beta0[i]),
        ]);
    }
    r.tables.push(t);
    let mut t = Table::new("loglik", &["iteration", "loglik"]);
    for (k, v) in fit.history.iter().enumerate() {
        t.push(vec![k.to_string(), fmt_f64(*v)]);
    }
    r.tables.push(t);

    let path = report_path(cfg, "estimate");
    r.write(&path, cfg.io.format)?;
    let mut message = format!("loglik {} after {} iterations", fit.loglik, fit.iterations);
    if let Some(m) = mse {
        message.push_str(&format!(", mse {m}"));
    }
    if !fit.converged {
        message.push_str(" (not converged)");
    }
    Ok(Outcome {
        files: vec![path],
        exit_code: if fit.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        },
        message,
    })
}

pub fn bench_options(cfg: &RunConfig) -> Result<BenchOptions> {
    Ok(BenchOptions {
        replications: cfg.mc.replications,
        seed: cfg.mc.seed,
        jobs: cfg.mc.jobs,
        t_bar: cfg.mc.t_bar,
        em: cfg.em.options()?,
        pc_demean: cfg.mc.pc_demean,
    })
}

pub fn benchmark_report(cfg: &RunConfig, cells: &[CellReport]) -> Report {
    let mut r = new_report(Command::Benchmark, cfg);
    let mut cols = vec![
        "cell",
        "n",
        "t_len",
        "n1",
        "nb",
        "q",
        "s",
        "dist",
        "tau",
        "completed",
        "failed",
        "valid",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for m in Method::ALL {
        cols.push(format!("median_rel_{}", m.name()));
        cols.push(format!("mean_rel_{}", m.name()));
    }
    cols.extend(
        [
            "median_mse_em",
            "mean_mse_em",
            "nonconverged",
            "mean_iterations",
            "seconds",
        ]
        .map(String::from),
    );
    let mut summary = Table::with_columns("cells", cols);

    let mut cols = vec![
        "cell".to_string(),
        "replication".to_string(),
        "mse_em".to_string(),
    ];
    cols.extend(Method::ALL.iter().map(|m| format!("mse_{}", m.name())));
    cols.extend(["iterations", "converged", "loglik"].map(String::from));
    let mut reps = Table::with_columns("replications", cols);
    let mut failures = Table::new("failures", &["cell", "replication", "error"]);

    for (k, cell) in cells.iter().enumerate() {
        let c = &cell.config;
        let s = &cell.summary;
        let mut row = vec![
            (k + 1).to_string(),
            c.n.to_string(),
            c.t_len.to_string(),
            c.n1.to_string(),
            c.nb.to_string(),
            c.q.to_string(),
            c.s.to_string(),
            c.dist.name().to_string(),
            fmt_f64(c.tau),
            s.completed.to_string(),
            s.failed.to_string(),
            s.valid.to_string(),
        ];
        for j in 0..Method::ALL.len() {
            row.push(fmt_f64(s.median_relative[j]));
            row.push(fmt_f64(s.mean_relative[j]));
        }
        row.extend([
            fmt_f64(s.median_mse_em),
            fmt_f64(s.mean_mse_em),
            s.nonconverged.to_string(),
            fmt_f64(s.mean_iterations),
            format!("{:.3}", s.seconds),
        ]);
        summary.push(row);
        for rep in &cell.replications {
            let mut row = vec![
                (k + 1).to_string(),
                rep.replication.to_string(),
                fmt_f64(rep.mse_em),
            ];
            row.extend(rep.mse_competitors.iter().map(|v| fmt_f64(*v)));
            row.extend([
                rep.em_iterations.to_string(),
                rep.converged.to_string(),
                fmt_f64(rep.loglik),
            ]);
            reps.push(row);
        }
        for (rep, msg) in &cell.failures {
            failures.push(vec![(k + 1).to_string(), rep.to_string(), msg.clone()]);
        }
    }
    r.tables.extend([summary, reps, failures]);
    r
}

/// Runs every cell of the `[mc]` grid and writes the benchmark report.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<Outcome> {
    let opts = bench_options(cfg)?;
    let mut cells = Vec::new();
    for mc in cfg.mc.cells() {
        cells.push(bench::run_cell(&mc, &opts)?);
    }
    let path = report_path(cfg, "benchmark");
    benchmark_report(cfg, &cells).write(&path, cfg.io.format)?;
    let invalid = cells.iter().filter(|c| !c.summary.valid).count();
    let mut message = format!(
        "{} cells, {} replications each",
        cells.len(),
        opts.replications
    );
    if invalid > 0 {
        message.push_str(&format!(", {invalid} invalid"));
    }
    Ok(Outcome {
        files: vec![path],
        exit_code: EXIT_OK,
        message,
    })
}

/// Trace diagnostics under the true parameters for each `mc.diagnose_n`.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.mc.diagnose_n.is_empty() {
        return Err(Error::Config("mc.diagnose_n is empty".into()));
    }
    let opts = DiagnoseOptions {
        replications: cfg.mc.replications,
        seed: cfg.mc.seed,
        jobs: cfg.mc.jobs,
        horizon: cfg.mc.horizon,
        kappa: cfg.em.kappa,
        phi: cfg.em.diagnostic_phi(),
        steady_tol: cfg.mc.steady_tol,
    };
    let diags = bench::diagnose(&cfg.mc.base(), &cfg.mc.diagnose_n, &opts)?;
    let mut r = new_report(Command::Diagnose, cfg);
    let mut summary = Table::new("summary", &["n", "init", "steady_period"]);
    let mut traces = Table::new(
        "traces",
        &[
            "n",
            "t",
            "predicted",
            "filtered",
            "smoothed",
            "filtered_scaled",
            "smoothed_scaled",
        ],
    );
    for d in &diags {
        summary.push(vec![
            d.n.to_string(),
            fmt_f64(d.init),
            d.steady_period.map_or(String::new(), |t| t.to_string()),
        ]);
        let fs = d.filtered_scaled();
        let ss = d.smoothed_scaled();
        for t in 0..d.predicted.len() {
            traces.push(vec![
                d.n.to_string(),
                (t + 1).to_string(),
                fmt_f64(d.predicted[t]),
                fmt_f64(d.filtered[t]),
                fmt_f64(d.smoothed[t]),
                fmt_f64(fs[t]),
                fmt_f64(ss[t]),
            ]);
        }
    }
    r.tables.extend([summary, traces]);
    let path = report_path(cfg, "diagnose");
    r.write(&path, cfg.io.format)?;
    Ok(Outcome {
        files: vec![path],
        exit_code: EXIT_OK,
        message: format!("trace diagnostics for n in {:?}", cfg.mc.diagnose_n),
    })
}
