use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsdfm::cli::{self, Command, EXIT_USAGE};
use nsdfm::io::RunConfig;
use nsdfm::Error;

/// Non-stationary dynamic factor models: simulation, EM estimation and
/// Monte Carlo benchmarks.
#[derive(Parser, Debug)]
#[command(name = "nsdfm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration with [model], [em], [mc] and [io] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// csv (sectioned text) or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Override any config key, e.g. `--set mc.tau=0.3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate one panel and write it with its ground truth.
    Simulate(Design),
    /// Fit the model to a panel file by EM.
    Estimate(EstimateArgs),
    /// Monte Carlo comparison of EM with the principal-components estimators.
    Benchmark(BenchArgs),
    /// Filter and smoother covariance traces under the true parameters.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Default)]
struct Design {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_len: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// gaussian or student_t4.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Args, Debug)]
struct EmArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `estimated` or a fixed measurement-error variance.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    standardize: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Panel CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Truth report from `simulate`; adds the MSE to the output.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// One-based positions of series with random-walk idiosyncratic parts.
    #[arg(long, value_delimiter = ',')]
    i1: Option<Vec<usize>>,
    /// One-based positions of series with a local level.
    #[arg(long, value_delimiter = ',')]
    level: Option<Vec<usize>>,
    /// One-based positions of series with a local linear trend.
    #[arg(long, value_delimiter = ',')]
    trend: Option<Vec<usize>>,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    design: Design,
    #[arg(long)]
    replications: Option<usize>,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    design: Design,
    #[arg(long)]
    replications: Option<usize>,
    /// Cross-section sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    horizon: Option<usize>,
}

/// Collected `(key, literal)` overrides.
#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn num<T: ToString>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((key.into(), v.to_string()));
        }
    }
    fn text(&mut self, key: &str, v: Option<&str>) {
        if let Some(v) = v {
            self.0.push((key.into(), toml_string(v)));
        }
    }
    fn list(&mut self, key: &str, v: Option<&Vec<usize>>) {
        if let Some(v) = v {
            let items: Vec<String> = v.iter().map(|i| i.to_string()).collect();
            self.0.push((key.into(), format!("[{}]", items.join(", "))));
        }
    }
    fn design(&mut self, d: &Design) {
        self.num("mc.n", d.n);
        self.num("mc.t_len", d.t_len);
        self.num("mc.q", d.q);
        self.num("mc.s", d.s);
        self.num("mc.d", d.d);
        self.num("mc.n1", d.n1);
        self.num("mc.nb", d.nb);
        self.num("mc.tau", d.tau);
        self.num("mc.theta", d.theta);
        self.num("mc.mu", d.mu);
        self.text("mc.dist", d.dist.as_deref());
        self.num("mc.delta", d.delta);
        self.num("mc.burn_in", d.burn_in);
    }
    fn em(&mut self, e: &EmArgs) {
        self.num("em.tol", e.tol);
        self.num("em.max_iter", e.max_iter);
        if let Some(phi) = &e.phi {
            let lit = if phi == "estimated" {
                toml_string(phi)
            } else {
                phi.clone()
            };
            self.0.push(("em.phi".into(), lit));
        }
        if e.standardize {
            self.0.push(("em.standardize".into(), "true".into()));
        }
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.into()).to_string()
}

fn path_literal(p: &std::path::Path) -> String {
    toml_string(&p.to_string_lossy())
}

fn build_config(cli: &Cli) -> nsdfm::Result<(Command, RunConfig)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut o = Overrides::default();
    o.num("mc.seed", cli.seed);
    o.num("mc.jobs", cli.jobs);
    if let Some(dir) = &cli.out_dir {
        o.0.push(("io.out_dir".into(), path_literal(dir)));
    }
    o.text("io.format", cli.format.as_deref());
    let command = match &cli.command {
        Cmd::Simulate(d) => {
            o.design(d);
            Command::Simulate
        }
        Cmd::Estimate(a) => {
            if let Some(p) = &a.input {
                o.0.push(("io.input".into(), path_literal(p)));
            }
            if let Some(p) = &a.truth {
                o.0.push(("io.truth".into(), path_literal(p)));
            }
            o.num("model.q", a.q);
            o.num("model.s", a.s);
            o.num("model.p", a.p);
            o.list("model.i1", a.i1.as_ref());
            o.list("model.level", a.level.as_ref());
            o.list("model.trend", a.trend.as_ref());
            o.em(&a.em);
            Command::Estimate
        }
        Cmd::Benchmark(a) => {
            o.design(&a.design);
            o.num("mc.replications", a.replications);
            o.em(&a.em);
            Command::Benchmark
        }
        Cmd::Diagnose(a) => {
            o.design(&a.design);
            o.num("mc.replications", a.replications);
            o.list("mc.diagnose_n", a.n_grid.as_ref());
            o.num("mc.horizon", a.horizon);
            Command::Diagnose
        }
    };
    for (k, v) in &o.0 {
        cfg = cfg.with_override(k, v)?;
    }
    for item in &cli.set {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects SECTION.KEY=VALUE, got `{item}`"))
        })?;
        cfg = cfg.with_override(k.trim(), v.trim())?;
    }
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, cfg) = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nsdfm: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match cli::run(command, &cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            eprintln!("nsdfm {}: {}", command.name(), outcome.message);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("nsdfm {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
