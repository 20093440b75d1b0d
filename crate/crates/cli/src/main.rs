use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orbilab::experiment::{run_experiment, ExperimentConfig, ExperimentRun};
use orbilab::ground_state::{GroundStateProfile, DEFAULT_R_MAX, DEFAULT_TOL};
use orbilab::report;
use orbilab::{Error, Result};

/// Count solutions of -eps^2 Lap u + u = u^(p-1) on flat orbifolds.
#[derive(Parser)]
#[command(name = "orbilab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the radial ground state of -Lap V + V = V^(p-1) on R^n.
    GroundState(GroundStateArgs),
    /// Run the pipeline at a single eps.
    Solve(RunArgs),
    /// Run the pipeline over a sweep of eps values.
    Sweep(RunArgs),
    /// Re-render tables and plots from a manifest.
    Report(ReportArgs),
}

#[derive(Args)]
struct GroundStateArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_R_MAX)]
    r_max: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with an experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name or path to an orbifold JSON file.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated eps values.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Number of random seeds per eps.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    max_pairs: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rho_scale: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Ground-state cache directory (defaults to <out>/cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run on a single thread.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Manifest written by `solve` or `sweep`.
    #[arg(long)]
    from: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                serde_json::from_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.preset {
            cfg.preset = v.clone();
        }
        if !self.eps.is_empty() {
            cfg.eps = self.eps.clone();
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if self.grid.is_some() {
            cfg.grid = self.grid;
        }
        if let Some(v) = self.seeds {
            cfg.seeds.random = v;
        }
        if let Some(v) = self.rng_seed {
            cfg.seeds.rng_seed = v;
        }
        if let Some(v) = self.max_pairs {
            cfg.seeds.max_pairs = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if self.rho_scale.is_some() {
            cfg.rho_scale = self.rho_scale;
        }
        cfg.cache_dir = Some(
            self.cache_dir
                .clone()
                .unwrap_or_else(|| self.out.join("cache")),
        );
        Ok(cfg)
    }

    fn threads(&self) -> Option<usize> {
        if self.deterministic {
            Some(1)
        } else {
            self.threads
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_falsified_invariant() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GroundState(a) => ground_state(&a),
        Command::Solve(a) => {
            let mut cfg = a.config()?;
            if cfg.eps.len() > 1 {
                return Err(Error::InvalidConfig("solve takes a single --eps".into()));
            }
            if cfg.eps.is_empty() {
                let dim = cfg.orbifold_config()?.dimension;
                let smallest = orbilab::experiment::default_eps(dim)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                cfg.eps = vec![smallest];
            }
            experiment(&cfg, a.threads(), &a.out)
        }
        Command::Sweep(a) => experiment(&a.config()?, a.threads(), &a.out),
        Command::Report(a) => {
            let report = report::read_manifest(&a.from)?;
            for path in report::render_report(&report, &a.out)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn ground_state(a: &GroundStateArgs) -> Result<ExitCode> {
    let profile = GroundStateProfile::cached(&a.out.join("cache"), a.n, a.p, a.r_max, a.tol)?;
    std::fs::create_dir_all(&a.out).map_err(|e| io(&a.out, e))?;
    let csv = a.out.join(format!("ground_state_n{}_p{}.csv", a.n, a.p));
    let file = std::fs::File::create(&csv).map_err(|e| io(&csv, e))?;
    profile
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| io(&csv, e))?;
    println!("n = {}, p = {}", a.n, a.p);
    println!("peak V(0) = {:.10}", profile.peak());
    println!("m(E)      = {:.10}", profile.m_e);
    println!("wrote {}", csv.display());
    Ok(ExitCode::SUCCESS)
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn experiment(cfg: &ExperimentConfig, threads: Option<usize>, out: &Path) -> Result<ExitCode> {
    let run = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| run_experiment(cfg))?,
        None => run_experiment(cfg)?,
    };
    print_summary(&run);
    for path in report::render_run(&run, out)? {
        println!("wrote {}", path.display());
    }
    let mut log: Vec<String> = vec![format!("config {}", serde_json::to_string(cfg)?)];
    log.extend(
        run.timings
            .iter()
            .map(|(stage, s)| format!("{stage}: {s:.2} s")),
    );
    report::append_log(out, &log)?;
    if run.report.falsified.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &run.report.falsified {
            eprintln!("falsified: {f}");
        }
        Ok(ExitCode::from(2))
    }
}

fn print_summary(run: &ExperimentRun) {
    let r = &run.report;
    println!(
        "{}: n = {}, zeta = {}, |Z| components = {}, cat(Z) = {}, m(E)/zeta = {:.6}",
        r.preset,
        r.n,
        r.zeta,
        r.z_components.len(),
        r.cat_z,
        r.cone_level
    );
    for e in &r.sweep {
        match e.m_j {
            Some(m) => println!("eps {}: m(J) ~ {m:.6}", e.eps),
            None => println!("eps {}: no converged solution", e.eps),
        }
        println!("  {}", e.verdict.text);
        match (&e.roundtrip.report, &e.roundtrip.failure) {
            (Some(rt), None) => println!(
                "  roundtrip: max error {:.3e} (tolerance {:.3e}) {}",
                rt.max_error,
                rt.tolerance,
                if e.roundtrip.passed {
                    "passed"
                } else {
                    "failed"
                }
            ),
            (_, Some(why)) => println!("  roundtrip: not completed: {why}"),
            (None, None) => {}
        }
    }
    match r.smallest_passing_eps {
        Some(e) => println!("smallest eps with a passing roundtrip: {e}"),
        None => println!("no swept eps passed the roundtrip"),
    }
}
