//! `netdiff` command line: check, run, extinction, vertex-limit, mass-report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use netdiff::analysis::vertex_limit::{vertex_limit_study, VertexLimitRow};
use netdiff::config::RunConfig;
use netdiff::model::{check_assumptions, ReactionKind};
use netdiff::output::{self, mark_partial, MeshSummary, OutputSink, Summary};
use netdiff::{
    extinction_exponents, extinction_fit_series, Error, ExtinctionExponents, ExtinctionFit,
    TimeSeries, VertexLimitConfig,
};

const THREADS_VAR: &str = "NETDIFF_THREADS";
const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "netdiff",
    version,
    about = "Reaction-diffusion on a domain partitioned by a metric graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` with a dotted key and a JSON value; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate geometry and model assumptions.
    Check(Common),
    /// Simulate and write diagnostics, VTK snapshots and a summary.
    Run(Common),
    /// Simulate and fit the extinction profile.
    Extinction(Common),
    /// Shrinking vertex-region study.
    VertexLimit(Common),
    /// Audit mass conservation of an existing output directory.
    MassReport(Common),
}

enum Failure {
    Validation(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StepFailed { .. }
            | Error::NonConvergence { .. }
            | Error::LineSearchFailed { .. }
            | Error::LinearSolve(_)
            | Error::NonFinite(_)
            | Error::DegenerateFlux { .. }
            | Error::Io(_) => Failure::Solver(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check(c) => check(c),
        Command::Run(c) => run(c).map(|_| ()),
        Command::Extinction(c) => extinction(c),
        Command::VertexLimit(c) => vertex_limit(c),
        Command::MassReport(c) => mass_report(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut overrides = c.overrides.clone();
    if let Some(out) = &c.out {
        let dir = serde_json::to_string(&out.display().to_string()).expect("path serializes");
        overrides.push(format!("outputs.dir={dir}"));
    }
    RunConfig::load(&c.config, &overrides).map_err(|e| match e {
        Error::Io(io) => Failure::Validation(format!("{}: {io}", c.config.display())),
        e => e.into(),
    })
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::Validation(format!(
                    "{THREADS_VAR} must be a positive integer, got '{v}'"
                ))
            }),
        Err(_) => Ok(None),
    }
}

fn check(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let domain = cfg.domain()?;
    let spec = cfg.model_spec(&domain)?;
    println!("config: {}", c.config.display());
    println!("hash: {}", cfg.hash());
    println!("subdomains: {}", domain.subdomains().len());
    println!("edges: {}", domain.edges().len());
    println!("vertices: {}", domain.vertices().len());
    let geometry = domain.validate();
    let violations = check_assumptions(&spec, &domain, cfg.model.p);
    for g in &geometry {
        println!("geometry: {g}");
    }
    for v in &violations {
        println!("assumption: {v}");
    }
    if geometry.is_empty() && violations.is_empty() {
        println!("all assumptions pass");
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{} geometry and {} assumption violations",
            geometry.len(),
            violations.len()
        )))
    }
}

struct Completed {
    cfg: RunConfig,
    series: TimeSeries,
    dir: PathBuf,
}

fn simulate(cfg: RunConfig) -> Result<Completed, Failure> {
    let prepared = cfg.prepare()?;
    let mut problem = prepared.problem;
    if let Some(n) = threads()? {
        problem = problem.with_threads(n)?;
    }
    let domain = &problem.domain;
    for v in check_assumptions(&problem.model, domain, cfg.model.p) {
        log::warn!("{v}");
    }
    let dir = PathBuf::from(&cfg.outputs.dir);
    let steps = prepared.solver.step_times().len();
    let mut sink =
        OutputSink::create(&dir, &cfg.outputs, domain.vertices().len(), steps).map_err(|e| {
            mark_partial(&dir, &format!("could not create outputs: {e}"));
            Failure::Solver(e.to_string())
        })?;
    let mut io_failed = false;
    let result = netdiff::run_with(
        &problem,
        &prepared.initial,
        &prepared.solver,
        false,
        &mut |n, t, s| {
            sink.observe(&problem, n, t, s)
                .inspect_err(|_| io_failed = true)
        },
    );
    let series = match result {
        Ok(s) => s,
        Err(e) => {
            let why = if io_failed {
                format!("output write failed: {e}")
            } else {
                format!("solver failed: {e}")
            };
            drop(sink);
            mark_partial(&dir, &why);
            return Err(Failure::Solver(why));
        }
    };
    let summary = Summary {
        config_hash: cfg.hash(),
        steps: series.stats.steps,
        t_final: *series.times.last().expect("initial time recorded"),
        mesh: MeshSummary::of(&problem),
        final_diagnostics: series.diagnostics.last().expect("initial row").clone(),
        solver: series.stats.clone(),
    };
    sink.finish(&summary).map_err(|e| {
        mark_partial(&dir, &format!("output write failed: {e}"));
        Failure::Solver(e.to_string())
    })?;
    Ok(Completed { cfg, series, dir })
}

fn run(c: &Common) -> Result<Completed, Failure> {
    let done = simulate(load(c)?)?;
    let d = done.series.diagnostics.last().expect("initial row");
    println!("steps: {}", done.series.stats.steps);
    println!("t_final: {:.16e}", d.time);
    println!("total_mass: {:.16e}", d.total_mass);
    println!("X: {:.16e}", d.x);
    println!("sup_u: {:.16e}", d.sup_u);
    println!("sup_w: {:.16e}", d.sup_w);
    println!("newton_iterations: {}", done.series.stats.newton_iterations);
    println!("output: {}", done.dir.display());
    Ok(done)
}

#[derive(Serialize)]
struct ExtinctionReport {
    config_hash: String,
    exponents: ExtinctionExponents,
    fit: ExtinctionFit,
    extinct: bool,
}

fn extinction(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let r = &cfg.model.subdomain_reaction;
    if r.kind != ReactionKind::Power {
        return Err(Failure::Validation(
            "model.subdomain_reaction: extinction needs a power reaction".into(),
        ));
    }
    let exps = extinction_exponents(cfg.model.p, r.exponent, 2)?;
    let done = simulate(cfg)?;
    let fit = extinction_fit_series(&done.series, &exps);
    let report = ExtinctionReport {
        config_hash: done.cfg.hash(),
        exponents: exps,
        extinct: fit.t_extinct.is_some(),
        fit,
    };
    let path = done.dir.join("extinction.json");
    output::write_json(&path, &report).map_err(|e| Failure::Solver(e.to_string()))?;
    println!("s1: {:.16e}", exps.s1);
    println!("s2: {:.16e}", exps.s2);
    match report.fit.t_extinct {
        Some(t) => println!("t_extinct: {t:.16e}"),
        None => println!("t_extinct: none (no extinction before t_end)"),
    }
    println!("fit_slope: {:.16e}", report.fit.slope);
    println!("fit_intercept: {:.16e}", report.fit.intercept);
    println!("fit_r_squared: {:.16e}", report.fit.r_squared);
    println!("monotone: {}", report.fit.monotone);
    println!(
        "max_second_difference: {:.16e}",
        report.fit.max_second_difference
    );
    println!("report: {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct VertexLimitReport {
    config_hash: String,
    rows: Vec<VertexLimitRow>,
    strictly_decreasing: bool,
}

fn vertex_limit(c: &Common) -> Outcome {
    let mut overrides = c.overrides.clone();
    if let Some(out) = &c.out {
        let dir = serde_json::to_string(&out.display().to_string()).expect("path serializes");
        overrides.push(format!("out={dir}"));
    }
    let cfg = VertexLimitConfig::load(&c.config, &overrides)?;
    let setup = cfg.setup()?;
    let rows = vertex_limit_study(&setup, &cfg.deltas)?;
    let decreasing = rows.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
    let dir = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Solver(e.to_string()))?;
    let mut csv =
        String::from("delta,vertex_average,z_limit,vertex_error,edge_error,discrepancy\n");
    println!("delta,vertex_average,z_limit,vertex_error,edge_error,discrepancy");
    for r in &rows {
        let line = format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.delta, r.vertex_average, r.z_limit, r.vertex_error, r.edge_error, r.discrepancy
        );
        println!("{line}");
        csv.push_str(&line);
        csv.push('\n');
    }
    let write = || -> netdiff::Result<()> {
        std::fs::write(dir.join("vertex_limit.csv"), &csv)?;
        output::write_json(
            &dir.join("vertex_limit.json"),
            &VertexLimitReport {
                config_hash: cfg.hash(),
                rows: rows.clone(),
                strictly_decreasing: decreasing,
            },
        )
    };
    write().map_err(|e| {
        mark_partial(&dir, &format!("output write failed: {e}"));
        Failure::Solver(e.to_string())
    })?;
    println!("strictly_decreasing: {decreasing}");
    Ok(())
}

fn mass_report(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let dir = Path::new(&cfg.outputs.dir);
    let csv = dir.join(output::CSV_NAME);
    let (header, rows) = output::read_diagnostics_csv(&csv)
        .map_err(|e| Failure::Validation(format!("{}: {e}", csv.display())))?;
    let audit = output::mass_audit(&header, &rows)?;
    let m = &cfg.model;
    let conserving = m.subdomain_reaction.kind == ReactionKind::Zero
        && m.edge_reaction.kind == ReactionKind::Zero
        && m.sources.subdomain.is_empty()
        && m.sources.edge.is_empty();
    println!("rows: {}", audit.rows);
    println!("initial_mass: {:.16e}", audit.initial_mass);
    println!("final_mass: {:.16e}", audit.final_mass);
    println!("max_abs_drift: {:.16e}", audit.max_abs_drift);
    println!("max_rel_drift: {:.16e}", audit.max_rel_drift);
    println!("conservation_expected: {conserving}");
    let mut problems = Vec::new();
    let summary_path = dir.join(output::SUMMARY_NAME);
    match std::fs::read_to_string(&summary_path) {
        Ok(text) => {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", summary_path.display())))?;
            let recorded = v.get("config_hash").and_then(|h| h.as_str()).unwrap_or("");
            let matches = recorded == cfg.hash();
            println!("config_hash_matches: {matches}");
            if !matches {
                problems.push("summary.json was produced by a different configuration".to_string());
            }
        }
        Err(e) => problems.push(format!("{}: {e}", summary_path.display())),
    }
    if dir.join(output::PARTIAL_MARKER).exists() {
        problems.push("output directory is marked partial".into());
    }
    if conserving {
        let ok = audit.max_rel_drift <= MASS_TOLERANCE;
        println!("conserved: {ok}");
        if !ok {
            problems.push(format!(
                "relative mass drift {:.3e} exceeds {MASS_TOLERANCE:e}",
                audit.max_rel_drift
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(problems.join("; ")))
    }
}
