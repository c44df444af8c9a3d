use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use pell_core::coefficients::{carleson_density, carleson_norm, CarlesonKind};
use pell_core::config::{preset, ExperimentConfig, PRESETS};
use pell_core::ellipticity::{analyze, ComplexMatrix, SphereSearch};
use pell_core::geometry::{dyadic_tents, pullback_map, GraphDomain};
use pell_core::harness::{resolve_ids, run_check, Problem, VerificationReport, Verdict, CONTROL_IDS};
use pell_core::PellError;

/// Numerical laboratory for p-elliptic complex coefficient operators.
#[derive(Parser, Debug)]
#[command(name = "pell", version)]
struct Cli {
    /// Preset name or path to a JSON experiment config.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Number of mesh levels (extends the config's list by halving).
    #[arg(long, global = true)]
    mesh_levels: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; the PELL_OUT environment variable takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ellipticity analysis of a constant matrix given inline or as a file.
    CheckMatrix {
        /// JSON matrix, e.g. '[[[1,1],[0,0]],[[0,0],[1,1]]]', or a path to one.
        matrix: String,
    },
    /// Solve the Dirichlet problem for every mesh and datum of the config.
    Solve,
    /// Run inequality checks and write one JSON report per check.
    Verify {
        /// Check ids or `all`; defaults to the config's own list.
        ids: Vec<String>,
    },
    /// Carleson norms of the coefficient field.
    Carleson,
    /// Summarize a directory of reports.
    Report {
        /// Defaults to the output directory.
        dir: Option<PathBuf>,
    },
    /// List the shipped presets.
    Presets,
}

/// Errors and their exit codes: 2 for bad input, 1 for failed checks or runs.
enum Failure {
    Input(String),
    Run(String),
}

impl From<PellError> for Failure {
    fn from(e: PellError) -> Self {
        match e {
            PellError::Json(_) | PellError::Config(_) | PellError::InvalidMatrix(_) | PellError::Formula(_) => {
                Failure::Input(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::CheckMatrix { matrix } => check_matrix(cli, matrix),
        Command::Solve => solve(cli),
        Command::Verify { ids } => verify(cli, ids),
        Command::Carleson => carleson(cli),
        Command::Report { dir } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => out_dir(cli, None).ok_or_else(|| Failure::Input("no report directory given".into()))?,
            };
            report(&dir)
        }
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    std::env::var_os("PELL_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .or_else(|| cfg.and_then(|c| c.output.clone()))
}

fn require_out(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = out_dir(cli, Some(cfg)).unwrap_or_else(|| PathBuf::from("pell-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let spec = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Input("--config is required".into()))?;
    let path = Path::new(spec);
    let mut cfg = if path.exists() {
        ExperimentConfig::load(path)?
    } else if PRESETS.iter().any(|(n, _)| *n == spec) {
        preset(spec)?
    } else {
        return Err(Failure::Input(format!("'{spec}' is neither a file nor a preset")));
    };
    if let Some(levels) = cli.mesh_levels {
        cfg = cfg.with_mesh_levels(levels)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn check_matrix(cli: &Cli, matrix: &str) -> Outcome {
    let text = if Path::new(matrix).is_file() {
        std::fs::read_to_string(matrix)?
    } else {
        matrix.to_string()
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("malformed matrix JSON: {e}")))?;
    let a = ComplexMatrix::from_json(&value)?;
    let mut search = SphereSearch::default();
    if let Some(seed) = cli.seed {
        search = search.with_seed(seed);
    }
    let report = match analyze(&a, &search) {
        Ok(r) => r,
        Err(e @ PellError::NotElliptic(_)) => {
            println!("not elliptic: {e}");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    println!("lambda  = {:.6}", report.lambda);
    println!("Lambda  = {:.6}", report.upper);
    println!("p0      = {:.6}", report.p0);
    match report.p0_prime {
        Some(v) => println!("p0'     = {v:.6}"),
        None => println!("p0'     = inf"),
    }
    if let Some(mt) = report.mu_tilde {
        println!("mu~     = {mt:.6}");
    }
    if let Some(dir) = out_dir(cli, None) {
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("ellipticity.json"), &report)?;
        std::fs::write(dir.join("ellipticity.csv"), report.to_csv())?;
    }
    Ok(true)
}

fn solve(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = require_out(cli, &cfg)?;
    let mut runs = Vec::new();
    for (level, &mesh) in cfg.meshes.iter().enumerate() {
        let problem = Problem::new(&cfg, cfg.domain.h, mesh, cfg.domain.grading_levels)?;
        for (k, datum) in cfg.data.iter().enumerate() {
            let u = problem.solve(datum)?;
            let file = format!("solution_l{level}_d{k}.bin");
            u.write_binary(&dir.join(&file))?;
            println!(
                "mesh={mesh} datum={k} method={} iterations={} residual={:.3e}",
                u.stats.method, u.stats.iterations, u.stats.relative_residual
            );
            runs.push(json!({ "mesh": mesh, "datum": datum, "file": file, "stats": u.stats }));
        }
        if let Some(profile) = &cfg.graph {
            let graph = GraphDomain::new(problem.domain.clone(), profile.clone(), None)?;
            let pb = pullback_map(&graph, cfg.gamma)?;
            write_json(
                &dir.join(format!("pullback_l{level}.json")),
                &json!({
                    "mesh": mesh,
                    "profile": profile,
                    "lipschitz_bound": graph.lipschitz_l,
                    "gamma": pb.gamma,
                    "min_d0rho0": pb.min_d0rho0,
                }),
            )?;
        }
    }
    write_json(&dir.join("solve.json"), &json!({ "config": cfg.name, "runs": runs }))?;
    Ok(true)
}

fn verify(cli: &Cli, ids: &[String]) -> Outcome {
    let cfg = load_config(cli)?;
    let requested = if ids.is_empty() { cfg.checks.clone() } else { ids.to_vec() };
    if requested.is_empty() {
        return Err(Failure::Input("no check ids given and the config lists none".into()));
    }
    let ids = resolve_ids(&requested)?;
    let dir = require_out(cli, &cfg)?;
    let started = unix_now();
    let clock = Instant::now();
    let mut summary = vec![VerificationReport::CSV_HEADER.to_string()];
    let mut ok = true;
    let mut timings = Vec::new();
    for id in &ids {
        let t = Instant::now();
        let report = run_check(id, &cfg)?;
        timings.push(json!({ "id": id, "seconds": t.elapsed().as_secs_f64() }));
        write_json(&dir.join(format!("{id}.json")), &report)?;
        summary.push(report.csv_row());
        let tag = verdict_str(report.verdict);
        if report.expected_fail {
            println!("{id}: {tag} (control, expected to fail)");
        } else {
            println!("{id}: {tag} fitted={:.4e} variation={:.3}", report.fitted, report.variation);
            ok &= report.passed();
        }
    }
    std::fs::write(dir.join("summary.csv"), summary.join("\n") + "\n")?;
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "config": cfg.name,
            "seed": cfg.seed,
            "checks": ids,
            "started_unix": started,
            "finished_unix": unix_now(),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
            "version": env!("CARGO_PKG_VERSION"),
            "timings": timings,
        }),
    )?;
    Ok(ok)
}

fn carleson(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = require_out(cli, &cfg)?;
    let mut rows = Vec::new();
    for &mesh in &cfg.meshes {
        let problem = Problem::new(&cfg, cfg.domain.h, mesh, cfg.domain.grading_levels)?;
        let d = &problem.domain;
        let tents = dyadic_tents(d, 4);
        let mu = carleson_norm(&carleson_density(&problem.field, d, CarlesonKind::Mu), d, &tents);
        let mu_prime = carleson_norm(&carleson_density(&problem.field, d, CarlesonKind::MuPrime), d, &tents);
        println!("mesh={mesh} mu={:.6e} mu'={:.6e}", mu.norm, mu_prime.norm);
        rows.push(json!({ "mesh": mesh, "mu": mu, "mu_prime": mu_prime }));
    }
    write_json(&dir.join("carleson.json"), &json!({ "config": cfg.name, "levels": rows }))?;
    Ok(true)
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Indeterminate => "indeterminate",
    }
}

fn report(dir: &Path) -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        // other artifacts share the directory; keep only verification reports
        if let Ok(r) = serde_json::from_str::<VerificationReport>(&text) {
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(Failure::Input(format!("no reports in {}", dir.display())));
    }
    let mut ok = true;
    let mut lines = vec![VerificationReport::CSV_HEADER.to_string()];
    println!("{:<28} {:<14} {:>12} {:>10}", "check", "verdict", "fitted", "variation");
    for r in &reports {
        let control = r.expected_fail || CONTROL_IDS.contains(&r.id.as_str());
        let tag = if control {
            format!("{} (ctl)", verdict_str(r.verdict))
        } else {
            verdict_str(r.verdict).to_string()
        };
        println!("{:<28} {:<14} {:>12.4e} {:>10.3}", r.id, tag, r.fitted, r.variation);
        lines.push(r.csv_row());
        if !control {
            ok &= r.passed();
        }
    }
    std::fs::write(dir.join("summary.csv"), lines.join("\n") + "\n")?;
    Ok(ok)
}
