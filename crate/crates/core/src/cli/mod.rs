//! Configuration-driven command line driver.
//!
//! Every subcommand reads a JSON [`RunConfig`], writes its artifacts into
//! the output directory and maps failures onto exit codes through
//! [`Error::exit_code`].

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{MeshConfig, RunConfig, SchemeEntry};
pub use output::{fmt_float, fmt_rate, CsvTable, Metadata};

use crate::bench::Benchmark;
use crate::coeffs::{LowPenalty, Scheme};
use crate::error::{Error, Result};
use crate::errors::{compute_errors, ErrorReport};
use crate::forms::{assemble_with_coefficients, DgSpace, SchemeSpec};
use crate::linalg::SolveReport;
use crate::mesh::{read_mesh, write_mesh};
use crate::study::{
    convergence, equivalence, level_rates, overshoot, sample_grid, sampled_coercivity, solve_primal, LevelResult,
    Overshoot,
};

#[derive(Debug, Parser)]
#[command(name = "uipdg", version, about = "Interior penalty DG solver for heterogeneous anisotropic diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve once and write the solution, samples and error report.
    Run(CommonArgs),
    /// Error and rate table over a sequence of meshes.
    Convergence(CommonArgs),
    /// Side-by-side error table of every configured scheme.
    Compare(CommonArgs),
    /// Hybrid versus primal discrepancy table; fails above the tolerance.
    Equivalence(CommonArgs),
    /// Write the structured meshes of the configured levels.
    Mesh(CommonArgs),
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Run(a) | Command::Convergence(a) | Command::Compare(a) | Command::Equivalence(a) | Command::Mesh(a) => a,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Convergence(_) => "convergence",
            Command::Compare(_) => "compare",
            Command::Equivalence(_) => "equivalence",
            Command::Mesh(_) => "mesh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Run with alpha0 at or below the coercivity threshold (warns instead of failing).
    #[arg(long)]
    pub allow_low_penalty: bool,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Loads the config named by `args` and applies the flag overrides.
pub fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if args.allow_low_penalty {
        cfg.low_penalty = LowPenalty::Warn;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Files written by a subcommand.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// Runs `command` and returns the files it wrote.
pub fn execute(command: &Command) -> Result<Artifacts> {
    let cfg = load_config(command.args())?;
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;
    let bench = Benchmark::new(cfg.test)?;
    match command {
        Command::Run(_) => cmd_run(&cfg, &bench, &out_dir),
        Command::Convergence(_) => cmd_convergence(&cfg, &bench, &out_dir),
        Command::Compare(_) => cmd_compare(&cfg, &bench, &out_dir),
        Command::Equivalence(_) => cmd_equivalence(&cfg, &bench, &out_dir),
        Command::Mesh(_) => cmd_mesh(&cfg, &bench, &out_dir),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cli.command) {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("uipdg {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn metadata(cfg: &RunConfig, bench: &Benchmark, command: &str) -> Result<Metadata> {
    let mut m = Metadata::new();
    m.push("generator", format!("uipdg {}", env!("CARGO_PKG_VERSION")));
    m.push("command", command);
    m.push("test", bench.case.to_string());
    m.push("alpha0", cfg.alpha0.to_string());
    m.push("tau_form", cfg.tau_form.to_string());
    m.push("mesh_split", cfg.mesh.split.to_string());
    let mut seen = Vec::new();
    for spec in cfg.specs()? {
        if !seen.contains(&spec.scheme) {
            seen.push(spec.scheme);
            m.push(&format!("normalization_{}", spec.scheme), spec.penalty().describe());
        }
    }
    m.push(
        "energy_norm",
        "||kappa^(1/2) grad_h e||^2 + sum_F rho0 ||[e]||^2 over interior and Dirichlet faces, rho0 of each scheme",
    );
    if let Some(a) = &bench.assignment {
        m.push(
            "kellogg_assignment",
            format!(
                "{} (value mismatch {:.2e}, flux mismatch {:.2e})",
                a.describe(),
                a.value_mismatch,
                a.flux_mismatch
            ),
        );
    }
    m.push(
        "solver",
        format!("{} rtol={:e} dense_threshold={}", cfg.solver.method, cfg.solver.rtol, cfg.solver.dense_threshold),
    );
    m.push("seed", cfg.seed.to_string());
    Ok(m)
}

fn timing(cfg: &RunConfig, t: f64) -> String {
    if cfg.record_timing {
        format!("{t:.3}")
    } else {
        "0".to_string()
    }
}

fn scrub_report(cfg: &RunConfig, mut report: SolveReport) -> SolveReport {
    if !cfg.record_timing {
        report.wall_time_s = 0.0;
    }
    report
}

#[derive(Debug, Serialize)]
struct RunReport {
    test: String,
    scheme: String,
    epsilon: i8,
    k: usize,
    alpha0: f64,
    tau_form: String,
    elements: usize,
    errors: ErrorReport,
    solver: SolveReport,
    overshoot: Overshoot,
    sampled_coercivity: f64,
    coercivity_samples: usize,
    seed: u64,
    kellogg_assignment: Option<String>,
}

fn cmd_run(cfg: &RunConfig, bench: &Benchmark, out: &Path) -> Result<Artifacts> {
    let spec = cfg.specs()?[0];
    let mesh = match &cfg.mesh.file {
        Some(path) => read_mesh(path)?,
        None => bench.mesh(cfg.mesh.n0, cfg.mesh.split)?,
    };
    let space = DgSpace::new(mesh, spec.k)?;
    let problem = bench.problem();
    let sol = solve_primal(&space, &problem, &spec, &cfg.solver)?;
    let errors = compute_errors(&space, &sol.u, &bench.exact, &bench.diffusion, &sol.coeffs)?;
    let over = overshoot(&space, &sol.u, bench, cfg.sample_grid)?;
    let coercivity = sampled_coercivity(&space, &bench.diffusion, &spec, cfg.coercivity_samples, cfg.seed)?;
    let meta = metadata(cfg, bench, "run")?;
    let mut files = Vec::new();

    let n = space.n_loc();
    let mut header = vec!["element".to_string(), "subdomain".to_string()];
    header.extend((0..n).map(|i| format!("c{i}")));
    let mut table = CsvTable::new(header);
    let tris = space.mesh().triangles();
    for e in 0..space.num_elements() {
        let mut row = vec![e.to_string(), tris[e].subdomain.to_string()];
        row.extend(sol.u.block(e).iter().map(|c| format!("{c:.17e}")));
        table.push(row);
    }
    files.push(table.write(&out.join("solution.csv"), &meta)?);

    let mut samples = CsvTable::new(vec!["x".into(), "y".into(), "u_h".into()]);
    for (p, _, v) in sample_grid(&space, &sol.u, cfg.sample_grid)? {
        samples.push(vec![fmt_float(p.x), fmt_float(p.y), fmt_float(v)]);
    }
    files.push(samples.write(&out.join("samples.csv"), &meta)?);

    if cfg.dump_matrix {
        let system = assemble_with_coefficients(&space, &problem, spec.eps(), &sol.coeffs)?;
        let path = out.join("matrix.mtx");
        system.matrix.write_matrix_market(&path)?;
        files.push(path);
    }

    let report = RunReport {
        test: bench.case.to_string(),
        scheme: spec.label(),
        epsilon: spec.epsilon,
        k: spec.k,
        alpha0: spec.alpha0,
        tau_form: spec.tau_form.to_string(),
        elements: space.num_elements(),
        errors,
        solver: scrub_report(cfg, sol.report),
        overshoot: over,
        sampled_coercivity: coercivity,
        coercivity_samples: cfg.coercivity_samples,
        seed: cfg.seed,
        kellogg_assignment: bench.assignment.as_ref().map(|a| a.describe()),
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    files.push(path);
    Ok(Artifacts { files })
}

/// Convergence sequences of every configured (scheme, degree) pair.
fn all_sequences(cfg: &RunConfig, bench: &Benchmark) -> Result<Vec<(SchemeSpec, Vec<LevelResult>)>> {
    let levels = cfg.mesh.levels();
    cfg.specs()?
        .into_iter()
        .map(|spec| Ok((spec, convergence(bench, &spec, &levels, cfg.mesh.split, &cfg.solver)?)))
        .collect()
}

fn cmd_convergence(cfg: &RunConfig, bench: &Benchmark, out: &Path) -> Result<Artifacts> {
    let header = [
        "scheme",
        "epsilon",
        "k",
        "level",
        "h",
        "dofs",
        "err_l2",
        "ecr_l2",
        "err_energy",
        "ecr_energy",
        "solver_iters",
        "residual",
        "time_s",
    ];
    let mut table = CsvTable::new(header.iter().map(|s| s.to_string()).collect());
    for (spec, levels) in all_sequences(cfg, bench)? {
        let r_l2 = level_rates(&levels, |e| e.err_l2);
        let r_en = level_rates(&levels, |e| e.err_energy);
        for (i, l) in levels.iter().enumerate() {
            table.push(vec![
                spec.label(),
                spec.epsilon.to_string(),
                spec.k.to_string(),
                l.level.to_string(),
                fmt_float(l.errors.h),
                l.errors.dofs.to_string(),
                fmt_float(l.errors.err_l2),
                fmt_rate(r_l2[i]),
                fmt_float(l.errors.err_energy),
                fmt_rate(r_en[i]),
                l.solver.iterations.to_string(),
                fmt_float(l.solver.relative_residual),
                timing(cfg, l.time_s),
            ]);
        }
    }
    let meta = metadata(cfg, bench, "convergence")?;
    Ok(Artifacts {
        files: vec![table.write(&out.join("convergence.csv"), &meta)?],
    })
}

fn cmd_compare(cfg: &RunConfig, bench: &Benchmark, out: &Path) -> Result<Artifacts> {
    let levels = cfg.mesh.levels();
    let mut header: Vec<String> = ["k", "level", "n", "h", "dofs"].iter().map(|s| s.to_string()).collect();
    for e in &cfg.schemes {
        let label = SchemeSpec {
            scheme: e.scheme,
            epsilon: e.epsilon,
            ..cfg.specs()?[0]
        }
        .label();
        for col in ["err_l2", "ecr_l2", "err_energy", "ecr_energy", "overshoot"] {
            header.push(format!("{label}_{col}"));
        }
    }
    let mut table = CsvTable::new(header);
    for &k in &cfg.degrees {
        let mut columns: Vec<Vec<Vec<String>>> = Vec::new();
        let mut base: Vec<Vec<String>> = Vec::new();
        for e in &cfg.schemes {
            let spec = cfg
                .specs()?
                .into_iter()
                .find(|s| s.scheme == e.scheme && s.epsilon == e.epsilon && s.k == k)
                .expect("every scheme/degree pair has a spec");
            let mut results = Vec::new();
            let mut over = Vec::new();
            for (level, &n) in levels.iter().enumerate() {
                let (space, sol, errors, time_s) = crate::study::run_level(bench, &spec, n, cfg.mesh.split, &cfg.solver)?;
                over.push(overshoot(&space, &sol.u, bench, cfg.sample_grid)?.diagnostic());
                results.push(LevelResult {
                    level,
                    n,
                    errors,
                    solver: sol.report,
                    time_s,
                });
            }
            let r_l2 = level_rates(&results, |e| e.err_l2);
            let r_en = level_rates(&results, |e| e.err_energy);
            if base.is_empty() {
                base = results
                    .iter()
                    .map(|l| {
                        vec![
                            k.to_string(),
                            l.level.to_string(),
                            l.n.to_string(),
                            fmt_float(l.errors.h),
                            l.errors.dofs.to_string(),
                        ]
                    })
                    .collect();
            }
            columns.push(
                results
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        vec![
                            fmt_float(l.errors.err_l2),
                            fmt_rate(r_l2[i]),
                            fmt_float(l.errors.err_energy),
                            fmt_rate(r_en[i]),
                            fmt_float(over[i]),
                        ]
                    })
                    .collect(),
            );
        }
        for (i, mut row) in base.into_iter().enumerate() {
            for col in &columns {
                row.extend(col[i].iter().cloned());
            }
            table.push(row);
        }
    }
    let meta = metadata(cfg, bench, "compare")?;
    Ok(Artifacts {
        files: vec![table.write(&out.join("compare.csv"), &meta)?],
    })
}

fn cmd_equivalence(cfg: &RunConfig, bench: &Benchmark, out: &Path) -> Result<Artifacts> {
    let specs: Vec<SchemeSpec> = cfg.specs()?.into_iter().filter(|s| s.scheme == Scheme::Uip).collect();
    if specs.is_empty() {
        return Err(Error::Config("equivalence needs at least one uip scheme entry".into()));
    }
    let header = [
        "epsilon",
        "k",
        "level",
        "h",
        "dofs",
        "discrepancy",
        "uip_residual",
        "hip_residual",
        "pass",
    ];
    let mut table = CsvTable::new(header.iter().map(|s| s.to_string()).collect());
    let mut worst: f64 = 0.0;
    let problem = bench.problem();
    for spec in &specs {
        for (level, &n) in cfg.mesh.levels().iter().enumerate() {
            let space = DgSpace::new(bench.mesh(n, cfg.mesh.split)?, spec.k)?;
            let eq = equivalence(&space, &problem, spec, &cfg.solver)?;
            worst = worst.max(eq.discrepancy);
            table.push(vec![
                spec.epsilon.to_string(),
                spec.k.to_string(),
                level.to_string(),
                fmt_float(eq.h),
                space.ndof().to_string(),
                fmt_float(eq.discrepancy),
                fmt_float(eq.uip_report.relative_residual),
                fmt_float(eq.hip_report.relative_residual),
                (eq.discrepancy <= cfg.equivalence_tol).to_string(),
            ]);
        }
    }
    let mut meta = metadata(cfg, bench, "equivalence")?;
    meta.push("equivalence_tol", format!("{:e}", cfg.equivalence_tol));
    let path = table.write(&out.join("equivalence.csv"), &meta)?;
    if !(worst <= cfg.equivalence_tol) {
        return Err(Error::Check(format!(
            "hybrid and primal solutions differ by {worst:e} (tolerance {:e}); see {}",
            cfg.equivalence_tol,
            path.display()
        )));
    }
    Ok(Artifacts { files: vec![path] })
}

fn cmd_mesh(cfg: &RunConfig, bench: &Benchmark, out: &Path) -> Result<Artifacts> {
    let mut files = Vec::new();
    for n in cfg.mesh.levels() {
        let path = out.join(format!("mesh_n{n}.msh"));
        write_mesh(&bench.mesh(n, cfg.mesh.split)?, &path)?;
        files.push(path);
    }
    Ok(Artifacts { files })
}
