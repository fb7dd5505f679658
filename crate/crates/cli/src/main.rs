//! Benchmark front end: configure a problem, run solves, emit iteration and
//! timing tables and convergence histories.
//!
//! Exit codes: 0 on success (and convergence where applicable), 1 on
//! configuration errors, 2 when a solve does not converge or a spectrum
//! check fails. Configuration errors produce no output files.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use pdectrl::driver::solve_system;
use pdectrl::kkt::{
    build_instationary_kkt, build_stationary_kkt, SaddleSystem, TimeGrid, TimeScheme,
};
use pdectrl::krylov::SolveReport;
use pdectrl::mesh::build_rect_mesh;
use pdectrl::precond::matching_spectrum_bounds;
use pdectrl::problems::by_name;

#[derive(Parser)]
#[command(name = "pdectrl", version, about = "Saddle-point solvers for PDE-constrained optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single solve; writes report.csv and the residual history.
    Solve(CommonArgs),
    /// Cartesian sweep over k and beta; writes report.csv and prints an
    /// aligned iteration/time table.
    Bench(CommonArgs),
    /// Dense eigenvalue check of the matching Schur approximation
    /// (instances up to total dimension 1000).
    Eigcheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output directory from the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also dump the system blocks in Matrix Market format.
    #[arg(long)]
    export_mm: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Eigcheck(args) => cmd_eigcheck(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<(RunConfig, PathBuf), String> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| format!("invalid configuration: {e}"))?;
    cfg.validate()?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, out_dir))
}

struct Cell {
    k: u32,
    beta: f64,
    n_t: usize,
    scheme: TimeScheme,
}

impl Cell {
    fn name(&self, problem: &str) -> String {
        let mut s = format!("{problem}_k{}_beta{:e}", self.k, self.beta);
        if self.scheme != TimeScheme::Stationary {
            s.push_str(&format!("_nt{}_{}", self.n_t, self.scheme.as_str()));
        }
        s
    }
}

fn build_cell_system(cfg: &RunConfig, cell: &Cell) -> Result<SaddleSystem, String> {
    let np = by_name(&cfg.problem).map_err(|e| e.to_string())?;
    let n = 1usize
        .checked_shl(cell.k)
        .ok_or_else(|| format!("k = {} too large", cell.k))?;
    let mesh = build_rect_mesh(n, n, np.domain).map_err(|e| e.to_string())?;
    let mut problem = np.problem;
    problem.beta = cell.beta;
    match cell.scheme {
        TimeScheme::Stationary => {
            build_stationary_kkt(&problem, &mesh).map_err(|e| e.to_string())
        }
        scheme => {
            let grid =
                TimeGrid::new(0.0, np.defaults.t_f, cell.n_t).map_err(|e| e.to_string())?;
            build_instationary_kkt(&problem, &mesh, &grid, scheme).map_err(|e| e.to_string())
        }
    }
}

fn cells_for(cfg: &RunConfig) -> Result<Vec<Cell>, String> {
    let np = by_name(&cfg.problem).map_err(|e| e.to_string())?;
    let scheme = cfg.scheme(np.defaults.scheme);
    if scheme != TimeScheme::Stationary && np.problem.initial_condition.is_none() {
        return Err(format!(
            "problem '{}' has no initial condition; it only supports scheme = stationary",
            cfg.problem
        ));
    }
    let n_t = cfg.n_t.unwrap_or(np.defaults.n_t.max(2));
    let mut cells = Vec::new();
    for &k in &cfg.k.values() {
        for &beta in &cfg.beta.values() {
            cells.push(Cell { k, beta, n_t, scheme });
        }
    }
    Ok(cells)
}

const REPORT_HEADER: &str = "problem,k,beta,n_t,scheme,iters,converged,setup_s,solve_s";

fn report_row(problem: &str, cell: &Cell, report: &SolveReport) -> String {
    format!(
        "{problem},{},{:e},{},{},{},{},{:.6},{:.6}",
        cell.k,
        cell.beta,
        if cell.scheme == TimeScheme::Stationary { 1 } else { cell.n_t },
        cell.scheme.as_str(),
        report.iterations,
        report.converged,
        report.setup_seconds,
        report.solve_seconds
    )
}

fn write_outputs(
    out_dir: &Path,
    rows: &[String],
    residuals: &[(String, String)],
) -> Result<(), String> {
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let mut csv = String::from(REPORT_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(r);
        csv.push('\n');
    }
    fs::write(out_dir.join("report.csv"), csv).map_err(|e| e.to_string())?;
    for (cell_name, content) in residuals {
        fs::write(out_dir.join(format!("residuals_{cell_name}.csv")), content)
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_solve(args: &CommonArgs) -> Result<u8, String> {
    let (cfg, out_dir) = load_config(args)?;
    let (k, beta) = match (cfg.k.scalar(), cfg.beta.scalar()) {
        (Some(k), Some(b)) => (k, b),
        _ => return Err("solve requires scalar k and beta (lists are for bench)".into()),
    };
    let mut cells = cells_for(&RunConfig {
        k: config::OneOrMany::One(k),
        beta: config::OneOrMany::One(beta),
        ..cfg.clone()
    })?;
    let cell = cells.remove(0);
    let sys = build_cell_system(&cfg, &cell)?;
    if args.export_mm {
        let dir = out_dir.join(format!("blocks_{}", cell.name(&cfg.problem)));
        sys.export_blocks(&dir).map_err(|e| e.to_string())?;
    }
    let (_, report) = solve_system(&sys, &cfg.solve_options()).map_err(|e| e.to_string())?;
    let row = report_row(&cfg.problem, &cell, &report);
    let residuals = vec![(cell.name(&cfg.problem), report.residuals_csv())];
    write_outputs(&out_dir, &[row], &residuals)?;
    println!(
        "{}: {} in {} iterations ({:.3}s setup, {:.3}s solve)",
        cell.name(&cfg.problem),
        if report.converged { "converged" } else { "NOT converged" },
        report.iterations,
        report.setup_seconds,
        report.solve_seconds
    );
    Ok(if report.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_bench(args: &CommonArgs) -> Result<u8, String> {
    let (cfg, out_dir) = load_config(args)?;
    let cells = cells_for(&cfg)?;
    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    let mut table: Vec<(u32, f64, usize, f64, bool)> = Vec::new();
    for cell in &cells {
        match run_cell(&cfg, cell, args.export_mm.then_some(&out_dir)) {
            Ok(report) => {
                rows.push(report_row(&cfg.problem, cell, &report));
                residuals.push((cell.name(&cfg.problem), report.residuals_csv()));
                table.push((
                    cell.k,
                    cell.beta,
                    report.iterations,
                    report.setup_seconds + report.solve_seconds,
                    report.converged,
                ));
            }
            Err(msg) => {
                eprintln!("cell {}: {msg}", cell.name(&cfg.problem));
                rows.push(format!(
                    "{},{},{:e},{},{},0,false,0.000000,0.000000",
                    cfg.problem,
                    cell.k,
                    cell.beta,
                    if cell.scheme == TimeScheme::Stationary { 1 } else { cell.n_t },
                    cell.scheme.as_str()
                ));
                table.push((cell.k, cell.beta, 0, 0.0, false));
            }
        }
    }
    write_outputs(&out_dir, &rows, &residuals)?;
    print_table(&cfg, &table);
    Ok(0)
}

fn run_cell(
    cfg: &RunConfig,
    cell: &Cell,
    export_dir: Option<&PathBuf>,
) -> Result<SolveReport, String> {
    let sys = build_cell_system(cfg, cell)?;
    if let Some(dir) = export_dir {
        let blocks = dir.join(format!("blocks_{}", cell.name(&cfg.problem)));
        sys.export_blocks(&blocks).map_err(|e| e.to_string())?;
    }
    let (_, report) = solve_system(&sys, &cfg.solve_options()).map_err(|e| e.to_string())?;
    Ok(report)
}

/// Aligned table shaped like the reference: one row per k, an
/// iteration/time column pair per beta.
fn print_table(cfg: &RunConfig, cells: &[(u32, f64, usize, f64, bool)]) {
    let ks = cfg.k.values();
    let betas = cfg.beta.values();
    let mut header = format!("{:>4}", "k");
    for b in &betas {
        header.push_str(&format!("  {:>8} {:>8}", format!("b={b:.0e}"), "cpu"));
    }
    println!("{header}");
    for &k in &ks {
        let mut line = format!("{k:>4}");
        for &b in &betas {
            let cell = cells.iter().find(|c| c.0 == k && c.1 == b);
            match cell {
                Some(&(_, _, iters, secs, true)) => {
                    line.push_str(&format!("  {iters:>8} {secs:>8.2}"));
                }
                Some(&(_, _, _, _, false)) => {
                    line.push_str(&format!("  {:>8} {:>8}", "fail", "-"));
                }
                None => line.push_str(&format!("  {:>8} {:>8}", "-", "-")),
            }
        }
        println!("{line}");
    }
}

fn cmd_eigcheck(args: &CommonArgs) -> Result<u8, String> {
    let (cfg, _) = load_config(args)?;
    let (k, beta) = match (cfg.k.scalar(), cfg.beta.scalar()) {
        (Some(k), Some(b)) => (k, b),
        _ => return Err("eigcheck requires scalar k and beta".into()),
    };
    let mut cells = cells_for(&RunConfig {
        k: config::OneOrMany::One(k),
        beta: config::OneOrMany::One(beta),
        ..cfg.clone()
    })?;
    let cell = cells.remove(0);
    let sys = build_cell_system(&cfg, &cell)?;
    if sys.n_total() > 1000 {
        return Err(format!(
            "eigcheck is dense-only: total dimension {} exceeds 1000",
            sys.n_total()
        ));
    }
    let (lo, hi) = matching_spectrum_bounds(&sys).map_err(|e| e.to_string())?;
    println!(
        "{}: schur spectrum min = {lo:.9}, max = {hi:.9}",
        cell.name(&cfg.problem)
    );
    let ok = lo >= 0.5 - 1e-6 && hi <= 1.0 + 1e-6;
    if ok {
        println!("containment [0.5, 1.0]: within tolerance");
        Ok(0)
    } else {
        println!("containment [0.5, 1.0]: VIOLATED");
        Ok(EXIT_NOT_CONVERGED)
    }
}
