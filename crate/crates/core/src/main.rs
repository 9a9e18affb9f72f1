use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fiberqed::cascade::{convergence_report, run_cascade, trace_csv, validate_params};
use fiberqed::config::RunConfig;
use fiberqed::observables::{gnuplot_script, mass_scan, scan_csv};
use fiberqed::output::{write_sidecar, RunMetadata};
use fiberqed::verify::{run_suite, Suite};
use fiberqed::Error;

const EXIT_ASSERTION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "fiberqed", version, about = "Scale-by-scale QED fiber ground states and renormalized mass")]
struct Cli {
    /// Run configuration (flat key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the parameter-constraint slack table.
    Validate,
    /// Run the cascade and write the trace CSV and convergence report.
    Cascade {
        /// Also write Ψ and Φ of every scale as binary sidecars.
        #[arg(long)]
        sidecars: bool,
    },
    /// Curvature and renormalized mass over the configured α and P lists.
    MassScan,
    /// Run probe suites on a fresh cascade.
    Verify {
        /// identities, probes, bounds or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Fail on soft (fitted) probes too.
        #[arg(long)]
        strict: bool,
    },
    /// Write the photon mode grid as CSV.
    GridDump,
}

enum Failure {
    Usage(String),
    Assertion(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Io(_) | Error::Parameter(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

struct Loaded {
    cfg: RunConfig,
    meta: RunMetadata,
    out: PathBuf,
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    Ok(Loaded { meta: RunMetadata::for_config(&text), cfg, out })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_validate(cli: &Cli) -> Result<(), Failure> {
    let l = load(cli)?;
    let report = validate_params(&l.cfg.params);
    print!("{}", report.to_text());
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(Failure::Assertion(format!("constraint '{}' violated: {}", c.name, c.statement))),
    }
}

fn cmd_cascade(cli: &Cli, sidecars: bool) -> Result<(), Failure> {
    let l = load(cli)?;
    let constraints = validate_params(&l.cfg.params);
    if !constraints.all_pass() && !l.cfg.solver.allow_invalid {
        print!("{}", constraints.to_text());
        let c = constraints.first_failure().expect("a failing constraint");
        return Err(Failure::Assertion(format!(
            "constraint '{}' violated (set allow_invalid = true to run anyway)",
            c.name
        )));
    }
    let grid = l.cfg.grid()?;
    let basis = l.cfg.basis(&grid)?;
    let state = run_cascade(&l.cfg.params, &grid, &basis, &l.cfg.solver)?;
    let trace = write(&l.out, "trace.csv", &trace_csv(&state, &l.meta))?;
    let mut report = constraints.to_text();
    match convergence_report(&state, l.cfg.delta) {
        Ok(c) => report.push_str(&c.to_text()),
        Err(e) => report.push_str(&format!("convergence report unavailable: {e}\n")),
    }
    let report_path = write(&l.out, "report.txt", &report)?;
    if sidecars {
        for r in &state.records {
            for (tag, v) in [("psi", &r.psi), ("phi", &r.phi)] {
                let path = l.out.join(format!("{tag}_{}.fqv", r.j));
                write_sidecar(&path, v)?;
            }
        }
    }
    print!("{report}");
    println!("wrote {} and {}", trace.display(), report_path.display());
    Ok(())
}

fn cmd_mass_scan(cli: &Cli) -> Result<(), Failure> {
    let l = load(cli)?;
    if l.cfg.momenta.is_empty() {
        return Err(Failure::Usage("mass-scan needs a non-empty 'momenta' list".into()));
    }
    if l.cfg.alphas.is_empty() {
        return Err(Failure::Usage("mass-scan needs a non-empty 'alphas' list".into()));
    }
    let grid = l.cfg.grid()?;
    let basis = l.cfg.basis(&grid)?;
    let families = mass_scan(
        &l.cfg.alphas,
        &l.cfg.momenta,
        &l.cfg.params,
        &grid,
        &basis,
        l.cfg.scan_max_scale,
        &l.cfg.solver,
        &l.cfg.scan_options(),
    )?;
    let csv = write(&l.out, "mass_scan.csv", &scan_csv(&families, &l.meta))?;
    write(&l.out, "mass_scan.gp", &gnuplot_script("mass_scan.csv"))?;
    let mut failed = 0;
    for f in &families {
        match (&f.rows, f.last_curvature()) {
            (Ok(_), Some(c)) => println!("alpha={:e} P={:?} d2E={c:.10} m_r={:.10}", f.alpha, f.p, 1.0 / c),
            (Err(e), _) => {
                failed += 1;
                eprintln!("alpha={:e} P={:?} failed: {e}", f.alpha, f.p);
            }
            _ => {}
        }
    }
    println!("wrote {}", csv.display());
    if failed == families.len() {
        return Err(Failure::Numerical("every scan family failed".into()));
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, suite: &str, strict: bool) -> Result<(), Failure> {
    let suite = Suite::from_name(suite).map_err(|e| Failure::Usage(e.to_string()))?;
    let l = load(cli)?;
    let report = run_suite(&l.cfg, suite)?;
    print!("{}", report.to_text());
    if report.passed(strict) {
        Ok(())
    } else {
        Err(Failure::Assertion("verification failed".into()))
    }
}

fn cmd_grid_dump(cli: &Cli) -> Result<(), Failure> {
    let l = load(cli)?;
    let grid = l.cfg.grid()?;
    let mut csv = grid.to_csv();
    csv.push_str(&l.meta.trailer());
    let path = write(&l.out, "grid.csv", &csv)?;
    println!("{} modes written to {}", grid.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid --threads {n}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Validate => cmd_validate(&cli),
        Command::Cascade { sidecars } => cmd_cascade(&cli, *sidecars),
        Command::MassScan => cmd_mass_scan(&cli),
        Command::Verify { suite, strict } => cmd_verify(&cli, suite, *strict),
        Command::GridDump => cmd_grid_dump(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Assertion(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
