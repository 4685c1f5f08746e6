use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rankflow::linalg::{asymmetry, SYMMETRY_TOL};
use rankflow::par;
use rankflow_cli::error::{CliError, Result, EXIT_INPUT, EXIT_UNEXPECTED};
use rankflow_cli::output::{save_csv, save_json, to_json};
use rankflow_cli::run::{initial_state, run, Outcome, Report};
use rankflow_cli::scenario::{Diagnostic, Scenario};
use rankflow_cli::{demos, structure_input};

#[derive(Parser)]
#[command(name = "rankflow", version, about = "Simulate coupled linear flows and check what they preserve")]
struct Cli {
    /// Print timings and per-verdict lines to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and print their reports.
    Simulate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Trajectory CSV path (single scenario only).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Report JSON path (single scenario only).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads for batches.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check sampled coupling blocks for the rank-preserving form.
    CheckStructure {
        file: PathBuf,
        /// Check the symmetric (square-state) form instead.
        #[arg(long)]
        symmetric: bool,
        /// Exit with code 2 unless the verdict is as given.
        #[arg(long)]
        expect: Option<Expectation>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every applicable diagnostic; exit 2 on an unexpected verdict.
    Verify { file: PathBuf },
    /// Run a built-in scenario.
    Demo {
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write `<name>.csv` and `<name>.json` here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Expectation {
    Pass,
    Fail,
}

#[derive(Serialize)]
struct FailureReport<'a> {
    name: &'a str,
    scenario: &'a Scenario,
    error: String,
    exit_code: i32,
}

fn timed<T>(verbose: bool, what: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    if verbose {
        eprintln!("{what}: {:.3} s", start.elapsed().as_secs_f64());
    }
    out
}

fn print_verdicts(report: &Report) {
    for v in &report.verdicts {
        let expected = match v.expected {
            Some(e) => format!(" (expected {e})"),
            None => String::new(),
        };
        let flag = if v.matches == Some(false) { "  UNEXPECTED" } else { "" };
        eprintln!("{}: {}: holds={}{expected}{flag}", report.name, v.diagnostic.name(), v.holds);
    }
}

/// Runs one scenario and writes its artifacts; failures still leave a
/// report at the report path.
fn execute(s: &Scenario, csv: Option<&Path>, report_path: Option<&Path>, verbose: bool) -> Result<Report> {
    let csv = csv.or(s.output.trajectory_csv.as_deref());
    let report_path = report_path.or(s.output.report_json.as_deref());
    let result = timed(verbose, &format!("{} run", s.label()), || run(s));
    match result {
        Ok(Outcome { report, trajectory }) => {
            if let Some(p) = csv {
                save_csv(&trajectory, p)?;
            }
            if let Some(p) = report_path {
                save_json(&report, p)?;
            }
            if verbose {
                print_verdicts(&report);
            }
            Ok(report)
        }
        Err(e) => {
            if let Some(p) = report_path {
                let failure = FailureReport {
                    name: s.label(),
                    scenario: s,
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                };
                save_json(&failure, p)?;
            }
            Err(e)
        }
    }
}

fn simulate(files: &[PathBuf], csv: Option<PathBuf>, report: Option<PathBuf>, jobs: usize, verbose: bool) -> Result<i32> {
    if files.len() > 1 && (csv.is_some() || report.is_some()) {
        return Err(CliError::input("--csv/--report apply to a single scenario; use each file's `output` for batches"));
    }
    if files.len() == 1 {
        let s = Scenario::load(&files[0])?;
        let r = execute(&s, csv.as_deref(), report.as_deref(), verbose)?;
        print!("{}", to_json(&r));
        return Ok(0);
    }
    let results = par::with_threads(jobs, || {
        par::map(files, |f| Scenario::load(f).and_then(|s| execute(&s, None, None, verbose)))
    });
    let mut reports = Vec::new();
    let mut code = 0;
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => {
                eprintln!("error: {}: {e}", f.display());
                if code == 0 {
                    code = e.exit_code();
                }
            }
        }
    }
    print!("{}", to_json(&reports));
    Ok(code)
}

fn check_structure(file: &Path, symmetric: bool, expect: Option<Expectation>, out: Option<PathBuf>) -> Result<i32> {
    let input = structure_input::load(file)?;
    let report = structure_input::check(&input, symmetric)?;
    if let Some(p) = out {
        save_json(&report, &p)?;
    }
    print!("{}", to_json(&report));
    let passed = if symmetric {
        report.symmetric_form == Some(true)
    } else {
        report.rank_preserving_form
    };
    Ok(match expect {
        Some(Expectation::Pass) if !passed => EXIT_UNEXPECTED,
        Some(Expectation::Fail) if passed => EXIT_UNEXPECTED,
        _ => 0,
    })
}

/// Adds every diagnostic that applies to the scenario's state shape.
fn full_suite(s: &mut Scenario) -> Result<()> {
    let x0 = initial_state(s)?;
    let mut all = vec![
        Diagnostic::Rank,
        Diagnostic::Subspace,
        Diagnostic::RowSubspace,
        Diagnostic::Grassmann,
        Diagnostic::Structure,
    ];
    if x0.is_square() && asymmetry(&x0)? <= SYMMETRY_TOL {
        all.push(Diagnostic::Signature);
    }
    if matches!(x0.rows(), 2 | 3) {
        all.push(Diagnostic::Collinearity);
    }
    for d in all {
        if !s.diagnostics.contains(&d) {
            s.diagnostics.push(d);
        }
    }
    Ok(())
}

fn verify(file: &Path, verbose: bool) -> Result<i32> {
    let mut s = Scenario::load(file)?;
    full_suite(&mut s)?;
    let report = execute(&s, None, None, verbose)?;
    print!("{}", to_json(&report));
    for v in report.mismatches() {
        eprintln!(
            "unexpected: {} holds={} but expected {}",
            v.diagnostic.name(),
            v.holds,
            v.expected.unwrap_or(!v.holds)
        );
    }
    Ok(if report.all_match() { 0 } else { EXIT_UNEXPECTED })
}

fn demo(name: Option<String>, seed: Option<u64>, out_dir: Option<PathBuf>, list: bool, verbose: bool) -> Result<i32> {
    if list {
        for d in demos::DEMOS {
            println!("{:<24} {}", d.name, d.summary);
        }
        return Ok(0);
    }
    let name = name.expect("clap requires a name without --list");
    let mut s = demos::scenario(&name)?;
    if let Some(seed) = seed {
        s.reseed(seed);
    }
    let csv = out_dir.as_ref().map(|d| d.join(format!("{name}.csv")));
    let json = out_dir.as_ref().map(|d| d.join(format!("{name}.json")));
    let report = execute(&s, csv.as_deref(), json.as_deref(), verbose)?;
    print!("{}", to_json(&report));
    for v in report.mismatches() {
        eprintln!("unexpected: {} holds={}", v.diagnostic.name(), v.holds);
    }
    Ok(if report.all_match() { 0 } else { EXIT_UNEXPECTED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let verbose = cli.verbose;
    let result = match cli.command {
        Command::Simulate {
            files,
            csv,
            report,
            jobs,
        } => simulate(&files, csv, report, jobs, verbose),
        Command::CheckStructure {
            file,
            symmetric,
            expect,
            out,
        } => check_structure(&file, symmetric, expect, out),
        Command::Verify { file } => verify(&file, verbose),
        Command::Demo {
            name,
            seed,
            out_dir,
            list,
        } => demo(name, seed, out_dir, list, verbose),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
