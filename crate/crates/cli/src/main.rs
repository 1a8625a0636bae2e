//! `qcur`: figure data, property suites, incompatibility and tomography from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qcur::figures::{bell_diagonal_curve, oneway_scan, schmidt_curve, CurvePoint};
use qcur::incompat::{compatible_set, incompat_measure, smeared_xz_parent, IncompatConfig};
use qcur::infotheory::DephasingMap;
use qcur::io::{fmt_num, parse_assemblage, parse_measurement_set, to_json_string, IncompatReportJson, MonteCarloJson, TomoResultJson};
use qcur::qmat::{bures_fidelity, DensityMatrix};
use qcur::states::{fit_white_noise, phi_plus, phi_state, white_noise_mix};
use qcur::steering::{steering_report, MeasurementSet};
use qcur::suites::{run_suite, Suite};
use qcur::tomo::{mle_reconstruct, monte_carlo_sivp, pauli36_settings, simulate_counts, CoincidenceRecord};
use qcur::QcurError;

#[derive(Parser)]
#[command(name = "qcur", version, about = "Steering witness from the quantum-classical uncertainty relation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TableOutput {
    #[command(flatten)]
    out: Output,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Builtin {
    PauliXz,
    PauliXyz,
    SmearedXz,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Plan {
    Xz,
    Xyz,
}

impl Plan {
    fn measurements(self) -> MeasurementSet {
        match self {
            Plan::Xz => MeasurementSet::pauli_xz(),
            Plan::Xyz => MeasurementSet::pauli_xyz(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Witness along the Schmidt family √q|00> + √(1-q)|11>.
    Fig2b {
        #[arg(long, default_value_t = 0.0)]
        qmin: f64,
        #[arg(long, default_value_t = 1.0)]
        qmax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.026)]
        noise_p: f64,
        #[command(flatten)]
        out: TableOutput,
    },
    /// Witness along the Bell-diagonal family r|Φ+><Φ+| + (1-r)|Φ-><Φ-|.
    Fig2c {
        #[arg(long, default_value_t = 0.0)]
        rmin: f64,
        #[arg(long, default_value_t = 1.0)]
        rmax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.009)]
        noise_plus: f64,
        #[arg(long, default_value_t = 0.013)]
        noise_minus: f64,
        #[command(flatten)]
        out: TableOutput,
    },
    /// Both steering directions over the (s, θ) window, classified into regions I/II/III.
    Oneway {
        #[arg(long, default_value_t = 50)]
        grid_s: usize,
        #[arg(long, default_value_t = 50)]
        grid_theta: usize,
        #[command(flatten)]
        out: TableOutput,
    },
    /// Randomized property suite; exits with 1 if any trial fails.
    Properties {
        /// lhs, gio, ico, wiring, convexity, eur, cptp-regression or postprocess
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Required for every suite except cptp-regression.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Witness report for an assemblage stored as JSON.
    Witness {
        file: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Steering-assisted incompatibility of a measurement set.
    Incompat {
        /// Measurement set JSON; omit when using --builtin.
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        builtin: Option<Builtin>,
        /// Visibility of the smeared X/Z pair.
        #[arg(long, default_value_t = 0.6)]
        eta: f64,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Maximum-likelihood tomography and Monte Carlo witness from coincidence counts.
    Tomo {
        counts: PathBuf,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        /// Alice's measurements for the witness.
        #[arg(long, value_enum, default_value_t = Plan::Xz)]
        plan: Plan,
        #[command(flatten)]
        out: Output,
    },
    /// Synthetic coincidence counts over the 36 polarization settings.
    Simulate {
        /// Schmidt weight of √q|HH> + √(1-q)|VV>.
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// White-noise fraction mixed into the state.
        #[arg(long, default_value_t = 0.0)]
        noise_p: f64,
        /// Expected total counts over all settings.
        #[arg(long, default_value_t = 3.6e5)]
        mean_total: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    SuiteFailed,
}

impl From<QcurError> for Failure {
    fn from(e: QcurError) -> Self {
        match e {
            QcurError::Domain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn emit(out: &Output, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json(out: &Output, v: &impl Serialize) -> CliResult<()> {
    emit(out, &to_json_string(v)?)
}

fn emit_table<T: Serialize>(out: &TableOutput, header: &[&str], rows: &[T], cells: impl Fn(&T) -> Vec<String>) -> CliResult<()> {
    match out.format {
        Format::Json => emit_json(&out.out, &rows),
        Format::Csv => {
            let mut text = header.join(",");
            text.push('\n');
            for row in rows {
                text.push_str(&cells(row).join(","));
                text.push('\n');
            }
            emit(&out.out, &text)
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn check_range(name: &str, lo: f64, hi: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{name} range [{lo}, {hi}] must satisfy 0 <= min <= max <= 1")))
    }
}

fn curve_cells(p: &CurvePoint) -> Vec<String> {
    vec![fmt_num(p.x), fmt_num(p.sivp_ideal), fmt_num(p.sivp_noisy)]
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fig2b { qmin, qmax, steps, noise_p, out } => {
            check_range("q", qmin, qmax)?;
            let curve = schmidt_curve(qmin, qmax, steps, noise_p)?;
            emit_table(&out, &["q", "sivp_ideal", "sivp_noisy"], &curve, curve_cells)
        }
        Command::Fig2c { rmin, rmax, steps, noise_plus, noise_minus, out } => {
            check_range("r", rmin, rmax)?;
            let curve = bell_diagonal_curve(rmin, rmax, steps, noise_plus, noise_minus)?;
            emit_table(&out, &["r", "sivp_ideal", "sivp_noisy"], &curve, curve_cells)
        }
        Command::Oneway { grid_s, grid_theta, out } => {
            let scan = oneway_scan(grid_s, grid_theta)?;
            emit_table(&out, &["s", "theta", "sivp_a_to_b", "sivp_b_to_a", "region"], &scan, |p| {
                vec![
                    fmt_num(p.s),
                    fmt_num(p.theta),
                    fmt_num(p.sivp_a_to_b),
                    fmt_num(p.sivp_b_to_a),
                    p.region.label().to_string(),
                ]
            })
        }
        Command::Properties { suite, trials, seed, out } => {
            let seed = match (seed, suite) {
                (Some(s), _) => s,
                (None, Suite::CptpRegression) => 0,
                (None, _) => return Err(Failure::Usage(format!("suite {suite} needs --seed"))),
            };
            let report = run_suite(suite, trials, seed)?;
            emit_json(&out, &report)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::SuiteFailed)
            }
        }
        Command::Witness { file, out } => {
            let asm = parse_assemblage(&read(&file)?)?;
            let report = steering_report(&asm, &DephasingMap::computational(asm.dim()))?;
            emit_json(&out, &json!({ "violated": report.violated(), "report": report }))
        }
        Command::Incompat { file, builtin, eta, budget, seed, out } => {
            let m = match (file, builtin) {
                (Some(path), _) => parse_measurement_set(&read(&path)?)?,
                (None, Some(Builtin::PauliXz)) => MeasurementSet::pauli_xz(),
                (None, Some(Builtin::PauliXyz)) => MeasurementSet::pauli_xyz(),
                (None, Some(Builtin::SmearedXz)) => compatible_set(&smeared_xz_parent(eta)?),
                (None, None) => return Err(Failure::Usage("give a measurement file or --builtin".into())),
            };
            let config = IncompatConfig {
                budget,
                ..IncompatConfig::new(m.dim(), seed)
            };
            let report = incompat_measure(&m, &config)?;
            emit_json(&out, &IncompatReportJson::from(&report))
        }
        Command::Tomo { counts, reps, seed, plan, out } => {
            let rec = CoincidenceRecord::read_csv(read(&counts)?.as_bytes())?;
            rec.check_pauli36()?;
            let tomo = mle_reconstruct(&rec)?;
            let mc = monte_carlo_sivp(&rec, reps, &plan.measurements(), &DephasingMap::computational(2), seed)?;
            let target = phi_plus();
            let fit = fit_white_noise(&tomo.rho_hat, &target)?;
            emit_json(
                &out,
                &json!({
                    "tomography": TomoResultJson::from(&tomo),
                    "sivp": MonteCarloJson::from(&mc),
                    "fidelity_phi_plus": bures_fidelity(&tomo.rho_hat, &target)?,
                    "noise_fit_phi_plus": { "p": fit.p, "fidelity": fit.fidelity },
                }),
            )
        }
        Command::Simulate { q, noise_p, mean_total, seed, out } => {
            let rho: DensityMatrix = white_noise_mix(&phi_state(q, 0.0)?, noise_p)?;
            let mut rec = simulate_counts(&rho, &pauli36_settings(), mean_total, seed)?;
            rec.flux = None;
            let mut buf = Vec::new();
            rec.write_csv(&mut buf)?;
            emit(&out, &String::from_utf8(buf).expect("csv is utf-8"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SuiteFailed) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
