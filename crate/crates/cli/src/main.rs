//! `qrv`: command-line access to POVM integration, the L1 seminorm and the
//! majorization checkers. Every verb prints JSON; certificates can be saved
//! with `--certificate` and re-checked later with `qrv verify`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde_json::{json, Value};

use qrv_core::catalog::{run_all, run_example, EXAMPLE_IDS};
use qrv_core::io::{parse_function, parse_povm, parse_qrv, parse_space, parse_state, povm_json};
use qrv_core::l1::{bracket, l1_certificate, L1Certificate, DEFAULT_TOL};
use qrv_core::linalg::{operator_norm, State};
use qrv_core::majorization::{
    komiya_separate, majorizes, KomiyaOutcome, MajorizationCertificate, MajorizationOptions, Order,
    SeparatingFunctional,
};
use qrv_core::measure::FiniteMeasureSpace;
use qrv_core::povm::{integrate, rn_derivative, Povm, QuantumRandomVariable};
use qrv_core::suite::{run_section, run_suite, SuiteConfig, SECTIONS};
use qrv_core::Error;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_STALL: u8 = 3;
const EXIT_EXAMPLE_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "qrv", version, about = "Quantum random variables: integration, L1 seminorm, majorization")]
struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    B,
    T,
    S,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::B => Order::B,
            OrderArg::T => Order::T,
            OrderArg::S => Order::S,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integral of f against a POVM, optionally through a full-rank state.
    Integrate {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Induced measure and operator densities for a full-rank state.
    Rn {
        #[arg(long)]
        povm: PathBuf,
        /// Defaults to the maximally mixed state.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// L1 seminorm with a primal decomposition and a certified lower bound.
    Norm1 {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL, value_parser = positive)]
        tol: f64,
        /// Save a self-contained certificate file.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Bracket <f, g I> for a scalar function g.
    Bracket {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
    },
    /// Whether f is majorized by g in order b, t or s.
    Majorize {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_enum, default_value = "b")]
        order: OrderArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random states tried by the refuter for order s.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-7, value_parser = positive)]
        tol: f64,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Separating functional when f is not majorized by g.
    Separate {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Rebuild the worked examples and compare with their expected values.
    PaperExamples {
        /// Print the example ids and exit.
        #[arg(long)]
        list: bool,
        /// Run only these examples.
        #[arg(long = "id")]
        ids: Vec<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Seeded randomized checks of the inequalities and equivalences.
    PropertySuite {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Run one section only.
        #[arg(long)]
        section: Option<String>,
    },
    /// Re-check a certificate file written by norm1, majorize or separate.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Input(msg) => f.write_str(msg),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if !e.is_validation() => EXIT_STALL,
            _ => EXIT_VALIDATION,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// A computed result and the exit status it implies.
struct Outcome {
    value: Value,
    code: u8,
}

impl Outcome {
    fn ok(value: Value) -> Self {
        Self { value, code: 0 }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

/// Prefixes parse errors with the file they came from.
fn in_file<T>(path: &Path, r: qrv_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::InvalidInput(msg) => Failure::Core(Error::InvalidInput(format!("{}: {msg}", path.display()))),
        other => Failure::Core(other),
    })
}

fn load_povm(path: &Path) -> CliResult<Povm> {
    in_file(path, parse_povm(&read(path)?, None))
}

fn load_qrv(path: &Path, space: &FiniteMeasureSpace) -> CliResult<QuantumRandomVariable> {
    let f = in_file(path, parse_qrv(&read(path)?, Some(space)))?;
    if f.len() != space.len() {
        return Err(Failure::Input(format!(
            "{}: {} atoms, expected {}",
            path.display(),
            f.len(),
            space.len()
        )));
    }
    Ok(f)
}

fn load_state(path: Option<&Path>, dim: usize) -> CliResult<State> {
    match path {
        Some(p) => in_file(p, parse_state(&read(p)?)),
        None => Ok(State::maximally_mixed(dim)),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results are serializable")
}

fn save_certificate(path: &Path, kind: &str, inputs: Value, certificate: Value) -> CliResult<()> {
    let file = json!({ "kind": kind, "inputs": inputs, "certificate": certificate });
    write(path, &serde_json::to_string_pretty(&file).expect("serializable"))?;
    info!("certificate written to {}", path.display());
    Ok(())
}

fn majorization_inputs(f: &Path, g: &Path, space: &Path) -> CliResult<(QuantumRandomVariable, QuantumRandomVariable, FiniteMeasureSpace)> {
    let space = in_file(space, parse_space(&read(space)?))?;
    Ok((load_qrv(f, &space)?, load_qrv(g, &space)?, space))
}

fn cmd_integrate(povm: &Path, f: &Path, rho: Option<&Path>) -> CliResult<Outcome> {
    let nu = load_povm(povm)?;
    let f = load_qrv(f, nu.space())?;
    let rho = rho.map(|p| load_state(Some(p), nu.dim())).transpose()?;
    let integral = integrate(&f, &nu, rho.as_ref())?;
    Ok(Outcome::ok(json!({ "integral": to_value(&integral), "norm": operator_norm(&integral) })))
}

fn cmd_rn(povm: &Path, rho: Option<&Path>) -> CliResult<Outcome> {
    let nu = load_povm(povm)?;
    let rho = load_state(rho, nu.dim())?;
    let d = rn_derivative(&nu, &rho)?;
    let densities: Vec<Value> = (0..d.len()).map(|x| to_value(d.density(x))).collect();
    Ok(Outcome::ok(json!({
        "rho": to_value(rho.operator()),
        "induced": d.induced(),
        "densities": densities,
        "sup_norm": d.sup_norm(),
        "inverse_sup_norm": d.inverse_sup_norm(),
    })))
}

fn cmd_norm1(povm: &Path, f_path: &Path, tol: f64, certificate: Option<&Path>) -> CliResult<Outcome> {
    let nu = load_povm(povm)?;
    let f = load_qrv(f_path, nu.space())?;
    let cert = l1_certificate(&f, &nu, tol)?;
    debug!("seminorm {} with gap {}", cert.value, cert.gap);
    if let Some(path) = certificate {
        save_certificate(path, "norm1", json!({ "povm": povm_json(&nu), "f": to_value(&f) }), to_value(&cert))?;
    }
    Ok(Outcome::ok(to_value(&cert)))
}

fn cmd_bracket(povm: &Path, f: &Path, g: &Path) -> CliResult<Outcome> {
    let nu = load_povm(povm)?;
    let f = load_qrv(f, nu.space())?;
    let g = in_file(g, parse_function(&read(g)?, Some(nu.space())))?;
    let b = bracket(&f, &g, &nu)?;
    Ok(Outcome::ok(json!({ "bracket": to_value(&b), "norm": operator_norm(&b) })))
}

#[allow(clippy::too_many_arguments)]
fn cmd_majorize(
    f: &Path,
    g: &Path,
    space: &Path,
    order: Order,
    seed: u64,
    samples: usize,
    tol: f64,
    certificate: Option<&Path>,
) -> CliResult<Outcome> {
    let (f, g, space) = majorization_inputs(f, g, space)?;
    let opts = MajorizationOptions {
        seed,
        state_samples: samples,
        direction_samples: samples,
        tol,
        ..Default::default()
    };
    let cert = majorizes(order, &f, &g, &space, &opts)?;
    if let Some(path) = certificate {
        let inputs = json!({ "space": to_value(&space), "f": to_value(&f), "g": to_value(&g) });
        save_certificate(path, "majorize", inputs, to_value(&cert))?;
    }
    Ok(Outcome::ok(to_value(&cert)))
}

fn cmd_separate(f: &Path, g: &Path, space: &Path, seed: u64, certificate: Option<&Path>) -> CliResult<Outcome> {
    let (f, g, space) = majorization_inputs(f, g, space)?;
    let outcome = komiya_separate(&f, &g, &space, seed)?;
    if let (Some(path), KomiyaOutcome::Separated(sep)) = (certificate, &outcome) {
        let inputs = json!({ "space": to_value(&space), "f": to_value(&f), "g": to_value(&g) });
        save_certificate(path, "separate", inputs, to_value(sep))?;
    }
    Ok(Outcome::ok(to_value(&outcome)))
}

fn cmd_paper_examples(list: bool, ids: &[String], seed: u64) -> CliResult<Outcome> {
    if list {
        return Ok(Outcome::ok(json!(EXAMPLE_IDS)));
    }
    let opts = MajorizationOptions {
        seed,
        ..Default::default()
    };
    let reports = if ids.is_empty() {
        run_all(&opts)?
    } else {
        ids.iter().map(|id| run_example(id, &opts)).collect::<qrv_core::Result<Vec<_>>>()?
    };
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        value: json!({ "pass": pass, "examples": to_value(&reports) }),
        code: if pass { 0 } else { EXIT_EXAMPLE_MISMATCH },
    })
}

fn cmd_property_suite(seed: u64, trials: usize, section: Option<&str>) -> CliResult<Outcome> {
    let cfg = SuiteConfig::new(seed, trials);
    let report = match section {
        None => run_suite(&cfg),
        Some(name) => run_section(&cfg, name).ok_or_else(|| {
            Failure::Input(format!("unknown section {name:?}; known: {}", SECTIONS.join(", ")))
        })?,
    };
    Ok(Outcome {
        code: if report.passed() { 0 } else { EXIT_CHECK_FAILED },
        value: to_value(&report),
    })
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, path: &[&str]) -> CliResult<T> {
    let mut cur = v;
    for key in path {
        cur = cur
            .get(key)
            .ok_or_else(|| Failure::Input(format!("certificate file lacks {}", path.join("."))))?;
    }
    serde_json::from_value(cur.clone())
        .map_err(|e| Failure::Core(Error::InvalidInput(format!("{}: {e}", path.join(".")))))
}

fn cmd_verify(path: &Path) -> CliResult<Outcome> {
    let file: Value = serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::Core(Error::InvalidInput(format!("{}: {e}", path.display()))))?;
    let kind: String = field(&file, &["kind"])?;
    let (valid, details) = match kind.as_str() {
        "norm1" => {
            let nu = in_file(path, parse_povm(&file["inputs"]["povm"].to_string(), None))?;
            let f: QuantumRandomVariable = field(&file, &["inputs", "f"])?;
            let cert: L1Certificate = field(&file, &["certificate"])?;
            let check = cert.verify(&f, &nu)?;
            (check.valid, to_value(&check))
        }
        "majorize" | "separate" => {
            let space: FiniteMeasureSpace = field(&file, &["inputs", "space"])?;
            let f: QuantumRandomVariable = field(&file, &["inputs", "f"])?;
            let g: QuantumRandomVariable = field(&file, &["inputs", "g"])?;
            if kind == "majorize" {
                let cert: MajorizationCertificate = field(&file, &["certificate"])?;
                let valid = cert.verify(&f, &g, &space)?;
                (valid, json!({ "order": cert.order, "verdict": cert.verdict }))
            } else {
                let sep: SeparatingFunctional = field(&file, &["certificate"])?;
                (sep.verify(&f, &g, &space)?, json!({ "margin": sep.margin }))
            }
        }
        other => return Err(Failure::Input(format!("unknown certificate kind {other:?}"))),
    };
    Ok(Outcome {
        value: json!({ "kind": kind, "valid": valid, "details": details }),
        code: if valid { 0 } else { EXIT_CHECK_FAILED },
    })
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Integrate { povm, f, rho } => cmd_integrate(povm, f, rho.as_deref()),
        Command::Rn { povm, rho } => cmd_rn(povm, rho.as_deref()),
        Command::Norm1 { povm, f, tol, certificate } => cmd_norm1(povm, f, *tol, certificate.as_deref()),
        Command::Bracket { povm, f, g } => cmd_bracket(povm, f, g),
        Command::Majorize {
            f,
            g,
            space,
            order,
            seed,
            samples,
            tol,
            certificate,
        } => cmd_majorize(f, g, space, (*order).into(), *seed, *samples, *tol, certificate.as_deref()),
        Command::Separate {
            f,
            g,
            space,
            seed,
            certificate,
        } => cmd_separate(f, g, space, *seed, certificate.as_deref()),
        Command::PaperExamples { list, ids, seed } => cmd_paper_examples(*list, ids, *seed),
        Command::PropertySuite { seed, trials, section } => cmd_property_suite(*seed, *trials, section.as_deref()),
        Command::Verify { certificate } => cmd_verify(certificate),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QRV_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|out| {
        let text = serde_json::to_string_pretty(&out.value).expect("serializable");
        match &cli.output {
            Some(path) => write(path, &text)?,
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            None => {
                let mut out = std::io::stdout().lock();
                if let Err(e) = writeln!(out, "{text}") {
                    if e.kind() != std::io::ErrorKind::BrokenPipe {
                        return Err(Failure::Io(PathBuf::from("<stdout>"), e));
                    }
                }
            }
        }
        Ok(out.code)
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
