//! Command-line front end: fractal generation and figures, system and
//! operator verification, spectra, model construction, and the
//! deterministic verification suite.

use clap::{Args, Parser, Subcommand};
use loch_core::cnum::{fmt_f64, parse_complex};
use loch_core::hata::{
    branch_table_csv, build_inductive_system, enumerate_branches, generate_approximation,
    render_svg, IfsParams, SvgStyle, SystemVariant,
};
use loch_core::hilbert::HilbertSystemDoc;
use loch_core::measure::MeasureSystemDoc;
use loch_core::operator::{CoherentOperator, OperatorDoc};
use loch_core::order::ChainWitness;
use loch_core::spectral::{multiplicity_model, ModelDoc};
use loch_core::{acceptance, tol};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "loch",
    about = "Desk-scale laboratory for inductive limits of Hilbert spaces and coherent operator nets",
    version
)]
struct Cli {
    /// Reserved; the desk-scale pipelines run single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fractal level sets: tables, figures, and inductive systems.
    Hata {
        #[command(subcommand)]
        command: HataCommand,
    },
    /// Validation of operator nets and systems.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
    /// Clustered node-union spectrum of an operator file.
    Spectrum(SpectrumArgs),
    /// Spectral model construction and re-verification.
    Model {
        #[command(subcommand)]
        command: ModelCommand,
    },
    /// Runs the full verification suite deterministically.
    Suite {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum HataCommand {
    /// Emits the branch table as CSV.
    Gen(HataGenArgs),
    /// Emits an SVG figure of one level set.
    Svg(HataSvgArgs),
    /// Builds one of the three inductive measure-space organisations.
    System(HataSystemArgs),
}

#[derive(Args)]
struct HataGenArgs {
    /// Parameter as RE+IMi, for example 0.3+0.4i.
    #[arg(long, default_value = "0.3+0.4i")]
    c: String,
    /// Level of the approximation.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HataSvgArgs {
    #[arg(long, default_value = "0.3+0.4i")]
    c: String,
    #[arg(long)]
    n: usize,
    /// Sample points per segment polyline.
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HataSystemArgs {
    #[arg(long, default_value = "0.3+0.4i")]
    c: String,
    /// One of linear, branch-indexed, branch-union.
    #[arg(long)]
    variant: String,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Checks an operator file against both coherence characterizations.
    Coherence(FileArg),
    /// Checks commutation of the component projections of a Hilbert system.
    Representing(FileArg),
    /// Checks the axioms of an inductive measure system.
    Measure(FileArg),
}

#[derive(Args)]
struct FileArg {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Builds the multiplicity model of a locally normal operator.
    Build(ModelBuildArgs),
    /// Recomputes the residuals of a stored model.
    Verify(FileArg),
}

#[derive(Args)]
struct ModelBuildArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// JSON file providing the witness chain (field "chain").
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn tolerance() -> f64 {
    std::env::var(tol::TOLERANCE_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| *v > 0.0)
        .unwrap_or(tol::COHERENCE)
}

/// Machine-readable failure report; exit code 1.
fn fail(paper_tag: &str, error: impl std::fmt::Display) -> ExitCode {
    println!(
        "{}",
        serde_json::json!({
            "status": "fail",
            "paper_tag": paper_tag,
            "error": error.to_string(),
        })
    );
    ExitCode::from(1)
}

/// Malformed input (unreadable file or unparsable JSON); exit code 2.
fn malformed(error: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {error}");
    ExitCode::from(2)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Operator files may carry the system inline or as a reference
/// `{"system": {"file": "sys.json"}}` resolved relative to the operator
/// file.
fn read_operator_doc(path: &PathBuf) -> Result<OperatorDoc, String> {
    let mut value: serde_json::Value = read_json(path)?;
    if let Some(file) = value
        .get("system")
        .and_then(|s| s.get("file"))
        .and_then(|f| f.as_str())
    {
        let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        let referenced = base.join(file);
        let system: serde_json::Value = read_json(&referenced)?;
        value["system"] = system;
    }
    serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn params_from(c: &str) -> Result<IfsParams, String> {
    let z = parse_complex(c)?;
    IfsParams::new(z).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        return malformed("--threads must be at least 1");
    }
    match cli.command {
        Command::Hata { command } => match command {
            HataCommand::Gen(args) => {
                let params = match params_from(&args.c) {
                    Ok(p) => p,
                    Err(e) => return fail("e:fef", e),
                };
                let branches = enumerate_branches(&params, args.n);
                let csv = branch_table_csv(&branches);
                match write_out(&args.out, &csv) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => malformed(e),
                }
            }
            HataCommand::Svg(args) => {
                let params = match params_from(&args.c) {
                    Ok(p) => p,
                    Err(e) => return fail("e:fef", e),
                };
                if args.s < 2 {
                    return malformed("--s must be at least 2");
                }
                let approx = generate_approximation(&params, args.n);
                let style = SvgStyle {
                    samples_per_segment: args.s,
                    ..SvgStyle::default()
                };
                let svg = render_svg(&approx, &style);
                match write_out(&Some(args.out), &svg) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => malformed(e),
                }
            }
            HataCommand::System(args) => {
                let params = match params_from(&args.c) {
                    Ok(p) => p,
                    Err(e) => return fail("e:fef", e),
                };
                let variant = match SystemVariant::parse(&args.variant) {
                    Some(v) => v,
                    None => {
                        return malformed(format!(
                            "unknown variant {:?}; use linear, branch-indexed, or branch-union",
                            args.variant
                        ))
                    }
                };
                match build_inductive_system(variant, &params, args.depth) {
                    Ok(hs) => {
                        let mut doc = MeasureSystemDoc::from_system(&hs.system);
                        doc.index.chain = Some(hs.witness.chain.clone());
                        let text = serde_json::to_string_pretty(&doc).unwrap();
                        match write_out(&Some(args.out), &text) {
                            Ok(()) => ExitCode::SUCCESS,
                            Err(e) => malformed(e),
                        }
                    }
                    Err(e) => fail(e.tag(), e),
                }
            }
        },
        Command::Verify { command } => match command {
            VerifyCommand::Coherence(args) => {
                let doc = match read_operator_doc(&args.input) {
                    Ok(d) => d,
                    Err(e) => return malformed(e),
                };
                let (system, blocks) = match doc.build_unchecked() {
                    Ok(x) => x,
                    Err(e) => return fail(e.tag(), e),
                };
                match CoherentOperator::validate_endo(blocks, system, tolerance()) {
                    Ok(op) => {
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "pass",
                                "nodes": op.system().index().elements(),
                                "tolerance": tolerance(),
                            })
                        );
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        use loch_core::operator::OperatorError;
                        let witness = match &e {
                            OperatorError::NotCoherent {
                                lo,
                                hi,
                                direct,
                                block,
                            } => {
                                serde_json::json!({
                                    "pair": [lo, hi],
                                    "restriction_residual": direct,
                                    "block_residual": block,
                                })
                            }
                            _ => serde_json::json!(null),
                        };
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "fail",
                                "paper_tag": e.tag(),
                                "error": e.to_string(),
                                "witness": witness,
                            })
                        );
                        ExitCode::from(1)
                    }
                }
            }
            VerifyCommand::Representing(args) => {
                let doc: HilbertSystemDoc = match read_json(&args.input) {
                    Ok(d) => d,
                    Err(e) => return malformed(e),
                };
                let sys = match doc.build() {
                    Ok(s) => s,
                    Err(e) => return fail(e.tag(), e),
                };
                match sys.check_representing(tolerance()) {
                    Ok(cert) => {
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "pass",
                                "pairs": cert.entries.len(),
                                "max_commutator": cert.max_commutator(),
                            })
                        );
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(e.tag(), e),
                }
            }
            VerifyCommand::Measure(args) => {
                let doc: MeasureSystemDoc = match read_json(&args.input) {
                    Ok(d) => d,
                    Err(e) => return malformed(e),
                };
                match doc.build() {
                    Ok(sys) => {
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "pass",
                                "nodes": sys.nodes().len(),
                            })
                        );
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(e.tag(), e),
                }
            }
        },
        Command::Spectrum(args) => {
            let doc = match read_operator_doc(&args.input) {
                Ok(d) => d,
                Err(e) => return malformed(e),
            };
            let op = match doc.build(tolerance()) {
                Ok(o) => o,
                Err(e) => return fail(e.tag(), e),
            };
            match op.spectrum(tol::EIGEN_CLUSTER) {
                Ok(spec) => {
                    let mut csv = String::from("re,im,nodes\n");
                    for atom in &spec.atoms {
                        csv.push_str(&format!(
                            "{},{},{}\n",
                            fmt_f64(atom.value.re),
                            fmt_f64(atom.value.im),
                            atom.nodes.join(" ")
                        ));
                    }
                    match write_out(&args.out, &csv) {
                        Ok(()) => ExitCode::SUCCESS,
                        Err(e) => malformed(e),
                    }
                }
                Err(e) => fail(e.tag(), e),
            }
        }
        Command::Model { command } => match command {
            ModelCommand::Build(args) => {
                let doc = match read_operator_doc(&args.input) {
                    Ok(d) => d,
                    Err(e) => return malformed(e),
                };
                let op = match doc.build(tolerance()) {
                    Ok(o) => o,
                    Err(e) => return fail(e.tag(), e),
                };
                let witness = match &args.system {
                    Some(path) => {
                        // accept a bare index document or a measure-system
                        // document with the chain nested under its index
                        let value: serde_json::Value = match read_json(path) {
                            Ok(d) => d,
                            Err(e) => return malformed(e),
                        };
                        let chain = value
                            .get("chain")
                            .or_else(|| value.get("index").and_then(|i| i.get("chain")))
                            .cloned();
                        match chain.map(serde_json::from_value::<Vec<String>>) {
                            Some(Ok(chain)) => ChainWitness { chain },
                            _ => return malformed("system file carries no chain"),
                        }
                    }
                    None => match op.system().index().top() {
                        Some(top) => ChainWitness { chain: vec![top] },
                        None => return fail("c2", "index has no top element"),
                    },
                };
                match multiplicity_model(&op, &witness) {
                    Ok(model) => {
                        let doc = ModelDoc::from_model(&model);
                        let text = serde_json::to_string_pretty(&doc).unwrap();
                        if let Err(e) = std::fs::write(&args.out, text) {
                            return malformed(format!("{}: {e}", args.out.display()));
                        }
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "pass",
                                "points": model.points().len(),
                                "multiplicities": model.multiplicities(),
                                "max_residual": model.max_residual(),
                            })
                        );
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(e.tag(), e),
                }
            }
            ModelCommand::Verify(args) => {
                let doc: ModelDoc = match read_json(&args.input) {
                    Ok(d) => d,
                    Err(e) => return malformed(e),
                };
                match doc.verify(tol::MODEL_RESIDUAL) {
                    Ok(residuals) => {
                        let worst = residuals.values().map(|(c, _)| *c).fold(0.0f64, f64::max);
                        println!(
                            "{}",
                            serde_json::json!({
                                "status": "pass",
                                "nodes": residuals.len(),
                                "max_residual": worst,
                            })
                        );
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail("e:nulae", e),
                }
            }
        },
        Command::Suite { seed } => {
            let reports = acceptance::run_all(seed);
            let mut ok = true;
            for r in &reports {
                println!("{}", r.line());
                ok &= r.pass && r.within_budget();
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
