//! Batch front end for the polynomial-to-market pipeline.
//!
//! Exit codes: 0 success / verification passed, 1 verification or check
//! failed, 2 usage or input error, 3 oracle inconclusive (no findings or
//! cap exceeded). Errors are emitted as JSON on stderr. Every file output
//! is accompanied by a `<path>.manifest.json` with content hashes of all
//! inputs and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use leontief::gadgets::{self, CompiledMarket};
use leontief::market::{self, EquilibriumCertificate, VerifyMode};
use leontief::nash;
use leontief::ncp;
use leontief::oracle;
use leontief::poly::{self, PolynomialSystem};
use leontief::rational::Rational;
use leontief::reduce;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "leontief",
    version,
    about = "Compile bounded polynomial systems into Leontief exchange markets; lift, verify, project and audit equilibria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Tol,
}

#[derive(Args)]
struct CheckOpts {
    /// Comparison mode for residuals.
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Tolerance used in `tol` mode (rational, e.g. 1/1000000000).
    #[arg(long, default_value = "1/1000000000")]
    eps: String,
}

impl CheckOpts {
    fn parse(&self) -> Result<(VerifyMode, Rational), CliError> {
        let eps = parse_rational(&self.eps)?;
        let mode = match self.mode {
            ModeArg::Exact => VerifyMode::Exact,
            ModeArg::Tol => VerifyMode::Tolerance,
        };
        Ok((mode, eps))
    }
}

#[derive(Args)]
struct GridOpts {
    /// Initial subdivisions per dimension.
    #[arg(long, default_value_t = 8)]
    grid: u32,
    /// Extra halvings per dimension beyond the initial grid.
    #[arg(long, default_value_t = 12)]
    depth: u32,
    /// Acceptance tolerance (rational).
    #[arg(long, default_value = "1/10000")]
    eps: String,
    /// Cap on processed boxes / grid points.
    #[arg(long, default_value_t = 4_000_000)]
    max_boxes: usize,
    /// Cap on returned results.
    #[arg(long, default_value_t = 256)]
    max_results: usize,
}

impl GridOpts {
    fn config(&self) -> Result<oracle::SearchConfig, CliError> {
        Ok(oracle::SearchConfig {
            resolution: self.grid,
            refine_depth: self.depth,
            epsilon: parse_rational(&self.eps)?,
            max_boxes: self.max_boxes,
            max_results: self.max_results,
            polish: true,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compile a polynomial system into a market and its gadget trace.
    Compile {
        system: PathBuf,
        /// Market output path.
        #[arg(short, long)]
        out: PathBuf,
        /// Trace output path.
        #[arg(long)]
        trace: PathBuf,
        /// Also write the homogenized relation system.
        #[arg(long)]
        relations: Option<PathBuf>,
    },
    /// Lift a solution of the compiled system to an equilibrium certificate.
    Lift {
        trace: PathBuf,
        /// Solution document {"z":["num/den",...]}.
        solution: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Verify an equilibrium certificate against a market.
    Verify {
        market: PathBuf,
        /// Certificate path, or `-` for stdin.
        certificate: String,
        #[command(flatten)]
        check: CheckOpts,
    },
    /// Project a verified certificate back to a solution of the system.
    Project {
        trace: PathBuf,
        certificate: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        check: CheckOpts,
    },
    /// Audit the closed-submarket property of every gadget.
    Audit {
        trace: PathBuf,
        certificate: PathBuf,
        #[command(flatten)]
        check: CheckOpts,
    },
    /// 3-player game front end.
    Nash {
        #[command(subcommand)]
        command: NashCommand,
    },
    /// AD-NCP system for PLC markets.
    Ncp {
        #[command(subcommand)]
        command: NcpCommand,
    },
    /// Brute-force ground-truth searches.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Size reports for a system and everything derived from it.
    Stats { system: PathBuf },
}

#[derive(Subcommand)]
enum NashCommand {
    /// Encode the Nash-equilibrium conditions as a polynomial system.
    Encode {
        game: PathBuf,
        /// Cap strategy probabilities at 1/2 (the decision variant).
        #[arg(long)]
        decision: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Best-response check of a mixed profile {"z":[["..."],...]}.
    Verify {
        game: PathBuf,
        profile: PathBuf,
        #[arg(long, default_value = "1/1000000000")]
        eps: String,
    },
}

#[derive(Subcommand)]
enum NcpCommand {
    /// Build the complementarity system for a PLC market.
    Build {
        market: PathBuf,
        /// Treat the input as a Leontief market JSON and encode it as PLC.
        #[arg(long)]
        leontief: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a candidate solution against the system built from a market.
    Check {
        market: PathBuf,
        candidate: PathBuf,
        #[arg(long)]
        leontief: bool,
        #[command(flatten)]
        check: CheckOpts,
    },
    /// Export the existence question as an SMT-LIB (QF_NRA) document.
    ExportEtr {
        market: PathBuf,
        #[arg(long)]
        leontief: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Run the solver named by LEONTIEF_SMT_SOLVER on the document.
        #[arg(long)]
        solve: bool,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Branch-and-prune root search over the system's bounded box.
    Poly {
        system: PathBuf,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Price-simplex grid search for market equilibria.
    Market {
        market: PathBuf,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Price-adjustment heuristic.
    Tatonnement {
        market: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, default_value = "1/10000")]
        eps: String,
        /// Seed mixed into the step size so reruns can escape cycling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Support enumeration for 2-strategy games.
    Nash {
        game: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------

#[derive(Debug)]
struct CliError {
    code: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn usage(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            exit: 2,
        }
    }

    fn failed(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            exit: 1,
        }
    }

    fn inconclusive(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            exit: 3,
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational, CliError> {
    Rational::parse(s).map_err(|e| CliError::usage("bad-rational", e.to_string()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage("io", format!("{}: {e}", path.display())))
}

fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    hex::encode(hasher.finalize())
}

/// Collects inputs/outputs and writes `<first-output>.manifest.json`.
struct Manifest {
    subcommand: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct ManifestDoc<'a> {
    schema: &'static str,
    subcommand: &'a str,
    tool_version: &'static str,
    config: &'a serde_json::Value,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

impl Manifest {
    fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Manifest {
            subcommand: subcommand.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let text = read_text(path)?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&text));
        Ok(text)
    }

    fn read_input_json(&mut self, path: &Path) -> Result<serde_json::Value, CliError> {
        let text = self.read_input(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage("bad-json", format!("{}: {e}", path.display())))
    }

    fn write_output(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        std::fs::write(path, text)
            .map_err(|e| CliError::usage("io", format!("{}: {e}", path.display())))?;
        self.outputs
            .insert(path.display().to_string(), sha256_hex(text));
        Ok(())
    }

    /// Writes the manifest next to the first output; no outputs, no file.
    fn finish(&self) -> Result<(), CliError> {
        let Some(first) = self.outputs.keys().next().cloned() else {
            return Ok(());
        };
        let doc = ManifestDoc {
            schema: "run-manifest/v1",
            subcommand: &self.subcommand,
            tool_version: TOOL_VERSION,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let path = format!("{first}.manifest.json");
        let text = serde_json::to_string_pretty(&doc).expect("manifest serialization");
        std::fs::write(&path, text).map_err(|e| CliError::usage("io", format!("{path}: {e}")))?;
        Ok(())
    }
}

fn emit(
    manifest: &mut Manifest,
    out: Option<&Path>,
    value: &serde_json::Value,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json output");
    match out {
        Some(path) => manifest.write_output(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_system(manifest: &mut Manifest, path: &Path) -> Result<PolynomialSystem, CliError> {
    let text = manifest.read_input(path)?;
    poly::parse_system(&text).map_err(|e| CliError::usage("bad-system", e.to_string()))
}

fn load_market(manifest: &mut Manifest, path: &Path) -> Result<market::MarketInstance, CliError> {
    let doc = manifest.read_input_json(path)?;
    market::market_from_json(&doc).map_err(|e| CliError::usage("bad-market", e.to_string()))
}

fn load_compiled(manifest: &mut Manifest, path: &Path) -> Result<CompiledMarket, CliError> {
    let doc = manifest.read_input_json(path)?;
    let trace =
        gadgets::trace_from_json(&doc).map_err(|e| CliError::usage("bad-trace", e.to_string()))?;
    // the compiler is deterministic, so the market is reproduced from the
    // embedded relation system rather than shipped inside the trace
    let compiled = gadgets::compile_with(&trace.system, &trace.relations)
        .map_err(|e| CliError::usage("bad-trace", e.to_string()))?;
    if compiled.trace != trace {
        return Err(CliError::usage(
            "bad-trace",
            "trace does not match its embedded relation system",
        ));
    }
    Ok(compiled)
}

fn load_certificate(
    manifest: &mut Manifest,
    path_or_dash: &str,
) -> Result<EquilibriumCertificate, CliError> {
    let text = if path_or_dash == "-" {
        use std::io::Read;
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::usage("io", e.to_string()))?;
        manifest.inputs.insert("<stdin>".into(), sha256_hex(&buf));
        buf
    } else {
        manifest.read_input(Path::new(path_or_dash))?
    };
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::usage("bad-json", e.to_string()))?;
    market::certificate_from_json(&doc)
        .map_err(|e| CliError::usage("bad-certificate", e.to_string()))
}

fn load_game(manifest: &mut Manifest, path: &Path) -> Result<nash::Game3, CliError> {
    let doc = manifest.read_input_json(path)?;
    nash::game_from_json(&doc).map_err(|e| CliError::usage("bad-game", e.to_string()))
}

fn load_plc(
    manifest: &mut Manifest,
    path: &Path,
    leontief: bool,
) -> Result<ncp::PlcMarket, CliError> {
    let doc = manifest.read_input_json(path)?;
    if leontief {
        let m = market::market_from_json(&doc)
            .map_err(|e| CliError::usage("bad-market", e.to_string()))?;
        Ok(ncp::plc_from_leontief(&m))
    } else {
        ncp::plc_market_from_json(&doc).map_err(|e| CliError::usage("bad-market", e.to_string()))
    }
}

fn rationals_to_json(values: &[Rational]) -> serde_json::Value {
    serde_json::Value::Array(
        values
            .iter()
            .map(|v| serde_json::Value::String(v.to_string()))
            .collect(),
    )
}

fn solution_from_json(value: &serde_json::Value) -> Result<Vec<Rational>, CliError> {
    let arr = value
        .get("z")
        .and_then(|z| z.as_array())
        .ok_or_else(|| CliError::usage("bad-solution", "expected {\"z\": [\"num/den\", ...]}"))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .ok_or_else(|| CliError::usage("bad-solution", "z entries must be strings"))
                .and_then(parse_rational)
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compile {
            system,
            out,
            trace,
            relations,
        } => {
            let mut manifest = Manifest::new("compile", serde_json::json!({}));
            let sys = load_system(&mut manifest, &system)?;
            let compiled = gadgets::compile(&sys)
                .map_err(|e| CliError::usage("compile-failed", e.to_string()))?;
            emit(
                &mut manifest,
                Some(&out),
                &market::market_to_json(&compiled.market),
            )?;
            emit(
                &mut manifest,
                Some(&trace),
                &gadgets::trace_to_json(&compiled.trace),
            )?;
            if let Some(path) = relations {
                emit(
                    &mut manifest,
                    Some(&path),
                    &reduce::relation_system_to_json(&compiled.trace.relations),
                )?;
            }
            manifest.finish()
        }
        Command::Lift {
            trace,
            solution,
            out,
        } => {
            let mut manifest = Manifest::new("lift", serde_json::json!({}));
            let compiled = load_compiled(&mut manifest, &trace)?;
            let sol_doc = manifest.read_input_json(&solution)?;
            let z = solution_from_json(&sol_doc)?;
            let cert = gadgets::lift(&compiled, &z)
                .map_err(|e| CliError::failed("lift-rejected", e.to_string()))?;
            emit(
                &mut manifest,
                out.as_deref(),
                &market::certificate_to_json(&cert),
            )?;
            manifest.finish()
        }
        Command::Verify {
            market: market_path,
            certificate,
            check,
        } => {
            let mut manifest = Manifest::new("verify", serde_json::json!({}));
            let m = load_market(&mut manifest, &market_path)?;
            let cert = load_certificate(&mut manifest, &certificate)?;
            let (mode, eps) = check.parse()?;
            let report = market::verify_equilibrium(&m, &cert, mode, &eps)
                .map_err(|e| CliError::usage("verify-error", e.to_string()))?;
            let doc = serde_json::to_value(&report).expect("report serialization");
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            if report.ok {
                Ok(())
            } else {
                Err(CliError::failed("not-equilibrium", "certificate rejected"))
            }
        }
        Command::Project {
            trace,
            certificate,
            out,
            check,
        } => {
            let mut manifest = Manifest::new("project", serde_json::json!({}));
            let compiled = load_compiled(&mut manifest, &trace)?;
            let cert_doc = manifest.read_input_json(&certificate)?;
            let cert = market::certificate_from_json(&cert_doc)
                .map_err(|e| CliError::usage("bad-certificate", e.to_string()))?;
            let (mode, eps) = check.parse()?;
            let z = gadgets::project(&compiled, &cert, mode, &eps)
                .map_err(|e| CliError::failed("invalid-certificate", e.to_string()))?;
            emit(
                &mut manifest,
                out.as_deref(),
                &serde_json::json!({"schema": "solution/v1", "z": rationals_to_json(&z)}),
            )?;
            manifest.finish()
        }
        Command::Audit {
            trace,
            certificate,
            check,
        } => {
            let mut manifest = Manifest::new("audit", serde_json::json!({}));
            let compiled = load_compiled(&mut manifest, &trace)?;
            let cert_doc = manifest.read_input_json(&certificate)?;
            let cert = market::certificate_from_json(&cert_doc)
                .map_err(|e| CliError::usage("bad-certificate", e.to_string()))?;
            let (mode, eps) = check.parse()?;
            let audit = gadgets::audit_closed(&compiled, &cert, mode, &eps)
                .map_err(|e| CliError::failed("invalid-certificate", e.to_string()))?;
            let entries: Vec<serde_json::Value> = audit
                .entries
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "label": e.label,
                        "relation": e.relation.map(|k| k + 1),
                        "imbalances": e.imbalances.iter().map(|(g, v)| {
                            serde_json::json!({"good": g + 1, "net": v.to_string()})
                        }).collect::<Vec<_>>(),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "schema": "audit/v1", "ok": audit.ok, "records": entries
                }))
                .unwrap()
            );
            if audit.ok {
                Ok(())
            } else {
                Err(CliError::failed("not-closed", "some gadget is imbalanced"))
            }
        }
        Command::Nash { command } => run_nash(command),
        Command::Ncp { command } => run_ncp(command),
        Command::Oracle { command } => run_oracle(command),
        Command::Stats { system } => {
            let mut manifest = Manifest::new("stats", serde_json::json!({}));
            let sys = load_system(&mut manifest, &system)?;
            let decomposed = reduce::decompose(&sys);
            let homogenized = reduce::reduce_system(&sys);
            let compiled = gadgets::compile(&sys)
                .map_err(|e| CliError::usage("compile-failed", e.to_string()))?;
            let doc = serde_json::json!({
                "schema": "stats/v1",
                "system": sys.system_size(),
                "H": reduce::compute_h(&sys).to_string(),
                "relations": reduce::relation_size(&decomposed),
                "homogenized": reduce::relation_size(&homogenized),
                "market": compiled.market.market_size(),
                "goods": compiled.market.good_count(),
                "agents": compiled.market.agents.len(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            Ok(())
        }
    }
}

fn run_nash(command: NashCommand) -> Result<(), CliError> {
    match command {
        NashCommand::Encode {
            game,
            decision,
            out,
        } => {
            let mut manifest =
                Manifest::new("nash-encode", serde_json::json!({"decision": decision}));
            let g = load_game(&mut manifest, &game)?;
            let normalized = nash::normalize_payoffs(&g);
            let sys = if decision {
                nash::encode_decision_ne(&normalized)
            } else {
                nash::encode_ne(&normalized)
            }
            .map_err(|e| CliError::usage("encode-failed", e.to_string()))?;
            emit(&mut manifest, out.as_deref(), &sys.to_json())?;
            manifest.finish()
        }
        NashCommand::Verify { game, profile, eps } => {
            let mut manifest = Manifest::new("nash-verify", serde_json::json!({}));
            let g = load_game(&mut manifest, &game)?;
            let doc = manifest.read_input_json(&profile)?;
            let arr = doc
                .get("z")
                .and_then(|z| z.as_array())
                .filter(|a| a.len() == 3)
                .ok_or_else(|| {
                    CliError::usage("bad-profile", "expected {\"z\": [[...],[...],[...]]}")
                })?;
            let mut profile: nash::Profile = [vec![], vec![], vec![]];
            for (p, row) in arr.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| CliError::usage("bad-profile", "rows must be arrays"))?;
                for v in row {
                    let s = v.as_str().ok_or_else(|| {
                        CliError::usage("bad-profile", "entries must be strings")
                    })?;
                    profile[p].push(parse_rational(s)?);
                }
            }
            let eps = parse_rational(&eps)?;
            let ok = nash::verify_ne(&g, &profile, &eps)
                .map_err(|e| CliError::usage("bad-profile", e.to_string()))?;
            println!("{}", serde_json::json!({ "ok": ok }));
            if ok {
                Ok(())
            } else {
                Err(CliError::failed("not-equilibrium", "profile rejected"))
            }
        }
    }
}

fn run_ncp(command: NcpCommand) -> Result<(), CliError> {
    match command {
        NcpCommand::Build {
            market,
            leontief,
            out,
        } => {
            let mut manifest =
                Manifest::new("ncp-build", serde_json::json!({"leontief": leontief}));
            let plc = load_plc(&mut manifest, &market, leontief)?;
            let instance =
                ncp::build_ncp(&plc).map_err(|e| CliError::usage("build-failed", e.to_string()))?;
            emit(
                &mut manifest,
                out.as_deref(),
                &ncp::ncp_instance_to_json(&instance),
            )?;
            manifest.finish()
        }
        NcpCommand::Check {
            market,
            candidate,
            leontief,
            check,
        } => {
            let mut manifest =
                Manifest::new("ncp-check", serde_json::json!({"leontief": leontief}));
            let plc = load_plc(&mut manifest, &market, leontief)?;
            let instance =
                ncp::build_ncp(&plc).map_err(|e| CliError::usage("build-failed", e.to_string()))?;
            let cand_doc = manifest.read_input_json(&candidate)?;
            let values = ncp::candidate_from_json(&instance, &cand_doc)
                .map_err(|e| CliError::usage("bad-candidate", e.to_string()))?;
            let (mode, eps) = check.parse()?;
            let mode = match mode {
                VerifyMode::Exact => ncp::CheckMode::Exact,
                VerifyMode::Tolerance => ncp::CheckMode::Tolerance,
            };
            let report = ncp::check_ncp(&instance, &values, mode, &eps)
                .map_err(|e| CliError::usage("check-error", e.to_string()))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::to_value(&report).unwrap()).unwrap()
            );
            if report.ok {
                Ok(())
            } else {
                Err(CliError::failed("ncp-rejected", "candidate rejected"))
            }
        }
        NcpCommand::ExportEtr {
            market,
            leontief,
            out,
            solve,
        } => {
            let mut manifest =
                Manifest::new("ncp-export-etr", serde_json::json!({"leontief": leontief}));
            let plc = load_plc(&mut manifest, &market, leontief)?;
            let instance =
                ncp::build_ncp(&plc).map_err(|e| CliError::usage("build-failed", e.to_string()))?;
            let doc = ncp::export_etr(&instance);
            match &out {
                Some(path) => manifest.write_output(path, &doc)?,
                None => print!("{doc}"),
            }
            manifest.finish()?;
            if solve {
                let solver = std::env::var("LEONTIEF_SMT_SOLVER").map_err(|_| {
                    CliError::usage(
                        "no-solver",
                        "--solve requires LEONTIEF_SMT_SOLVER to name a solver binary",
                    )
                })?;
                let path = out.as_ref().ok_or_else(|| {
                    CliError::usage("no-solver-input", "--solve requires -o FILE")
                })?;
                let output = std::process::Command::new(&solver)
                    .arg(path)
                    .output()
                    .map_err(|e| CliError::usage("solver-failed", format!("{solver}: {e}")))?;
                let stdout = String::from_utf8_lossy(&output.stdout);
                print!("{stdout}");
                if stdout.contains("unsat") {
                    return Err(CliError::failed("unsat", "no equilibrium exists"));
                } else if !stdout.contains("sat") {
                    return Err(CliError::inconclusive("unknown", "solver inconclusive"));
                }
            }
            Ok(())
        }
    }
}

fn run_oracle(command: OracleCommand) -> Result<(), CliError> {
    match command {
        OracleCommand::Poly { system, grid, out } => {
            let mut manifest = Manifest::new(
                "oracle-poly",
                serde_json::json!({"grid": grid.grid, "depth": grid.depth, "eps": grid.eps}),
            );
            let sys = load_system(&mut manifest, &system)?;
            let cfg = grid.config()?;
            let sols = oracle::solve_poly_grid(&sys, &cfg)
                .map_err(|e| CliError::inconclusive("cap-exceeded", e.to_string()))?;
            let doc = serde_json::json!({
                "schema": "oracle-poly/v1",
                "solutions": sols.iter().map(|s| serde_json::json!({
                    "z": rationals_to_json(&s.point),
                    "residual": s.residual.to_string(),
                })).collect::<Vec<_>>(),
            });
            emit(&mut manifest, out.as_deref(), &doc)?;
            manifest.finish()?;
            if sols.is_empty() {
                Err(CliError::inconclusive(
                    "no-solutions",
                    "search found nothing",
                ))
            } else {
                Ok(())
            }
        }
        OracleCommand::Market { market, grid, out } => {
            let mut manifest = Manifest::new(
                "oracle-market",
                serde_json::json!({"grid": grid.grid, "depth": grid.depth, "eps": grid.eps}),
            );
            let m = load_market(&mut manifest, &market)?;
            let cfg = grid.config()?;
            let points = oracle::solve_market_grid(&m, &cfg)
                .map_err(|e| CliError::inconclusive("cap-exceeded", e.to_string()))?;
            let doc = serde_json::json!({
                "schema": "oracle-market/v1",
                "points": points.iter().map(|p| serde_json::json!({
                    "p": rationals_to_json(&p.prices),
                    "score": p.score.to_string(),
                })).collect::<Vec<_>>(),
            });
            emit(&mut manifest, out.as_deref(), &doc)?;
            manifest.finish()?;
            if points.is_empty() {
                Err(CliError::inconclusive("no-points", "search found nothing"))
            } else {
                Ok(())
            }
        }
        OracleCommand::Tatonnement {
            market,
            step,
            max_iters,
            eps,
            seed,
            out,
        } => {
            let mut manifest = Manifest::new(
                "oracle-tatonnement",
                serde_json::json!({"step": step, "max_iters": max_iters, "eps": eps, "seed": seed}),
            );
            let m = load_market(&mut manifest, &market)?;
            let eps = parse_rational(&eps)?;
            let step = step * (1.0 + (seed as f64) * 1e-6);
            let prices = oracle::tatonnement(&m, step, max_iters, &eps)
                .map_err(|e| CliError::inconclusive("not-converged", e.to_string()))?;
            let doc = serde_json::json!({
                "schema": "oracle-tatonnement/v1",
                "p": rationals_to_json(&prices),
            });
            emit(&mut manifest, out.as_deref(), &doc)?;
            manifest.finish()
        }
        OracleCommand::Nash { game, out } => {
            let mut manifest = Manifest::new("oracle-nash", serde_json::json!({}));
            let g = load_game(&mut manifest, &game)?;
            let normalized = nash::normalize_payoffs(&g);
            let sols = oracle::nash_support_enumeration(&normalized)
                .map_err(|e| CliError::usage("oracle-error", e.to_string()))?;
            let doc = serde_json::json!({
                "schema": "oracle-nash/v1",
                "equilibria": sols.iter().map(|s| serde_json::json!({
                    "z": s.profile.iter().map(|row| rationals_to_json(row)).collect::<Vec<_>>(),
                    "exact": s.exact,
                })).collect::<Vec<_>>(),
            });
            emit(&mut manifest, out.as_deref(), &doc)?;
            manifest.finish()?;
            if sols.is_empty() {
                Err(CliError::inconclusive(
                    "no-equilibria",
                    "enumeration found nothing",
                ))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": {"code": err.code, "message": err.message}})
            );
            ExitCode::from(err.exit)
        }
    }
}
