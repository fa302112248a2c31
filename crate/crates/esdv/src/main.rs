//! `esdv` — validate, evaluate and stress-test ecosystem valuation models.
//!
//! Exit codes: 0 success; 1 validation violations or binding errors;
//! 2 I/O or parse failure; 3 evaluation error; 4 sensitivity error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use esdv::engine::{bind, evaluate, EvalError};
use esdv::ingest::{inject_transfers, parse_model_manifest, parse_params_csv, ValuationModel};
use esdv::report::{build_report, inputs_digest, to_canonical_json, to_table, ReportDocument, ValidationSection};
use esdv::sensitivity::{monte_carlo, Distribution, SensitivityConfig};
use esdv::taxonomy::{check_double_counting, validate_cascade};
use esdv::units::ParameterSet;

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_LOAD: u8 = 2;
const EXIT_EVAL: u8 = 3;
const EXIT_SENSITIVITY: u8 = 4;

#[derive(Parser)]
#[command(name = "esdv", version, about = "Urban ecosystem service/disservice valuation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Triangular,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model against cascade, classification and binding rules.
    Validate {
        manifest: PathBuf,
        params: PathBuf,
    },
    /// Evaluate all line items and emit the ledger report.
    Value {
        manifest: PathBuf,
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Enforce the fixed sequence counts of the reference dataset.
        #[arg(long)]
        strict: bool,
    },
    /// Evaluate plus Monte-Carlo propagation over parameter intervals.
    Sensitivity {
        manifest: PathBuf,
        params: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        dist: Dist,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        strict: bool,
    },
}

struct Inputs {
    model: ValuationModel,
    merged: ParameterSet,
    digest: String,
}

fn load(manifest_path: &PathBuf, params_path: &PathBuf) -> Result<Inputs, String> {
    let manifest_bytes =
        std::fs::read(manifest_path).map_err(|e| format!("cannot read {}: {e}", manifest_path.display()))?;
    let params_bytes =
        std::fs::read(params_path).map_err(|e| format!("cannot read {}: {e}", params_path.display()))?;
    let model = parse_model_manifest(&manifest_bytes).map_err(|e| e.to_string())?;
    let params = parse_params_csv(&params_bytes).map_err(|e| e.to_string())?;
    let merged = inject_transfers(&model, &params).map_err(|e| e.to_string())?;
    let digest = inputs_digest(&manifest_bytes, &params_bytes);
    Ok(Inputs { model, merged, digest })
}

/// Runs all validation passes; structural errors surface as Err (exit 2).
fn validate_all(inputs: &Inputs) -> Result<ValidationSection, String> {
    let graph = inputs.model.cascade.to_graph();
    let cascade = validate_cascade(&graph).map_err(|e| e.to_string())?;
    let double_counting = check_double_counting(&graph, &inputs.model.items).map_err(|e| e.to_string())?;
    let binding = match bind(&inputs.model, &inputs.merged) {
        Ok(_) => Vec::new(),
        Err(errors) => errors,
    };
    Ok(ValidationSection::from_parts(&cascade, &double_counting, &binding))
}

fn print_findings(section: &ValidationSection) {
    for v in section.cascade.iter().chain(section.double_counting.iter()) {
        println!("{} [{}] {}", v.code, v.nodes.join(","), v.message);
    }
    for b in &section.binding {
        println!("E-BIND {b}");
    }
}

fn emit(report: &ReportDocument, format: Format, out: Option<&PathBuf>) -> Result<(), String> {
    let text = match format {
        Format::Table => to_table(report),
        Format::Json => to_canonical_json(report),
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn evaluate_validated(inputs: &Inputs, strict: bool) -> Result<ReportDocument, (u8, String)> {
    let validation = validate_all(inputs).map_err(|e| (EXIT_LOAD, e))?;
    if !validation.is_clean() {
        print_findings(&validation);
        return Err((EXIT_VIOLATIONS, "validation failed".to_string()));
    }
    let bound = bind(&inputs.model, &inputs.merged).expect("validation checked binding");
    let (items, ledger) = evaluate(&bound, strict).map_err(|e| match e {
        EvalError::Item { .. } | EvalError::Ledger(_) => (EXIT_EVAL, e.to_string()),
    })?;
    Ok(build_report(
        &inputs.model.region,
        inputs.model.year,
        inputs.digest.clone(),
        &items,
        &ledger,
        validation,
        None,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("esdv: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Validate { manifest, params } => {
            let inputs = load(&manifest, &params).map_err(|e| (EXIT_LOAD, e))?;
            let section = validate_all(&inputs).map_err(|e| (EXIT_LOAD, e))?;
            print_findings(&section);
            if section.is_clean() {
                println!("OK: model is valid");
                Ok(())
            } else {
                Err((EXIT_VIOLATIONS, "validation failed".to_string()))
            }
        }
        Command::Value {
            manifest,
            params,
            out,
            format,
            strict,
        } => {
            let inputs = load(&manifest, &params).map_err(|e| (EXIT_LOAD, e))?;
            let report = evaluate_validated(&inputs, strict)?;
            emit(&report, format, out.as_ref()).map_err(|e| (EXIT_LOAD, e))
        }
        Command::Sensitivity {
            manifest,
            params,
            samples,
            seed,
            dist,
            delta,
            threads,
            out,
            format,
            strict,
        } => {
            let inputs = load(&manifest, &params).map_err(|e| (EXIT_LOAD, e))?;
            let mut report = evaluate_validated(&inputs, strict)?;
            let config = SensitivityConfig {
                samples,
                seed,
                distribution: match dist {
                    Dist::Uniform => Distribution::Uniform,
                    Dist::Triangular => Distribution::Triangular,
                },
                delta,
            };
            // monte_carlo injects transfers itself; hand it the raw CSV set
            let raw = {
                let bytes = std::fs::read(&params).map_err(|e| (EXIT_LOAD, e.to_string()))?;
                parse_params_csv(&bytes).map_err(|e| (EXIT_LOAD, e.to_string()))?
            };
            let sens = monte_carlo(&inputs.model, &raw, &config, strict, threads)
                .map_err(|e| (EXIT_SENSITIVITY, e.to_string()))?;
            report.sensitivity = Some(sens);
            emit(&report, format, out.as_ref()).map_err(|e| (EXIT_LOAD, e))
        }
    }
}
