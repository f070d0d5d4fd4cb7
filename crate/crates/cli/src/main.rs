use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ildtt::equality::Equality;
use ildtt::fam::Elem;
use ildtt::interp::{Env, Interp, InterpError, Model};
use ildtt::model::{verify_all, Bounds, FamSetStar};
use ildtt::parser::parse_file;
use ildtt::report::{Report, ReportItem};
use ildtt::session::{check_file, CheckedFile};
use ildtt::syntax::Definition;

#[derive(Parser)]
#[command(name = "ildtt", version, about = "Check, normalise and evaluate linear dependent type theory")]
struct Cli {
    /// Normalisation step limit.
    #[arg(long, global = true, env = "ILDTT_STEP_LIMIT", default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    step_limit: u64,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck every definition and assertion of a file.
    Check { file: PathBuf },
    /// Normalise a definition.
    Norm {
        file: PathBuf,
        #[arg(long)]
        term: String,
        /// Print every rewrite step.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate a closed definition in the model bound in the file.
    Eval {
        file: PathBuf,
        #[arg(long)]
        term: String,
    },
    /// Check the model conditions of Fam(Set★) by enumeration.
    VerifyModel {
        #[arg(long, default_value_t = 3)]
        max_index: usize,
        #[arg(long, default_value_t = 4)]
        max_fiber: usize,
    },
    /// Run the theorem suite.
    Theorems {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A usage or input problem: exit status 2.
struct Usage(String);

fn load(file: &Path, step_limit: usize) -> Result<CheckedFile, Usage> {
    let text = std::fs::read_to_string(file).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned());
    let parsed = parse_file(&text, name.as_deref()).map_err(|e| Usage(format!("{}: {e}", file.display())))?;
    Ok(check_file(&parsed, step_limit))
}

/// The checked definition `name`, or a report explaining why there is none.
fn definition(checked: &CheckedFile, name: &str, command: &str, config: serde_json::Value) -> Result<Result<Definition, Report>, Usage> {
    if let Some(d) = checked.signature.def(name) {
        return Ok(Ok(d.clone()));
    }
    match checked.report.items.iter().find(|i| i.name == name) {
        Some(item) => {
            let mut r = Report::new(command, config);
            r.push(ReportItem::fail(name, item.details.clone()));
            Ok(Err(r))
        }
        None => Err(Usage(format!("no definition named `{name}`"))),
    }
}

fn norm(file: &Path, name: &str, trace: bool, step_limit: usize) -> Result<Report, Usage> {
    let checked = load(file, step_limit)?;
    let config = json!({ "file": file.display().to_string(), "term": name, "trace": trace, "step_limit": step_limit });
    let d = match definition(&checked, name, "norm", config.clone())? {
        Ok(d) => d,
        Err(r) => return Ok(r),
    };
    let mut r = Report::new("norm", config);
    match Equality::new(&checked.signature).with_step_limit(step_limit).normalize(&d.term) {
        Ok(n) => {
            if trace {
                let mut cur = d.term.clone();
                for (k, s) in n.trace.iter().enumerate() {
                    let next = s.apply(&cur);
                    r.push(ReportItem::pass(format!("step {}", k + 1), format!("{} at {:?}: {} ⟶ {}", s.rule, s.path, s.before, s.after)));
                    cur = next;
                }
            }
            r.push(ReportItem::pass(name, format!("{} : {} in {} steps", n.term, d.ty, n.trace.len())));
        }
        Err(e) => r.push(ReportItem::fail(name, e.to_string())),
    }
    Ok(r)
}

fn table(v: &Elem) -> String {
    match v {
        Elem::Map(entries) => entries.iter().map(|(k, w)| format!("\n    {k} ↦ {w}")).collect(),
        _ => String::new(),
    }
}

fn eval(file: &Path, name: &str, step_limit: usize) -> Result<Report, Usage> {
    let checked = load(file, step_limit)?;
    let config = json!({ "file": file.display().to_string(), "term": name });
    let d = match definition(&checked, name, "eval", config.clone())? {
        Ok(d) => d,
        Err(r) => return Ok(r),
    };
    let model = Model::from_signature(&checked.signature).map_err(|e| Usage(format!("model bindings: {e}")))?;
    let interp = Interp::new(&checked.signature, &model);
    let mut r = Report::new("eval", config);
    let result = interp.fiber(&d.ty, &Env::new()).and_then(|fiber| Ok((fiber, interp.eval_closed(&d.term)?)));
    match result {
        Ok((fiber, v)) => r.push(ReportItem::pass(name, format!("⟦{}⟧ = {fiber}\n  {name} = {v}{}", d.ty, table(&v)))),
        Err(e @ InterpError::Unbound(_)) => return Err(Usage(format!("model bindings: {e}"))),
        Err(e) => r.push(ReportItem::fail(name, e.to_string())),
    }
    Ok(r)
}

fn verify_model(max_index: usize, max_fiber: usize) -> Result<Report, Usage> {
    let bounds = Bounds::new(max_index, max_fiber);
    let reports = verify_all(&FamSetStar, bounds).map_err(|e| Usage(e.to_string()))?;
    let mut r = Report::new("verify-model", json!({ "max_index": max_index, "max_fiber": max_fiber }));
    for c in &reports {
        r.push(ReportItem::from(c));
    }
    Ok(r)
}

fn run(cli: &Cli) -> Result<Report, Usage> {
    let limit = cli.step_limit as usize;
    match &cli.command {
        Command::Check { file } => Ok(load(file, limit)?.report),
        Command::Norm { file, term, trace } => norm(file, term, *trace, limit),
        Command::Eval { file, term } => eval(file, term, limit),
        Command::VerifyModel { max_index, max_fiber } => verify_model(*max_index, *max_fiber),
        Command::Theorems { seed } => Ok(ildtt::theorems::run_suite(*seed)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.human());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
