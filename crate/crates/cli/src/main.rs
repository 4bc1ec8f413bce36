use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tsflow_catalog::{CatalogError, CompetencyQuery, QueryArgs, Store, STORE_ENV};
use tsflow_core::document::{parse_document, validate, DocumentError, Stage, ValidationReport};
use tsflow_core::engine::{best_model, execute, EngineError, EngineOptions, RunBundle, RunStatus};
use tsflow_core::vocabulary::load_vocabulary;

#[derive(Parser)]
#[command(name = "tsflow", version, about = "Validate, run and serve tswf-schema workflows")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a workflow document.
    Validate { file: PathBuf },
    /// Execute a workflow document against local data.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        horizon: u64,
        #[arg(long, default_value = ".")]
        data_root: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
        /// Forecast from models whose optimizer did not converge.
        #[arg(long)]
        allow_unconverged: bool,
    },
    /// Start the catalog HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = STORE_ENV, default_value = "./store")]
        store: PathBuf,
        #[arg(long, default_value = ".")]
        data_root: PathBuf,
    },
    /// Add a document to a catalog.
    Import {
        /// Local path or http(s) URL of the document.
        source: String,
        /// Replace an entry stored with different content.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        target: Target,
    },
    /// Answer a competency question (cq01..cq10).
    Query {
        cq: String,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        term: Option<String>,
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        metric: Option<String>,
        #[command(flatten)]
        target: Target,
    },
}

/// Where import and query go: a running service, or a store on disk.
#[derive(Args)]
struct Target {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    url: String,
    /// Work on the store directly instead of a service.
    #[arg(long)]
    offline: bool,
    #[arg(long, env = STORE_ENV, default_value = "./store")]
    store: PathBuf,
}

/// A failed command: message for stderr and the exit code to return.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

type Outcome = Result<u8, Failure>;

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json serializes"));
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))
}

fn print_report(report: &ValidationReport, json: bool) {
    if json {
        print_json(&serde_json::to_value(report).expect("report serializes"));
        return;
    }
    let errors = report.error_count();
    let warnings = report.diagnostics.len() - errors;
    let verdict = if report.valid { "valid" } else { "invalid" };
    println!("{verdict}: {errors} error(s), {warnings} warning(s)");
    for d in &report.diagnostics {
        let path = if d.path.is_empty() { "/" } else { d.path.as_str() };
        println!("  {:<8} {}  {}  {}", format!("{:?}", d.severity).to_lowercase(), path, d.code, d.message);
    }
}

fn cmd_validate(file: &Path, json: bool) -> Outcome {
    let text = read(file)?;
    let report = match parse_document(&text) {
        Ok(doc) => validate(&doc, load_vocabulary()),
        Err(e @ DocumentError::Syntax { .. }) => {
            print_report(&e.to_report(), json);
            return Ok(2);
        }
        Err(e) => e.to_report(),
    };
    print_report(&report, json);
    Ok(if report.valid { 0 } else { 1 })
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Input => "input",
        Stage::Preprocessing => "preprocessing",
        Stage::Plots => "plots",
        Stage::InformationAnalysis => "information analysis",
        Stage::StationaryAnalysis => "stationary analysis",
        Stage::Models => "models",
        Stage::Outputs => "outputs",
    }
}

/// Model → metric → value, in first-seen order of metrics.
fn metric_table(bundle: &RunBundle) -> (Vec<String>, BTreeMap<String, BTreeMap<String, f64>>) {
    let mut metrics = Vec::new();
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for m in bundle.measure_values() {
        let Some(model) = &m.model else { continue };
        if !metrics.contains(&m.measure) {
            metrics.push(m.measure.clone());
        }
        table.entry(model.clone()).or_default().insert(m.measure.clone(), m.value);
    }
    (metrics, table)
}

fn print_summary(bundle: &RunBundle, bundle_path: &Path, json: bool) {
    let (metrics, table) = metric_table(bundle);
    let best: BTreeMap<&str, Value> = metrics
        .iter()
        .filter_map(|m| best_model(bundle, m).ok().map(|b| (m.as_str(), json!(b))))
        .collect();
    if json {
        print_json(&json!({
            "workflow_id": bundle.workflow_id,
            "run_id": bundle.run_id,
            "status": bundle.status,
            "steps": bundle.steps.len(),
            "errors": bundle.steps.iter().filter(|s| s.outcome.is_error()).count(),
            "bundle": bundle_path,
            "metrics": table,
            "best": best,
            "warnings": bundle.warnings,
        }));
        return;
    }
    println!("workflow  {}", bundle.workflow_id);
    println!("run       {}", bundle.run_id);
    println!("status    {:?} ({} steps)", bundle.status, bundle.steps.len());
    println!("bundle    {}", bundle_path.display());
    println!();
    println!("{:<22} {:>5} {:>6}", "stage", "steps", "errors");
    let mut stages: Vec<Stage> = Vec::new();
    for s in &bundle.steps {
        if !stages.contains(&s.stage) {
            stages.push(s.stage);
        }
    }
    for stage in stages {
        let steps: Vec<_> = bundle.stage(stage).collect();
        let errors = steps.iter().filter(|s| s.outcome.is_error()).count();
        println!("{:<22} {:>5} {:>6}", stage_name(stage), steps.len(), errors);
    }
    for s in bundle.steps.iter().filter(|s| s.outcome.is_error()) {
        if let tsflow_core::engine::StepOutcome::Error { code, message } = &s.outcome {
            println!("  error in {}: {code}: {message}", s.op);
        }
    }
    if !table.is_empty() {
        println!();
        print!("{:<16}", "model");
        for m in &metrics {
            print!(" {:>14}", m);
        }
        println!();
        for (model, row) in &table {
            print!("{model:<16}");
            for m in &metrics {
                match row.get(m) {
                    Some(v) => print!(" {v:>14.6}"),
                    None => print!(" {:>14}", "-"),
                }
            }
            println!();
        }
        print!("{:<16}", "best");
        for m in &metrics {
            let name = best.get(m.as_str()).and_then(|b| b["model"].as_str()).unwrap_or("-");
            print!(" {name:>14}");
        }
        println!();
    }
    for w in &bundle.warnings {
        println!("warning: {w}");
    }
}

fn cmd_run(file: &Path, opts: EngineOptions, data_root: &Path, out: &Path, json: bool) -> Outcome {
    let text = read(file)?;
    let doc = parse_document(&text).map_err(|e| fail(1, e.to_string()))?;
    let report = validate(&doc, load_vocabulary());
    if !report.valid {
        print_report(&report, json);
        return Err(fail(1, "document is invalid"));
    }
    let bundle = execute(&doc, data_root, out, opts).map_err(|e| match e {
        EngineError::Io { .. } => fail(2, e.to_string()),
        other => fail(1, other.to_string()),
    })?;
    print_summary(&bundle, &bundle.run_dir(out).join("bundle.json"), json);
    Ok(match bundle.status {
        RunStatus::Succeeded => 0,
        RunStatus::Partial => 3,
        RunStatus::Failed => 1,
    })
}

fn cmd_serve(host: &str, port: u16, store: &Path, data_root: &Path) -> Outcome {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| fail(2, format!("bad listen address: {e}")))?;
    let store = Store::open(store).map_err(|e| fail(2, e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| fail(2, e.to_string()))?;
    runtime
        .block_on(tsflow_catalog::serve(Arc::new(store), data_root.to_path_buf(), addr))
        .map_err(|e| fail(2, e.to_string()))?;
    Ok(0)
}

fn catalog_failure(e: CatalogError, json: bool) -> Failure {
    if let CatalogError::Invalid(report) = &e {
        print_report(report, json);
    }
    let code = match e {
        CatalogError::Storage { .. } => 2,
        _ => 1,
    };
    fail(code, e.to_string())
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

/// Status and parsed body of a service reply; transport problems exit 2.
fn reply(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>, url: &str) -> Result<(u16, Value), Failure> {
    let mut resp = result.map_err(|e| fail(2, format!("cannot reach {url}: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| fail(2, format!("bad reply from {url}: {e}")))?;
    let body = serde_json::from_str(&text).unwrap_or(Value::String(text));
    Ok((status, body))
}

fn service_failure(status: u16, body: &Value, json: bool) -> Failure {
    if json {
        print_json(body);
    } else if let Some(report) = body.get("report") {
        if let Ok(report) = serde_json::from_value::<ValidationReport>(report.clone()) {
            print_report(&report, false);
        }
    }
    let code = body["error"].as_str().unwrap_or("Error");
    let message = body["message"].as_str().unwrap_or("");
    fail(if status >= 500 { 2 } else { 1 }, format!("{code} ({status}) {message}"))
}

fn cmd_import(source: &str, force: bool, target: &Target, json: bool) -> Outcome {
    let text = if source.starts_with("http://") || source.starts_with("https://") {
        let (status, body) = reply(agent().get(source).call(), source)?;
        match (status, body) {
            (200, Value::String(s)) => s,
            (200, v) => v.to_string(),
            (status, _) => return Err(fail(2, format!("cannot fetch {source}: HTTP {status}"))),
        }
    } else {
        read(Path::new(source))?
    };
    let (id, created) = if target.offline {
        let store = Store::open(&target.store).map_err(|e| fail(2, e.to_string()))?;
        let imported = store.import_document(&text, force).map_err(|e| catalog_failure(e, json))?;
        (imported.id, imported.created)
    } else {
        let url = format!("{}/workflows", target.url.trim_end_matches('/'));
        let request = agent()
            .post(&url)
            .query("force", if force { "true" } else { "false" })
            .header("content-type", "application/ld+json");
        let (status, body) = reply(request.send(text.as_str()), &url)?;
        if !(200..300).contains(&status) {
            return Err(service_failure(status, &body, json));
        }
        (body["id"].as_str().unwrap_or_default().to_string(), status == 201)
    };
    if json {
        print_json(&json!({"id": id, "created": created}));
    } else if created {
        println!("imported {id}");
    } else {
        println!("{id} already stored with identical content");
    }
    Ok(0)
}

fn cmd_query(cq: &str, args: QueryArgs, target: &Target) -> Outcome {
    let answer = if target.offline {
        let query = CompetencyQuery::from_args(cq, &args).map_err(|e| fail(1, e.to_string()))?;
        let store = Store::open(&target.store).map_err(|e| fail(2, e.to_string()))?;
        store.answer(&query).map_err(|e| catalog_failure(e, true))?
    } else {
        let number = CompetencyQuery::from_args(cq, &args)
            .map(|_| cq.trim_start_matches(|c: char| c.is_ascii_alphabetic()).to_string())
            .map_err(|e| fail(1, e.to_string()))?;
        let url = format!("{}/cq/{:0>2}", target.url.trim_end_matches('/'), number);
        let mut request = agent().get(&url);
        let pairs = [
            ("id", args.id),
            ("term", args.term),
            ("run_id", args.run_id),
            ("horizon", args.horizon.map(|h| h.to_string())),
            ("metric", args.metric),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                request = request.query(k, v);
            }
        }
        let (status, body) = reply(request.call(), &url)?;
        if status != 200 {
            return Err(service_failure(status, &body, true));
        }
        body
    };
    print_json(&answer);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    let outcome = match cli.command {
        Command::Validate { file } => cmd_validate(&file, json),
        Command::Run { file, horizon, data_root, out, allow_unconverged } => {
            let opts = EngineOptions { horizon: horizon as usize, allow_unconverged };
            cmd_run(&file, opts, &data_root, &out, json)
        }
        Command::Serve { port, host, store, data_root } => cmd_serve(&host, port, &store, &data_root),
        Command::Import { source, force, target } => cmd_import(&source, force, &target, json),
        Command::Query { cq, id, term, run_id, horizon, metric, target } => {
            let args = QueryArgs { id, term, run_id, horizon, metric };
            cmd_query(&cq, args, &target)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("tsflow: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
