use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use precedent_core::{
    check_order, explain_cell, interpolate, parse_policy, serialize_matrix, Admission, CollisionStrategy, EntityKind,
    MatrixFormat, Mode, PolicyDocument, PrecedentLog, Rule, Universe,
};
use precedent_service::AppState;

/// Exit status for domain failures: conflicts, undefined cells, order mismatches.
const DOMAIN: u8 = 1;
/// Exit status for unreadable or malformed input.
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "precedent", version, about = "Interpolate access matrices from precedents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the access matrix of a policy document.
    Interpolate {
        policy: PathBuf,
        /// partial or sequential; defaults to the document setting.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, default_value = "table")]
        format: MatrixFormat,
        /// Write the matrix here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show how one cell was decided.
    Explain {
        policy: PathBuf,
        subject: String,
        object: String,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Check a policy document without interpolating.
    Validate { policy: PathBuf },
    /// Recompute the matrix under shuffled precedent orders.
    CheckOrder {
        policy: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Run the HTTP administration service.
    Serve {
        policy: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Allowed CORS origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

struct Failure(u8, String);

impl Failure {
    fn domain(msg: impl ToString) -> Self {
        Failure(DOMAIN, msg.to_string())
    }

    fn usage(msg: impl ToString) -> Self {
        Failure(USAGE, msg.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Interpolate {
            policy,
            mode,
            format,
            out,
        } => cmd_interpolate(&policy, mode, format, out.as_deref()),
        Command::Explain {
            policy,
            subject,
            object,
            mode,
        } => cmd_explain(&policy, &subject, &object, mode),
        Command::Validate { policy } => cmd_validate(&policy),
        Command::CheckOrder {
            policy,
            trials,
            seed,
            mode,
        } => cmd_check_order(&policy, trials, seed, mode),
        Command::Serve {
            policy,
            port,
            host,
            cors_origin,
        } => cmd_serve(policy, &host, port, cors_origin),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Result<PolicyDocument, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse_policy(&text).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(|e| format!("{}: {e}", path.display())).collect();
        Failure::usage(lines.join("\n"))
    })
}

fn universe(doc: &PolicyDocument) -> Result<Universe, Failure> {
    doc.universe().map_err(Failure::usage)
}

/// Batch commands cannot ask anyone, so interactive collision handling
/// falls back to rejecting the newer precedent.
fn batch_strategy(doc: &PolicyDocument) -> CollisionStrategy {
    match doc.settings.collision_strategy {
        CollisionStrategy::Interactive => {
            eprintln!("warning: interactive collision handling is unavailable here; using reject_new");
            CollisionStrategy::RejectNew
        }
        other => other,
    }
}

/// Admits the document's precedents. Rejections mean the document has no
/// admissible log under its strategy; overwrites are only reported.
fn admitted_rules(doc: &PolicyDocument, universe: &Universe) -> Result<Vec<Rule>, Failure> {
    let strategy = batch_strategy(doc);
    let (log, outcomes): (PrecedentLog, _) = doc.build_log(universe, strategy).map_err(Failure::domain)?;
    let mut rejected = Vec::new();
    let submitted = doc.rules().map_err(Failure::usage)?;
    for (candidate, outcome) in submitted.iter().zip(&outcomes) {
        match outcome {
            Admission::Admitted { precedent, replaced } => {
                for old in replaced {
                    eprintln!("warning: {} overwrites {}", precedent.rule.label(), old.rule.label());
                }
            }
            Admission::Rejected { conflict } | Admission::Pending { conflict, .. } => {
                rejected.push(format!("{} conflicts with {}", candidate.label(), conflict.rule.label()));
            }
        }
    }
    if !rejected.is_empty() {
        return Err(Failure::domain(format!(
            "{} precedent(s) rejected:\n  {}",
            rejected.len(),
            rejected.join("\n  ")
        )));
    }
    Ok(log.admitted_rules())
}

fn cmd_interpolate(policy: &Path, mode: Option<Mode>, format: MatrixFormat, out: Option<&Path>) -> Outcome {
    let doc = load(policy)?;
    let universe = universe(&doc)?;
    let rules = admitted_rules(&doc, &universe)?;
    let mode = mode.unwrap_or(doc.settings.mode);
    let matrix = interpolate(&universe, &rules, mode, doc.settings.dominance_depth).map_err(Failure::domain)?;
    let text = serialize_matrix(&matrix, format);
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    eprintln!("{mode}: {}", matrix.counts());
    Ok(())
}

fn cmd_explain(policy: &Path, subject: &str, object: &str, mode: Option<Mode>) -> Outcome {
    let doc = load(policy)?;
    let universe = universe(&doc)?;
    let rules = admitted_rules(&doc, &universe)?;
    let mode = mode.unwrap_or(doc.settings.mode);
    let matrix = interpolate(&universe, &rules, mode, doc.settings.dominance_depth).map_err(Failure::domain)?;
    let unknown = |kind: &str, id: &str| Failure::domain(format!("unknown {kind} `{id}`"));
    let s = universe
        .representative(EntityKind::Subject, &subject.into())
        .ok_or_else(|| unknown("subject", subject))?;
    let o = universe
        .representative(EntityKind::Object, &object.into())
        .ok_or_else(|| unknown("object", object))?;
    let explanation = explain_cell(&matrix, s, o).map_err(Failure::domain)?;
    println!("{}", explanation.text);
    if explanation.is_undefined() {
        return Err(Failure::domain(format!("{subject} -> {object} is undefined")));
    }
    Ok(())
}

fn cmd_validate(policy: &Path) -> Outcome {
    let doc = load(policy)?;
    let universe = universe(&doc)?;
    let rules = admitted_rules(&doc, &universe)?;
    println!(
        "{}: ok ({} subjects, {} objects, {} precedents admitted)",
        policy.display(),
        universe.subjects().len(),
        universe.objects().len(),
        rules.len()
    );
    Ok(())
}

fn cmd_check_order(policy: &Path, trials: usize, seed: u64, mode: Option<Mode>) -> Outcome {
    let doc = load(policy)?;
    let universe = universe(&doc)?;
    let rules = admitted_rules(&doc, &universe)?;
    let mode = mode.unwrap_or(doc.settings.mode);
    let depth = doc.settings.dominance_depth;
    let report =
        check_order(&rules, trials, seed, |r| interpolate(&universe, r, mode, depth)).map_err(Failure::domain)?;
    match report.mismatch {
        None => {
            println!("{mode}: {trials} permutations (seed {seed}) agree with the canonical order");
            Ok(())
        }
        Some(m) => {
            let order: Vec<String> = m.permutation.iter().map(|r| r.label()).collect();
            Err(Failure::domain(format!(
                "trial {}: {} -> {} differs\n  canonical: {}\n  permuted:  {}\n  order: {}",
                m.trial,
                m.subject,
                m.object,
                m.baseline.summary(),
                m.permuted.summary(),
                order.join(", ")
            )))
        }
    }
}

fn cmd_serve(policy: PathBuf, host: &str, port: u16, cors_origin: Option<String>) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let doc = load(&policy)?;
    let cors = cors_origin
        .map(|o| o.parse().map_err(|_| Failure::usage(format!("invalid origin `{o}`"))))
        .transpose()?;
    let state = Arc::new(AppState::new(doc, Some(policy)).map_err(Failure::usage)?);
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::domain)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::domain(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(Failure::domain)?;
        println!("listening on http://{addr}");
        precedent_service::serve(state, listener, cors, shutdown_signal())
            .await
            .map_err(Failure::domain)
    })
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("install SIGTERM handler");
        tokio::select! {
            _ = interrupt => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = interrupt.await;
    }
}
